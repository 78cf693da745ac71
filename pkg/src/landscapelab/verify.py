"""Experiment checks: uncertainty principles, u versus m, decay estimates, resolvents.

Every check returns an :class:`ExperimentReport`.  Inequalities are one-sided
with relative quadrature tolerance ``TOL_Q``; fitted constants are reported
rather than compared with fixed magnitudes.
"""
from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .agmon import agmon_distance_field, sublevel_set
from .grid import ScalarField, ball_mask
from .landscape import landscape_bounded
from .operators import assemble_real, magnetic_gradient
from .solvers import apply_resolvent, green_column, solve_linear

TOL_Q = 1e-6
SCHEMA_VERSION = 1


@dataclass
class Check:
    name: str
    value: float
    bound: float
    tol: float = TOL_Q

    @property
    def margin(self):
        return float(self.bound - self.value)

    @property
    def passed(self):
        if not (np.isfinite(self.value) and np.isfinite(self.bound)):
            return bool(self.value <= self.bound)
        return self.margin >= -self.tol * max(abs(self.bound), abs(self.value), 1e-300)

    def as_dict(self):
        return {"name": self.name, "value": _num(self.value), "bound": _num(self.bound),
                "margin": _num(self.margin), "pass": self.passed}


def _num(x):
    if x is None:
        return None
    x = float(x)
    return x if np.isfinite(x) else str(x)


@dataclass
class ExperimentReport:
    id: str
    instance: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)
    constants: dict = field(default_factory=dict)
    runtime: float = 0.0
    flags: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict, repr=False)

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    @property
    def violations(self):
        return [c for c in self.checks if not c.passed]

    def add(self, name, value, bound, tol=TOL_Q):
        self.checks.append(Check(name, float(value), float(bound), tol))

    def as_dict(self):
        return {"version": SCHEMA_VERSION, "id": self.id, "instance": self.instance,
                "checks": [c.as_dict() for c in self.checks],
                "constants": {k: _num(v) if isinstance(v, (int, float, np.floating)) else v
                              for k, v in self.constants.items()},
                "flags": self.flags, "pass": self.passed, "runtime": self.runtime}

    def write_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.as_dict(), fh, indent=2)

    def write_diagnostics_csv(self, path):
        """Flat per-node diagnostics (equal-length columns) for plotting."""
        cols = {k: np.ravel(v) for k, v in self.diagnostics.items()}
        if not cols:
            return
        length = min(len(v) for v in cols.values())
        with open(path, "w", newline="") as fh:
            fh.write(f"# experiment id={self.id} version={SCHEMA_VERSION}\n")
            writer = csv.writer(fh)
            writer.writerow(list(cols))
            for i in range(length):
                writer.writerow([repr(float(np.real(v[i]))) for v in cols.values()])


class _Timer:
    def __init__(self, report):
        self.report = report

    def __enter__(self):
        self.start = time.perf_counter()
        return self.report

    def __exit__(self, *exc):
        self.report.runtime = time.perf_counter() - self.start


# -- test functions ------------------------------------------------------------------

def _bump_1d(t):
    out = np.zeros_like(t)
    inside = np.abs(t) < 1
    out[inside] = np.exp(-1.0 / (1.0 - t[inside] ** 2))
    return out


@dataclass
class TestFunctionSet:
    """Seeded sums of tensor-product smooth bumps vanishing near the boundary.

    ``complex_`` functions carry a random plane-wave phase per bump.  Supports
    keep ``margin`` nodes away from the boundary.
    """

    grid: object
    count: int = 50
    seed: int = 0
    complex_: bool = False
    margin: int = 2
    max_bumps: int = 3
    support: object = None  # optional (lower, upper) box holding every support

    __test__ = False  # not a pytest class

    def __post_init__(self):
        g = self.grid
        rng = np.random.default_rng(self.seed)
        lo = g.lower + self.margin * g.h
        hi = g.upper - self.margin * g.h
        if self.support is not None:
            lo = np.maximum(lo, np.asarray(self.support[0], dtype=float))
            hi = np.minimum(hi, np.asarray(self.support[1], dtype=float))
        span = hi - lo
        x = g.coordinates
        funcs = []
        for _ in range(self.count):
            f = np.zeros(g.shape, dtype=complex if self.complex_ else float)
            for _ in range(rng.integers(1, self.max_bumps + 1)):
                width = rng.uniform(3 * g.h, max(3.5 * g.h, 0.35 * float(span.min())), size=g.dim)
                width = np.minimum(width, span / 2)
                center = rng.uniform(lo + width, hi - width)
                bump = np.ones(g.shape)
                for j in range(g.dim):
                    bump = bump * _bump_1d((x[..., j] - center[j]) / width[j])
                amp = rng.normal()
                if self.complex_:
                    k = rng.normal(scale=2.0, size=g.dim)
                    bump = bump * np.exp(1j * (x @ k + rng.uniform(0, 2 * np.pi)))
                f = f + amp * bump
            f[g.boundary_mask] = 0
            if not np.any(f):
                f[tuple(s // 2 for s in g.shape)] = 1.0
            funcs.append(f)
        self.functions = funcs

    def __iter__(self):
        return iter(self.functions)

    def __len__(self):
        return len(self.functions)


# -- discrete quadratic forms ------------------------------------------------------------

def _interior(M, f):
    vals = f.values if isinstance(f, ScalarField) else np.asarray(f)
    return vals.ravel()[M.nodes]


def _quadratic(M, x):
    return float(np.real(np.vdot(x, M.matrix @ x)))


def ground_state_terms(M, u_int, f_int):
    """``(sum_{x<y} -M_xy u_x u_y |g_x - g_y|^2, sum |f|^2 / u)`` with ``g = f / u``.

    For symmetric ``M`` with ``M u = 1`` their sum equals ``f^T M f`` exactly.
    """
    A = sp.triu(M.matrix, k=1).tocoo()
    g = f_int / u_int
    grad = float(np.sum(-A.data.real * u_int[A.row] * u_int[A.col] * np.abs(g[A.row] - g[A.col]) ** 2))
    pot = float(np.sum(np.abs(f_int) ** 2 / u_int))
    return grad, pot


def check_uncertainty_nonmagnetic(u, A=None, V=0.0, fs=None, lam=1.0, M=None):
    """``int f^2/u <= int A grad f.grad f / lam^4 + int V f^2`` for every test function.

    For symmetric ``A`` the strong form with ``int u^2 A grad(f/u).grad(f/u)``
    on the left is checked as well.
    """
    rep = ExperimentReport("uncertainty-nonmagnetic")
    with _Timer(rep):
        grid = u.grid
        hn = grid.cell_volume
        M = M if M is not None else assemble_real(grid, A, V)
        M0 = assemble_real(grid, A, 0.0)
        Vint = _interior(M, V if isinstance(V, ScalarField) else np.broadcast_to(V, grid.shape))
        u_int = _interior(M, u)
        symmetric = M.kind == "symmetric"
        fs = fs if fs is not None else TestFunctionSet(grid)
        worst = np.inf
        for i, f in enumerate(fs):
            x = _interior(M, f).real
            rhs = hn * (_quadratic(M0, x) / lam ** 4 + float(np.sum(Vint * x * x)))
            grad, pot = ground_state_terms(M, u_int, x)
            rep.add(f"f{i}:weak", hn * pot, rhs)
            if symmetric:
                rep.add(f"f{i}:strong", hn * (grad + pot), rhs)
            worst = min(worst, (rhs - hn * pot) / max(rhs, 1e-300))
        rep.constants["min_relative_margin"] = float(worst)
        rep.instance = {"grid": list(grid.shape), "h": grid.h, "functions": len(fs), "lambda": lam}
    return rep


def magnetic_energy(grid, phases, f, V=0.0, factor=1.0):
    """``h^n [factor * sum_e |f_y - e^{i theta} f_x|^2 / h^2 + sum V |f|^2]``."""
    vals = f.values if isinstance(f, ScalarField) else np.asarray(f)
    Dg = magnetic_gradient(grid, phases, vals)
    Vv = np.broadcast_to(V.values if isinstance(V, ScalarField) else V, grid.shape)
    return grid.cell_volume * (factor * float(np.sum(np.abs(Dg) ** 2))
                               + float(np.sum(Vv * np.abs(vals) ** 2)))


def check_uncertainty_magnetic(u_S, phases, V=0.0, fs=None):
    """``int u_S^2 |grad(|f|/u_S)|^2 + int |f|^2/u_S <= int n |D_a f|^2 + V |f|^2``.

    ``u_S`` is a :class:`LandscapeResult` from the magnetic surrogate (its
    operator supplies the couplings of the left-hand side).
    """
    rep = ExperimentReport("uncertainty-magnetic")
    with _Timer(rep):
        M = u_S.operator
        grid = M.grid
        u_int = _interior(M, u_S.u)
        fs = fs if fs is not None else TestFunctionSet(grid, complex_=True)
        worst = np.inf
        for i, f in enumerate(fs):
            grad, pot = ground_state_terms(M, u_int, np.abs(_interior(M, f)))
            lhs = grid.cell_volume * (grad + pot)
            rhs = magnetic_energy(grid, phases, f, V, factor=grid.dim)
            rep.add(f"f{i}", lhs, rhs)
            worst = min(worst, (rhs - lhs) / max(rhs, 1e-300))
        rep.constants["min_relative_margin"] = float(worst)
        rep.instance = {"grid": list(grid.shape), "h": grid.h, "functions": len(fs)}
    return rep


def check_fefferman_phong(m, V=0.0, fs=None, phases=None, A=None):
    """Best constant ``C`` in ``int m^2 |f|^2 <= C int |grad f|^2 + V |f|^2``.

    With ``phases`` the magnetic energy ``|D_a f|^2`` replaces ``|grad f|^2``.
    """
    rep = ExperimentReport("fefferman-phong")
    with _Timer(rep):
        mf = m.m if hasattr(m, "m") else m
        grid = mf.grid
        m2 = mf.values ** 2
        fs = fs if fs is not None else TestFunctionSet(grid, complex_=phases is not None)
        ratios = []
        if phases is None:
            M = assemble_real(grid, A, V)
        for f in fs:
            lhs = grid.cell_volume * float(np.sum(m2 * np.abs(f) ** 2))
            if phases is None:
                x = _interior(M, f).real
                rhs = grid.cell_volume * _quadratic(M, x)
            else:
                rhs = magnetic_energy(grid, phases, f, V)
            ratios.append(lhs / rhs)
        C = float(np.max(ratios))
        rep.constants["C"] = C
        rep.add("C finite", C, np.inf)
        rep.diagnostics["ratio"] = np.array(ratios)
        rep.instance = {"grid": list(grid.shape), "h": grid.h, "functions": len(fs),
                        "magnetic": phases is not None}
    return rep


# -- u versus m, Harnack -------------------------------------------------------------------

def window_mask(grid, half_width, center=None):
    c = np.zeros(grid.dim) if center is None else np.asarray(center, dtype=float)
    return np.all(np.abs(grid.coordinates - c) <= half_width + 1e-9, axis=-1)


def compare_spread(u, m, window):
    """``max / min`` of ``u m^2`` over the window (clamped ``m`` excluded)."""
    vals = u.values * m.m.values ** 2
    ok = np.asarray(window, dtype=bool) & m.valid & (u.values > 0)
    sel = vals[ok]
    return float(sel.max() / sel.min()), sel


def check_compare_u_vs_m(u, m, window, spread_cap=50.0):
    rep = ExperimentReport("compare-u-m")
    with _Timer(rep):
        spread, sel = compare_spread(u, m, window)
        rep.constants.update(spread=spread, ratio_min=float(sel.min()), ratio_max=float(sel.max()),
                             nodes=int(sel.size))
        rep.add("spread", spread, spread_cap)
        rep.diagnostics["u_m2"] = sel
        rep.instance = {"grid": list(u.grid.shape), "h": u.grid.h, "C1": m.C1}
    return rep


def harnack_constant(u, window, samples=400, seed=0):
    """Largest ``max(sup_B u / u(x), u(x) / inf_B u)`` over balls ``B(x, max(sqrt u(x), h))``.

    Centres are sampled in ``window`` and balls leaving it are skipped.  The
    radius floor ``h`` keeps balls above the grid resolution.
    """
    grid = u.grid
    rng = np.random.default_rng(seed)
    win = np.asarray(window, dtype=bool)
    cand = np.argwhere(win & grid.interior_mask)
    pts = grid.coordinates
    worst = 1.0
    used = 0
    for idx in cand[rng.permutation(len(cand))]:
        if used >= samples:
            break
        ux = float(u.values[tuple(idx)])
        r = max(np.sqrt(ux), grid.h)
        ball = ball_mask(grid, pts[tuple(idx)], r)
        if not np.all(win[ball]):
            continue
        vals = u.values[ball]
        worst = max(worst, float(vals.max()) / ux, ux / float(vals.min()))
        used += 1
    return worst, used


def long_distance_fit(u, window, pairs=2000, seed=0, k_max=8, slack=0.1):
    """Smallest ``k0`` whose two-sided long-distance constant is within ``slack``
    of the best over ``1..k_max``; returns ``(k0, C)``.

    Larger ``k0`` only loosens both bounds, so the raw minimum always sits at
    ``k_max``; the smallest nearly optimal exponent is the informative one.
    """
    grid = u.grid
    rng = np.random.default_rng(seed)
    nodes = np.argwhere(np.asarray(window, dtype=bool) & grid.interior_mask)
    a = nodes[rng.integers(len(nodes), size=pairs)]
    b = nodes[rng.integers(len(nodes), size=pairs)]
    ux = u.values[tuple(a.T)]
    uy = u.values[tuple(b.T)]
    d = grid.h * np.linalg.norm(a - b, axis=1)
    R = np.sqrt(uy / ux)  # (1/sqrt u(x)) / (1/sqrt u(y))
    s = 1.0 + d / np.sqrt(uy)
    consts = [max(1.0, float(np.max(R / s ** k)), float(np.max(s ** (-k / (k + 1)) / R)))
              for k in range(1, k_max + 1)]
    best = min(consts)
    k0 = next(k for k, C in enumerate(consts, 1) if C <= (1 + slack) * best)
    return k0, consts[k0 - 1]


def check_harnack_and_longdistance(u, window, samples=400, seed=0, refined=None, drift=0.25):
    """Harnack and long-distance constants; with ``refined`` (a ``(u, window)``
    pair on a finer grid) also the drift of the Harnack constant."""
    rep = ExperimentReport("harnack-longdistance")
    with _Timer(rep):
        C, used = harnack_constant(u, window, samples, seed)
        k0, CL = long_distance_fit(u, window, seed=seed)
        rep.constants.update(harnack_C=C, balls=used, k0=k0, longdistance_C=CL)
        rep.add("harnack C finite", C, np.inf)
        rep.add("long-distance C finite", CL, np.inf)
        if refined is not None:
            C2, _ = harnack_constant(refined[0], refined[1], samples, seed)
            change = abs(C2 - C) / C
            rep.constants.update(harnack_C_refined=C2, harnack_drift=change)
            rep.add("harnack drift", change, drift, tol=0.0)
            if change > drift:
                rep.flags.append("not slowly varying")
        rep.instance = {"grid": list(u.grid.shape), "h": u.grid.h}
    return rep


# -- decay fits ------------------------------------------------------------------------

def _linear_fit(x, y):
    A = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    corr = float(np.corrcoef(x, y)[0, 1]) if x.size > 2 and np.std(x) > 0 and np.std(y) > 0 else float("nan")
    return float(coef[0]), float(coef[1]), corr


def envelope_slopes(x, y, bins=20):
    """Least-squares slopes of the per-bin maxima and minima of ``y`` against ``x``."""
    edges = np.linspace(x.min(), x.max(), bins + 1)
    which = np.clip(np.digitize(x, edges) - 1, 0, bins - 1)
    xs, hi, lo = [], [], []
    for b in range(bins):
        sel = which == b
        if sel.sum() < 1:
            continue
        xs.append(0.5 * (edges[b] + edges[b + 1]))
        hi.append(y[sel].max())
        lo.append(y[sel].min())
    xs = np.array(xs)
    return _linear_fit(xs, np.array(hi))[0], _linear_fit(xs, np.array(lo))[0]


def _tail(rho, admissible):
    cut = np.median(rho[admissible])
    return admissible & (rho >= cut)


def check_decay_green(M, u, source, shen=False, boundary_margin=None, euclidean=True, tol=1e-10):
    """Green-column decay in the Agmon metric with weight ``1/u``.

    ``y(x) = log|g(x)| + (n-2) log|x - y0|`` is compared with ``rho(x, y0, 1/u)``
    over nodes at least ``4h`` from the source and ``boundary_margin`` from
    the box boundary.  The upper rate ``alpha`` and lower rate ``eps1`` are
    slopes of the upper and lower envelopes over the tail; constants are the
    smallest making both bounds hold at every admissible node.  With
    ``euclidean`` the rate against ``|x - y0|`` is reported relative to
    ``1/sqrt(max u)``.
    """
    rep = ExperimentReport("decay-green")
    with _Timer(rep):
        grid = M.grid
        n = grid.dim
        g, report = green_column(M, source, tol=tol)
        uu = u.u if hasattr(u, "u") else u
        w = np.zeros(grid.shape)
        inner = grid.interior_mask
        w[inner] = 1.0 / uu.values[inner]
        w[~inner] = w[inner].max()
        rho = agmon_distance_field(ScalarField(grid, w), [grid.ravel_index(source)]).rho.values
        y0 = grid.coordinates[tuple(source)]
        r = np.linalg.norm(grid.coordinates - y0, axis=-1)
        margin = boundary_margin if boundary_margin is not None else 4 * grid.h
        gabs = np.abs(g.values)
        ok = (r >= 4 * grid.h - 1e-12) & (grid.distance_to_boundary() >= margin) & inner
        nonpos = int(np.sum(ok & (np.real(g.values) <= 0))) if not np.iscomplexobj(g.values) else 0
        ok &= gabs > 0
        rep.constants["excluded_nonpositive"] = nonpos
        rep.instance = {"grid": list(grid.shape), "h": grid.h, "source": list(map(int, source)),
                        "solve_iterations": report.iterations}
        if ok.sum() < 10:
            rep.add("admissible nodes >= 10", -float(ok.sum()), -10.0, tol=0.0)
            return rep
        y = np.log(gabs[ok]) + (n - 2) * np.log(r[ok])
        rh = rho[ok]
        tail = _tail(rho, ok)[ok]
        s_hi, s_lo = envelope_slopes(rh[tail], y[tail])
        alpha, eps1 = -s_hi, -s_lo
        logC_up = float(np.max(y + alpha * rh))
        rep.constants.update(alpha=alpha, C_upper=float(np.exp(logC_up)))
        rep.add("upper rate alpha >= 0.1", -alpha, -0.1, tol=0.0)
        if shen:
            logC_lo = float(np.max(-y - eps1 * rh))
            rep.constants.update(eps1=eps1, C_lower=float(np.exp(logC_lo)))
            rep.add("lower rate eps1 finite and positive", -eps1, 0.0, tol=0.0)
        if euclidean:
            U = float(uu.values.max())
            beta_hi, _ = envelope_slopes(r[ok][tail], y[tail])
            rate = -beta_hi
            rep.constants.update(U=U, euclid_rate=rate, euclid_rate_scaled=rate * np.sqrt(U),
                                 C_euclid=float(np.exp(np.max(y + rate * r[ok]))))
            rep.add("euclidean rate >= 0.2/sqrt(U)", 0.2 / np.sqrt(U), rate, tol=0.0)
        rep.diagnostics.update(rho=rh, r=r[ok], logg=y)
    return rep


def weighted_mass(u_int, rho_int, psi_int, eps):
    return float(np.sum(np.exp(2 * eps * rho_int) * np.abs(psi_int) ** 2 / u_int))


def check_decay_lax_milgram(M, u, f, eps_ladder=(0.5, 0.24, 0.1, 0.05), A_symmetric=None, tol=1e-10):
    """``int (1/u) e^{2 eps rho(., supp f, 1/u)} |M^{-1} f|^2 <= C int u f^2``.

    ``C_fit(eps)`` is reported per ``eps``.  For real symmetric operators and
    ``eps < 1/4`` the explicit constant ``(1 - eps^2)^{-2}`` is checked too.
    """
    rep = ExperimentReport("decay-lax-milgram")
    with _Timer(rep):
        grid = M.grid
        uu = u.u if hasattr(u, "u") else u
        fv = f.values if isinstance(f, ScalarField) else np.asarray(f)
        f_int = fv.ravel()[M.nodes]
        psi, report = solve_linear(M, f_int.astype(M.dtype), tol=tol)
        u_int = uu.values.ravel()[M.nodes]
        w = np.zeros(grid.shape)
        inner = grid.interior_mask
        w[inner] = 1.0 / uu.values[inner]
        w[~inner] = w[inner].max()
        support = np.abs(fv) > 0
        rho = agmon_distance_field(ScalarField(grid, w), support).rho.values.ravel()[M.nodes]
        rhs = float(np.sum(u_int * np.abs(f_int) ** 2))
        symmetric = A_symmetric if A_symmetric is not None else M.kind == "symmetric"
        fits = {}
        for eps in eps_ladder:
            C = weighted_mass(u_int, rho, psi, eps) / rhs
            fits[eps] = C
            rep.constants[f"C_fit[{eps}]"] = C
            rep.add(f"C_fit[{eps}] finite", C, np.inf)
            if symmetric and eps < 0.25:
                rep.add(f"explicit bound eps={eps}", C, 1.0 / (1 - eps ** 2) ** 2)
        rep.diagnostics["C_fit"] = np.array(list(fits.values()))
        rep.instance = {"grid": list(grid.shape), "h": grid.h, "eps": list(eps_ladder),
                        "solve_iterations": report.iterations}
    return rep


def check_decay_eigenfunction(M, u, mu, psi, boundary_margin=None, alpha=0.2, slope_min=0.2,
                              corr_min=0.9):
    """Tail slope of ``-log|psi|`` against ``rho(., E, (1/u - mu)_+)``.

    The tail is the set of nodes beyond the median of ``rho`` (nodes in
    ``E`` and within ``boundary_margin`` of the boundary excluded).  The
    integral form with exponent ``alpha`` is evaluated and its two sides are
    reported.
    """
    rep = ExperimentReport("decay-eigenfunction")
    with _Timer(rep):
        grid = M.grid
        uu = u.u if hasattr(u, "u") else u
        level = sublevel_set(uu, mu)
        rep.constants["E_components"] = level.components
        if level.empty:
            rep.flags.append("vacuous: E is empty")
            return rep
        if level.mask.sum() == grid.interior_mask.sum():
            rep.flags.append("vacuous: E covers the grid")
            return rep
        rho = agmon_distance_field(level.w, level.mask).rho.values
        psiv = psi.values if isinstance(psi, ScalarField) else np.asarray(psi).reshape(grid.shape)
        margin = boundary_margin if boundary_margin is not None else 10 * grid.h
        ok = grid.interior_mask & (grid.distance_to_boundary() >= margin) & ~level.mask \
            & (np.abs(psiv) > 0)
        tail = _tail(rho, ok)
        x = rho[tail]
        y = -np.log(np.abs(psiv[tail]))
        slope, _, corr = _linear_fit(x, y)
        rep.constants.update(slope=slope, correlation=corr, tail_nodes=int(tail.sum()))
        rep.add("slope >= s_min", -slope, -slope_min, tol=0.0)
        rep.add("correlation >= r_min", -corr, -corr_min, tol=0.0)

        # integral form
        u_int = uu.values.ravel()[M.nodes]
        p_int = psiv.ravel()[M.nodes]
        r_int = rho.ravel()[M.nodes]
        g_vec = np.exp(alpha * r_int) * p_int
        grad, _ = ground_state_terms(M, u_int, g_vec)
        inv = 1.0 / u_int
        lhs = grad + float(np.sum(np.maximum(inv - mu, 0) * np.exp(2 * alpha * r_int) * np.abs(p_int) ** 2))
        inE = level.mask.ravel()[M.nodes]
        rhs = float(np.sum(np.maximum(mu - inv[inE], 0) * np.abs(p_int[inE]) ** 2)) / (1 - alpha ** 2)
        rep.constants.update(integral_lhs=lhs * grid.cell_volume, integral_rhs=rhs * grid.cell_volume)
        rep.diagnostics.update(rho=x, neglog_psi=y)
        rep.instance = {"grid": list(grid.shape), "h": grid.h, "mu": float(mu)}
    return rep


def check_resolvent_decay(M, V, f, t_ladder=(0.25, 0.5, 1.0, 2.0), alpha=0.1, A=None, tol=1e-10):
    """``int (1/u_t) e^{2 alpha rho(., supp f, 1/u_t)} |R_t f|^2 <= C t^{-4} int u_t f^2``.

    ``u_t`` is the landscape of ``V + 1/t^2``; ``C_fit(t)`` is reported per
    ``t`` and the explicit constant ``(1 - alpha^2)^{-2}`` is checked for
    ``alpha < 1/4``.
    """
    rep = ExperimentReport("decay-resolvent")
    with _Timer(rep):
        grid = M.grid
        fv = f.values if isinstance(f, ScalarField) else np.asarray(f)
        f_int = fv.ravel()[M.nodes]
        Vv = V.values if isinstance(V, ScalarField) else np.broadcast_to(V, grid.shape)
        fits = []
        for t in t_ladder:
            ut = landscape_bounded(grid, A, ScalarField(grid, Vv + 1.0 / t ** 2), tol=tol).u
            x, _ = apply_resolvent(M, t, f_int, tol=tol)
            w = np.zeros(grid.shape)
            inner = grid.interior_mask
            w[inner] = 1.0 / ut.values[inner]
            w[~inner] = w[inner].max()
            rho = agmon_distance_field(ScalarField(grid, w), np.abs(fv) > 0).rho.values.ravel()[M.nodes]
            ut_int = ut.values.ravel()[M.nodes]
            C = weighted_mass(ut_int, rho, x, alpha) * t ** 4 / float(np.sum(ut_int * np.abs(f_int) ** 2))
            fits.append(C)
            rep.constants[f"C_fit[t={t}]"] = C
            if alpha < 0.25 and M.kind == "symmetric":
                rep.add(f"explicit bound t={t}", C, 1.0 / (1 - alpha ** 2) ** 2)
        rep.constants["C_uniform"] = float(max(fits))
        rep.add("uniform C finite", max(fits), np.inf)
        rep.instance = {"grid": list(grid.shape), "h": grid.h, "t": list(t_ladder), "alpha": alpha}
    return rep


def drift(a, b):
    """Relative change ``|b - a| / |a|`` used by refinement-stability checks."""
    return abs(b - a) / abs(a)
