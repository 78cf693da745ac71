"""Eigenvalue counting ``N(mu)``, the cube proxy ``Ntilde(mu)`` and dyadic bound counts."""
from __future__ import annotations

import csv
import itertools
import json
import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .grid import ScalarField
from .solvers import DENSE_LIMIT, gershgorin_shift, lowest_eigenpairs, shift_invert_operator

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1


class ResolutionError(ValueError):
    """Cube side below the resolution of the sampled fields."""


def inertia_count(M, mu):
    """Eigenvalues below ``mu`` by Sylvester's law of inertia.

    Factors ``M - mu I = L D L^*`` with a symmetric fill-reducing ordering and
    no row pivoting, then counts negative pivots.  Used as a size estimate and
    cross-check for the Lanczos count.
    """
    A = (M.matrix - mu * sp.identity(M.n, dtype=M.dtype, format="csc")).tocsc()
    lu = spla.splu(A, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                   options={"SymmetricMode": True})
    if not (np.array_equal(lu.perm_r, lu.perm_c)):
        raise RuntimeError("factorization pivoted; inertia is not available")
    return int(np.sum(lu.U.diagonal().real < 0))


def eigenvalues_below(M, mu, cap=400):
    """Sorted eigenvalues below ``mu`` and whether the list is complete.

    Large operators run shift-invert Lanczos, growing the number of requested
    pairs until one at or above ``mu`` is found (or ``cap`` is reached).  The
    first request is sized from the inertia count and one factorization is
    reused across requests.
    """
    if not M.is_self_adjoint:
        raise ValueError("counting needs a symmetric or Hermitian operator")
    if M.n <= DENSE_LIMIT:
        w = scipy.linalg.eigvalsh(M.todense())
        return w[w < mu], True
    try:
        guess = inertia_count(M, mu)
    except RuntimeError:
        guess = 14
    sigma = gershgorin_shift(M.matrix)
    opinv = shift_invert_operator(M, sigma)
    k = min(guess + 2, cap, M.n - 2)
    while True:
        w = lowest_eigenpairs(M, k, sigma=sigma, opinv=opinv).eigenvalues
        if w[-1] >= mu:
            return w[w < mu], True
        if k >= min(cap, M.n - 2):
            log.warning("eigenvalue cap %d reached below mu=%g; count is a lower bound", k, mu)
            return w, False
        k = min(2 * k, cap, M.n - 2)


def count_eigenvalues(M, mu, cap=400, return_flag=False):
    """Number of eigenvalues strictly below ``mu``.

    With ``return_flag`` also returns ``True`` when the count is exact and
    ``False`` when the eigenvalue cap was reached first (then it is a lower bound).
    """
    w, exact = eigenvalues_below(M, mu, cap)
    return (int(w.size), exact) if return_flag else int(w.size)


# -- cube proxy ------------------------------------------------------------------

def _cube_layout(lower, upper, side):
    lower = np.asarray(lower, dtype=float)
    length = np.asarray(upper, dtype=float) - lower
    full = np.floor(length / side + 1e-9).astype(int)
    partial = np.ceil(length / side - 1e-9).astype(int)
    return full, int(np.prod(partial) - np.prod(full))


def _field_cube_means(fields, lower, side, full, power):
    """Node-inclusion means of ``f**power`` over half-open cubes of sampled fields."""
    grid = fields[0].grid
    x = grid.coordinates
    cell = np.floor((x - lower) / side + 1e-9).astype(int)
    inside = np.all((cell >= 0) & (cell < full), axis=-1)
    flat = np.ravel_multi_index(tuple(cell[inside].T), tuple(full))
    counts = np.bincount(flat, minlength=int(np.prod(full)))
    out = []
    for f in fields:
        vals = np.abs(np.asarray(f.values, dtype=float)[inside]) ** power
        out.append(np.bincount(flat, weights=vals, minlength=counts.size) / np.maximum(counts, 1))
    return out, counts


def _callable_cube_means(fns, lower, side, full, power, order=3, chunk=16):
    """Gauss-Legendre means of ``|f|**power`` over every cube (f callable on positions)."""
    dim = full.size
    t, wq = np.polynomial.legendre.leggauss(order)
    t, wq = 0.5 * (t + 1.0), 0.5 * wq
    axes = [lower[j] + side * (np.arange(full[j])[:, None] + t[None, :]) for j in range(dim)]
    means = [np.zeros(tuple(full)) for _ in fns]
    for start in range(0, full[0], chunk):
        stop = min(start + chunk, full[0])
        pts_axes = [axes[0][start:stop].ravel()] + [a.ravel() for a in axes[1:]]
        mesh = np.stack(np.meshgrid(*pts_axes, indexing="ij"), axis=-1)
        shape = [stop - start, order] + [s for j in range(1, dim) for s in (full[j], order)]
        for out, fn in zip(means, fns):
            vals = (np.abs(np.asarray(fn(mesh), dtype=float)) ** power).reshape(shape)
            for _ in range(dim):
                # contract the quadrature axis following each cube axis
                vals = np.tensordot(vals, wq, axes=([1], [0]))
                vals = np.moveaxis(vals, 0, -1)
            out[start:stop] = vals
    return means


@dataclass
class CubeCount:
    count: int
    discarded: int
    cubes: int
    side: float

    def __int__(self):
        return self.count


def cube_count(B_abs, V, mu, lower=None, upper=None, quad_order=3):
    """Number of anchored cubes of side ``1/sqrt(mu)`` with

    ``(avg_Q |B|^(n/2))^(2/n) + (avg_Q V^(n/2))^(2/n) < mu``.

    ``B_abs`` and ``V`` are both ScalarFields (cube side must be at least
    ``2h``; averages over the nodes of each half-open cube) or both callables
    of positions, integrated by tensor Gauss quadrature on the box
    ``[lower, upper]``.  Cubes start at the lower corner; cubes cut by the far
    faces are discarded and counted in ``discarded``.
    """
    if not mu > 0:
        raise ValueError("cube counting needs mu > 0")
    side = 1.0 / np.sqrt(mu)
    if isinstance(V, ScalarField):
        grid = V.grid
        if B_abs is not None and B_abs.grid != grid:
            raise ValueError("|B| and V must live on the same grid")
        if side < 2 * grid.h - 1e-12:
            raise ResolutionError(f"cube side {side:.4g} is below 2h = {2 * grid.h:.4g}")
        lower, upper = grid.lower, grid.upper
        full, discarded = _cube_layout(lower, upper, side)
        fields = [V] if B_abs is None else [V, B_abs]
        means, counts = _field_cube_means(fields, np.asarray(lower), side, full, grid.dim / 2)
        means = [m.reshape(tuple(full)) for m in means]
        dim = grid.dim
    else:
        if lower is None or upper is None:
            raise ValueError("callable potentials need the box corners")
        lower = np.asarray(lower, dtype=float)
        dim = lower.size
        full, discarded = _cube_layout(lower, upper, side)
        fns = [V] if B_abs is None else [V, B_abs]
        means = _callable_cube_means(fns, lower, side, full, dim / 2, quad_order)
    total = sum(m ** (2.0 / dim) for m in means)
    return CubeCount(int(np.sum(total < mu)), discarded, int(np.prod(full)), float(side))


def cube_counting_Ntilde(B_abs, V, mu, lower=None, upper=None):
    """``Ntilde(mu)`` as an integer; see :func:`cube_count`."""
    return cube_count(B_abs, V, mu, lower, upper).count


# -- dyadic negative-eigenvalue count -------------------------------------------------

def _prefix(arr):
    out = np.zeros(tuple(s + 1 for s in arr.shape))
    out[tuple(slice(1, None) for _ in arr.shape)] = arr
    for ax in range(arr.ndim):
        np.cumsum(out, axis=ax, out=out)
    return out


def _box_sum(pre, lo, hi):
    total = 0.0
    for corner in itertools.product((0, 1), repeat=len(lo)):
        idx = tuple(h if c else l for c, l, h in zip(corner, lo, hi))
        sign = (-1) ** (len(lo) - sum(corner))
        total += sign * pre[idx]
    return total


def dyadic_N0(V, B_abs=None, m_of_B=None, mu=0.0, p=2.0, c=1.0, alpha=0.5):
    """Count of minimal dyadic cubes satisfying the negative-eigenvalue conditions.

    Starting from the whole box (cells ``[0, shape-1)`` on each axis), a cube
    ``Q`` of side ``l`` is counted and not subdivided when

    * ``l^2 (avg_Q |V|^p)^(1/p) >= c``,
    * ``l < 1/sqrt(|mu|)`` (no constraint when ``mu = 0``),
    * ``l < alpha / m(x, |B|)`` for every node of ``Q`` (no constraint when
      ``m_of_B`` is ``None``, i.e. no magnetic field).

    Other cubes are halved while their side stays at least ``2h``.
    """
    if mu > 0:
        raise ValueError("dyadic_N0 concerns mu <= 0")
    if p <= 1:
        raise ValueError("p must exceed 1")
    grid = V.grid
    h = grid.h
    vals = np.abs(np.asarray(V.values, dtype=float)) ** p
    cells = tuple(slice(0, s - 1) for s in grid.shape)
    pre_v = _prefix(vals[cells])
    pre_n = _prefix(np.ones(vals[cells].shape))
    if m_of_B is not None:
        mv = np.asarray(m_of_B.m.values if hasattr(m_of_B, "m") else m_of_B.values, dtype=float)[cells]
    side_cap = np.inf if mu == 0 else 1.0 / np.sqrt(-mu)

    count = 0
    stack = [(np.zeros(grid.dim, dtype=int), np.array(grid.shape) - 1)]
    while stack:
        lo, hi = stack.pop()
        ell = h * float(np.max(hi - lo))
        n_nodes = _box_sum(pre_n, lo, hi)
        mean = _box_sum(pre_v, lo, hi) / n_nodes
        ok = ell ** 2 * mean ** (1.0 / p) >= c and ell < side_cap
        if ok and m_of_B is not None:
            sub = mv[tuple(slice(a, b) for a, b in zip(lo, hi))]
            ok = ell < alpha / float(sub.max())
        if ok:
            count += 1
            continue
        if ell / 2 < 2 * h - 1e-12:
            continue
        mid = (lo + hi) // 2
        for pick in itertools.product((0, 1), repeat=grid.dim):
            nlo = np.where(pick, mid, lo)
            nhi = np.where(pick, hi, mid)
            if np.all(nhi > nlo):
                stack.append((nlo, nhi))
    return count


# -- sandwich fits ---------------------------------------------------------------

def ladder(k_min=-16, k_max=16):
    """Candidate constants ``2^(k/4)``."""
    return [2.0 ** (k / 4) for k in range(k_min, k_max + 1)]


@dataclass
class SandwichFit:
    c1: float | None
    c2: float | None
    feasible: bool
    violations: dict = field(default_factory=dict)
    table: dict = field(default_factory=dict, repr=False)


def fit_sandwich_constants(mus, N, Ntilde, candidates=None):
    """Largest ``c1`` and smallest ``c2`` with ``Ntilde(c1 mu) <= N(mu) <= Ntilde(c2 mu)``.

    ``N`` is a sequence aligned with ``mus``; ``Ntilde`` is a callable of the
    threshold (memoised here) or a dict keyed by threshold.
    """
    candidates = ladder() if candidates is None else list(candidates)
    memo = {}

    def Nt(x):
        key = round(float(x), 12)
        if key not in memo:
            memo[key] = int(Ntilde[x] if isinstance(Ntilde, dict) else Ntilde(x))
        return memo[key]

    lower_ok = [c for c in candidates if all(Nt(c * m) <= n for m, n in zip(mus, N))]
    upper_ok = [c for c in candidates if all(n <= Nt(c * m) for m, n in zip(mus, N))]
    c1 = max(lower_ok) if lower_ok else None
    c2 = min(upper_ok) if upper_ok else None
    violations = {}
    if c1 is None:
        c = min(candidates)
        violations["lower"] = [m for m, n in zip(mus, N) if Nt(c * m) > n]
    if c2 is None:
        c = max(candidates)
        violations["upper"] = [m for m, n in zip(mus, N) if n > Nt(c * m)]
    return SandwichFit(c1, c2, c1 is not None and c2 is not None, violations, dict(memo))


@dataclass
class CountingReport:
    mu_grid: list
    N: list
    Ntilde: list
    exact: list = field(default_factory=list)
    c1: float | None = None
    c2: float | None = None
    feasible: bool = False
    violations: dict = field(default_factory=dict)
    N0: list = field(default_factory=list)
    Ntilde_table: dict = field(default_factory=dict, repr=False)

    def rows(self):
        for i, mu in enumerate(self.mu_grid):
            low = self.Ntilde_table.get(round(self.c1 * mu, 12)) if self.c1 else None
            high = self.Ntilde_table.get(round(self.c2 * mu, 12)) if self.c2 else None
            yield {"mu": mu, "N": self.N[i], "Ntilde": self.Ntilde[i],
                   "Ntilde_c1mu": low, "Ntilde_c2mu": high}

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            fh.write(f"# counting version={SCHEMA_VERSION}\n")
            writer = csv.DictWriter(fh, fieldnames=["mu", "N", "Ntilde", "Ntilde_c1mu", "Ntilde_c2mu"])
            writer.writeheader()
            for row in self.rows():
                writer.writerow(row)

    def summary(self):
        return {"version": SCHEMA_VERSION, "c1": self.c1, "c2": self.c2, "feasible": self.feasible,
                "violations": self.violations, "exact_counts": all(self.exact),
                "N0": self.N0}

    def write_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.summary(), fh, indent=2)

    @property
    def monotone(self):
        return bool(np.all(np.diff(self.N) >= 0) and np.all(np.diff(self.Ntilde) >= 0))


def counting_sweep(M, mus, V, B_abs=None, lower=None, upper=None, candidates=None, cap=400):
    """``N`` and ``Ntilde`` on a threshold sweep plus the fitted sandwich constants.

    ``V`` and ``B_abs`` follow :func:`cube_count` (callables need the box).
    """
    grid = M.grid
    lower = grid.lower if lower is None else lower
    upper = grid.upper if upper is None else upper
    if B_abs is None:
        if isinstance(V, ScalarField):
            B_abs = ScalarField(V.grid, np.zeros(V.grid.shape))
        else:
            B_abs = lambda x: np.zeros(x.shape[:-1])  # noqa: E731
    candidates = ladder() if candidates is None else list(candidates)
    if isinstance(V, ScalarField):
        # node-inclusion cube means need sides >= 2h; drop constants that would go below
        finest = 1.0 / (2 * V.grid.h) ** 2
        kept = [c for c in candidates if c * max(mus) <= finest * (1 + 1e-9)]
        if len(kept) < len(candidates):
            log.info("counting: %d ladder constants dropped (cube side below 2h)", len(candidates) - len(kept))
        candidates = kept
    w, exact = eigenvalues_below(M, max(mus), cap)
    N = [int(np.sum(w < mu)) for mu in mus]

    def Nt(mu):
        return cube_count(B_abs, V, mu, lower, upper).count

    fit = fit_sandwich_constants(mus, N, Nt, candidates)
    Ntil = [fit.table.get(round(float(mu), 12), None) for mu in mus]
    Ntil = [Nt(mu) if v is None else v for mu, v in zip(mus, Ntil)]
    return CountingReport(list(mus), N, Ntil, [exact] * len(mus), fit.c1, fit.c2, fit.feasible,
                          fit.violations, Ntilde_table=fit.table)
