"""Potential and magnetic-field generators, and sampled regularity-class checks."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate as spint
from scipy.special import gamma

from .grid import ScalarField, integrate, read_field_csv
from .operators import AntisymmetricField

POTENTIAL_KINDS = ("constant", "power", "polynomial", "exponential", "well", "double-well",
                   "random", "table")
VECTOR_KINDS = ("constant-field", "example-1", "table")


class PotentialError(ValueError):
    """Invalid potential specification."""


@dataclass(frozen=True)
class PotentialSpec:
    """Recipe for a node potential.

    ``params`` by kind:

    * ``constant``: ``value``
    * ``power``: ``alpha`` (> -2), ``scale`` (1), ``center`` (origin)
    * ``polynomial``: ``expr`` in ``x1..xn`` (sympy syntax), ``alpha`` (1)
    * ``exponential``: ``amplitude`` (1), ``length`` (1), ``offset`` (0), ``center``
    * ``well``: ``depth``, ``width``, ``background`` (0), ``center``
    * ``double-well``: ``separation``, ``stiffness`` (1); harmonic wells at
      ``+-separation/2`` on the first axis, ``V = k min_i |x - c_i|^2``
    * ``random``: ``low`` (0), ``high`` (1); iid uniform per node
    * ``table``: ``path`` to a field CSV on the same grid
    """

    kind: str
    params: dict = field(default_factory=dict)
    seed: int | None = None
    nonnegative: bool = True

    def __post_init__(self):
        if self.kind not in POTENTIAL_KINDS:
            raise PotentialError(f"unknown potential kind {self.kind!r}; expected one of {POTENTIAL_KINDS}")
        if self.kind == "power" and not float(self.params.get("alpha", 0.0)) > -2:
            raise PotentialError("power potentials need alpha > -2 to be locally integrable")


@dataclass(frozen=True)
class VectorPotentialSpec:
    """Recipe for a vector potential ``a``.

    ``constant-field``: ``b`` and ``gauge`` (``landau`` or ``symmetric``), 2D or
    the (1, 2) plane in 3D.  ``example-1``: ``alpha`` in (0, 1), 3D only.
    ``table``: ``paths``, one component CSV per axis.
    """

    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in VECTOR_KINDS:
            raise PotentialError(f"unknown vector potential kind {self.kind!r}")


def _center(params, dim):
    return np.broadcast_to(np.asarray(params.get("center", 0.0), dtype=float), (dim,))


def unit_cube_power_mean(alpha, dim):
    """Mean of ``|y|^alpha`` over ``[-1, 1]^dim``.

    Splitting the cube into pyramids on which one coordinate dominates gives
    ``dim / (alpha + dim)`` times a smooth integral over ``[0, 1]^(dim-1)``.
    """
    if not alpha > -dim:
        raise PotentialError(f"|x|^{alpha} is not integrable in dimension {dim}")
    lead = dim / (alpha + dim)
    if dim == 1:
        return lead
    if dim == 2:
        val, _ = spint.quad(lambda s: (1 + s * s) ** (alpha / 2), 0.0, 1.0, epsabs=1e-13, epsrel=1e-12)
    else:
        val, _ = spint.dblquad(lambda t, s: (1 + s * s + t * t) ** (alpha / 2), 0.0, 1.0, 0.0, 1.0,
                               epsabs=1e-13, epsrel=1e-12)
    return lead * val


def singular_cell_average(alpha, h, dim, offset=None):
    """Average of ``|x - c|^alpha`` over the cell ``[-h/2, h/2]^dim`` when ``c`` sits at ``offset``.

    A centred singularity uses :func:`unit_cube_power_mean`; other positions
    split the cell into corner boxes integrated adaptively.
    """
    offset = np.zeros(dim) if offset is None else np.asarray(offset, dtype=float)
    if np.allclose(offset, 0.0, atol=1e-12 * h):
        return (h / 2) ** alpha * unit_cube_power_mean(alpha, dim)
    total = 0.0
    for signs in np.ndindex(*(2,) * dim):
        ext = [(h / 2 - o) if s else (h / 2 + o) for s, o in zip(signs, offset)]
        if min(ext) <= 0:
            continue
        val, _ = spint.nquad(lambda *y: math.sqrt(sum(t * t for t in y)) ** alpha,
                             [(0.0, e) for e in ext], opts={"epsrel": 1e-9, "limit": 200})
        total += val
    return total / h ** dim


def _power(grid, params):
    alpha = float(params.get("alpha", 2.0))
    scale = float(params.get("scale", 1.0))
    c = _center(params, grid.dim)
    x = grid.coordinates - c
    r = np.sqrt(np.sum(x * x, axis=-1))
    with np.errstate(divide="ignore"):
        vals = np.where(r > 0, r, 1.0) ** alpha
    if alpha < 0:
        # nodes whose cell holds the singularity get the exact cell average
        rel = (c - grid.lower) / grid.h
        near = np.rint(rel).astype(int)
        if np.all(near >= 0) and np.all(near < np.asarray(grid.shape)):
            off = c - (grid.lower + near * grid.h)
            vals[tuple(near)] = singular_cell_average(alpha, grid.h, grid.dim, off)
    elif alpha == 0:
        vals[:] = 1.0
    else:
        vals = np.where(r > 0, vals, 0.0)
    return scale * vals


def _symbols(dim):
    import sympy
    return sympy.symbols(" ".join(f"x{j + 1}" for j in range(dim)))


def parse_polynomial(expr, dim):
    """Sympy polynomial in ``x1..xn`` from a string."""
    import sympy
    syms = _symbols(dim)
    syms = syms if isinstance(syms, tuple) else (syms,)
    P = sympy.sympify(expr, locals={str(s): s for s in syms})
    if not P.free_symbols <= set(syms):
        raise PotentialError(f"polynomial {expr!r} uses variables outside {syms}")
    return sympy.Poly(P, *syms), syms


def evaluate_polynomial(P, syms, grid):
    import sympy
    fn = sympy.lambdify(syms, P.as_expr(), "numpy")
    x = grid.coordinates
    return np.broadcast_to(np.asarray(fn(*[x[..., j] for j in range(grid.dim)]), dtype=float),
                           grid.shape).copy()


_POINTWISE = ("polynomial", "exponential", "well", "double-well")


def _pointwise(spec, dim):
    p = spec.params
    kind = spec.kind
    if kind == "polynomial":
        alpha = float(p.get("alpha", 1.0))
        if not alpha > 0:
            raise PotentialError("polynomial potentials need alpha > 0")
        import sympy
        P, syms = parse_polynomial(p["expr"], dim)
        fn = sympy.lambdify(syms, P.as_expr(), "numpy")
        return lambda x: np.abs(np.broadcast_to(np.asarray(fn(*[x[..., j] for j in range(dim)]), dtype=float),
                                                x.shape[:-1])) ** alpha
    if kind == "exponential":
        c, amp = _center(p, dim), float(p.get("amplitude", 1.0))
        length, offset = float(p.get("length", 1.0)), float(p.get("offset", 0.0))
        return lambda x: amp * np.exp(-np.linalg.norm(x - c, axis=-1) / length) + offset
    if kind == "well":
        c, width = _center(p, dim), float(p["width"])
        bg, depth = float(p.get("background", 0.0)), float(p["depth"])
        return lambda x: bg + depth * np.all(np.abs(x - c) <= width / 2 + 1e-12, axis=-1)
    # double well: harmonic wells at +-separation/2 on the first axis
    shift = np.zeros(dim)
    shift[0] = float(p.get("separation", 2.0)) / 2
    k = float(p.get("stiffness", 1.0))
    return lambda x: k * np.minimum(np.sum((x - shift) ** 2, axis=-1), np.sum((x + shift) ** 2, axis=-1))


def potential_callable(spec, dim):
    """``V`` as a function of positions ``(..., dim)``, or ``None`` for kinds
    that only exist as node samples (random, table, singular powers)."""
    p = spec.params
    if spec.kind == "constant":
        value = float(p.get("value", 1.0))
        return lambda x: np.full(x.shape[:-1], value)
    if spec.kind == "power":
        alpha = float(p.get("alpha", 2.0))
        if alpha < 0:
            return None
        c, scale = _center(p, dim), float(p.get("scale", 1.0))
        return lambda x: scale * np.linalg.norm(x - c, axis=-1) ** alpha
    if spec.kind in _POINTWISE:
        return _pointwise(spec, dim)
    return None


def generate_potential(spec, grid):
    """Sample ``spec`` on ``grid``; deterministic given the spec and its seed."""
    p = spec.params
    dim = grid.dim
    x = grid.coordinates
    kind = spec.kind
    if kind == "constant":
        vals = np.full(grid.shape, float(p.get("value", 1.0)))
    elif kind == "power":
        vals = _power(grid, p)
    elif kind in _POINTWISE:
        vals = _pointwise(spec, dim)(x)
    elif kind == "random":
        rng = np.random.default_rng(spec.seed)
        vals = rng.uniform(float(p.get("low", 0.0)), float(p.get("high", 1.0)), size=grid.shape)
    else:
        tab, _ = read_field_csv(p["path"])
        if tab.grid != grid:
            raise PotentialError("table potential was written on a different grid")
        vals = np.asarray(tab.values, dtype=float)
    if not np.all(np.isfinite(vals)):
        raise PotentialError("generated potential is not finite")
    Vf = ScalarField(grid, vals, f"V[{kind}]")
    if spec.nonnegative:
        if vals.min() < 0:
            raise PotentialError(f"{kind} potential takes negative values (min {vals.min():.3g})")
        if not integrate(Vf) > 0:
            raise PotentialError("potential has zero integral over the box")
    return Vf


# -- magnetic fields -----------------------------------------------------------

def landau_vector_potential(b, gauge="landau"):
    """Callable ``a`` with ``b_12 = d a_1/dx_2 - d a_2/dx_1 = b`` (first two axes)."""
    if gauge not in ("landau", "symmetric"):
        raise PotentialError(f"unknown gauge {gauge!r}")

    def a(x):
        out = np.zeros(x.shape)
        if gauge == "landau":
            out[..., 0] = b * x[..., 1]
        else:
            out[..., 0] = 0.5 * b * x[..., 1]
            out[..., 1] = -0.5 * b * x[..., 0]
        return out
    return a


def example1_vector_potential(alpha):
    """``a_j = sign(x_{j+1}) |x_{j+1}|^alpha`` with cyclic indices, as a callable."""
    if not 0 < alpha < 1:
        raise PotentialError("the cyclic Hölder field needs alpha in (0, 1)")

    def a(x):
        nxt = np.roll(x, -1, axis=-1)
        return np.sign(nxt) * np.abs(nxt) ** alpha
    return a


def _example1_b(t, alpha, h):
    """``alpha |t|^(alpha-1)`` with the exact cell average on the cell holding 0."""
    at = np.abs(t)
    out = alpha * np.where(at > 0, at, 1.0) ** (alpha - 1)
    return np.where(at <= 1e-12 * h, (h / 2) ** (alpha - 1), out)


def generate_example1_field(alpha, grid):
    """Vector potential components and field ``B`` of the cyclic Hölder example.

    Returns ``(a_components, B)`` where ``a_components`` is a list of three
    ScalarFields and ``b_{j,j+1} = alpha |x_{j+1}|^(alpha-1)`` (cyclic).
    """
    if grid.dim != 3:
        raise PotentialError("the cyclic Hölder example is defined in three dimensions")
    avals = example1_vector_potential(alpha)(grid.coordinates)
    a_fields = [ScalarField(grid, avals[..., j], f"a{j + 1}") for j in range(3)]
    x = grid.coordinates
    comps = {
        (0, 1): _example1_b(x[..., 1], alpha, grid.h),
        (1, 2): _example1_b(x[..., 2], alpha, grid.h),
        (0, 2): -_example1_b(x[..., 0], alpha, grid.h),  # b_31 = alpha|x_1|^(alpha-1)
    }
    return a_fields, AntisymmetricField.from_components(grid, comps)


def vector_potential(spec, dim):
    """Callable ``a(x)`` for a :class:`VectorPotentialSpec`."""
    p = spec.params
    if spec.kind == "constant-field":
        if dim < 2:
            raise PotentialError("a magnetic field needs dimension >= 2")
        return landau_vector_potential(float(p.get("b", 1.0)), p.get("gauge", "landau"))
    if spec.kind == "example-1":
        if dim != 3:
            raise PotentialError("the cyclic Hölder example is defined in three dimensions")
        return example1_vector_potential(float(p.get("alpha", 0.9)))
    raise PotentialError("table vector potentials are node samples; use EdgePhaseField.from_node_components")


# -- regularity classes --------------------------------------------------------

@dataclass
class RegularityReport:
    rh_q: float = float("nan")
    rh_characteristic: float = float("nan")
    kato_C0: float = float("nan")
    kato_delta: float = float("nan")
    doubling_C1: float = float("nan")
    is_shen: bool = False
    margin: float = float("nan")
    samples: int = 0
    cap: float = float("nan")

    def as_dict(self):
        return dict(self.__dict__)


def ball_volume(r, dim):
    return math.pi ** (dim / 2) / gamma(dim / 2 + 1) * r ** dim


class BallProfile:
    """Cumulative node sums over balls of growing radius around fixed centres.

    Ball integrals use the continuum ball volume times the node average, which
    is exact for constants and avoids the lattice-count jumps of plain sums.
    All balls must stay inside the grid (centres are chosen accordingly).
    """

    def __init__(self, grid, r_max):
        offs, dist = _offsets(grid, r_max)
        self.grid = grid
        strides = np.array([int(np.prod(grid.shape[j + 1:])) for j in range(grid.dim)])
        self.flat_offsets = offs @ strides
        self.dist = dist

    def integrals(self, values, centers, radii, power=1.0):
        """``|B| * avg(values**power)`` for each (centre flat index, radius) pair."""
        vals = np.asarray(values, dtype=float).ravel() ** power
        counts = np.searchsorted(self.dist, np.asarray(radii) * (1 + 1e-12), side="right")
        out = np.empty(len(centers))
        for i, (c, k) in enumerate(zip(centers, counts)):
            k = max(int(k), 1)
            out[i] = vals[c + self.flat_offsets[:k]].mean()
        return out * ball_volume(np.asarray(radii, dtype=float), self.grid.dim)

    def averages(self, values, centers, radii, power=1.0):
        return self.integrals(values, centers, radii, power) / ball_volume(np.asarray(radii, dtype=float),
                                                                           self.grid.dim)


def _offsets(grid, r_max):
    from .grid import ball_offsets
    return ball_offsets(r_max, grid.h, grid.dim)


def _sample_balls(grid, rng, samples, r_min, r_max, pairs=False):
    """Random centres and log-uniform radii with every ball inside the box."""
    dist = grid.distance_to_boundary().ravel()
    r_max = min(r_max, float(dist.max()))
    if r_max <= r_min:
        raise ValueError("grid too small for the requested ball radii")
    big = np.exp(rng.uniform(np.log(r_min), np.log(r_max), size=samples))
    if pairs:
        small = np.exp(rng.uniform(np.log(r_min), np.log(big)))
    centers = np.empty(samples, dtype=int)
    for i, R in enumerate(big):
        ok = np.flatnonzero(dist >= R)
        centers[i] = ok[rng.integers(len(ok))]
    return (centers, small, big) if pairs else (centers, big)


def check_reverse_holder(field_, q, sample_balls=1000, seed=0, r_min=None, r_max=None):
    """Sampled reverse Hölder characteristic ``max (avg f^q)^(1/q) / avg f``."""
    if q <= 1:
        raise ValueError("reverse Hölder exponent must exceed 1")
    vals = np.asarray(field_.values, dtype=float)
    if vals.min() < 0:
        raise ValueError("reverse Hölder check needs a nonnegative field")
    grid = field_.grid
    rng = np.random.default_rng(seed)
    r_min = r_min or grid.h / 2
    r_max = r_max or grid.half_extent / 2
    centers, radii = _sample_balls(grid, rng, sample_balls, r_min, r_max)
    prof = BallProfile(grid, float(radii.max()))
    num = prof.averages(vals, centers, radii, power=q) ** (1 / q)
    den = prof.averages(vals, centers, radii)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(den > 0, num / np.where(den > 0, den, 1.0), np.where(num > 0, np.inf, 1.0))
    return RegularityReport(rh_q=q, rh_characteristic=float(ratio.max()), samples=sample_balls)


def check_kato_and_doubling(field_, samples=1000, seed=0, cap=None, r_min=None, r_max=None, q=None):
    """Sampled constants of the scale-invariant Kato and high-mass doubling conditions.

    Kato: ``int_{B_r} V <= C0 (r/R)^(n-2+delta) int_{B_R} V`` for ``r < R``.
    ``delta`` is the largest exponent for which ``C0 <= cap`` over the samples
    and ``kato_C0`` is the constant at that exponent.  Doubling:
    ``int_{B_2r} V <= C1 (int_{B_r} V + r^(n-2))``.  The field counts as a Shen
    potential when ``delta > 0`` and ``C1 <= cap``; ``cap`` defaults to
    ``4 * 2^n``.  Radii start at ``h / 2`` so single cells are probed.
    """
    vals = np.asarray(field_.values, dtype=float)
    if vals.min() < 0:
        raise ValueError("regularity checks need a nonnegative field")
    grid = field_.grid
    n = grid.dim
    cap = float(cap if cap is not None else 4 * 2 ** n)
    rng = np.random.default_rng(seed)
    r_min = r_min or grid.h / 2
    r_max = r_max or grid.half_extent / 2
    centers, small, big = _sample_balls(grid, rng, samples, r_min, r_max, pairs=True)
    prof = BallProfile(grid, float(big.max()))
    I_r = prof.integrals(vals, centers, small)
    I_R = prof.integrals(vals, centers, big)
    t = small / big
    keep = (I_R > 0) & (t < 1 - 1e-9)
    with np.errstate(divide="ignore"):
        ratio = I_r[keep] / I_R[keep]
        if np.any(ratio > 0):
            expo = np.log(cap / np.where(ratio > 0, ratio, np.nan)) / np.log(1 / t[keep])
            delta = float(np.nanmin(expo)) - (n - 2)
        else:
            delta = float("inf")
    if np.isfinite(delta):
        C0 = float(np.max(ratio / t[keep] ** (n - 2 + delta)))
    else:
        C0 = 0.0

    # doubling: half-radii so that 2r stays inside the sampled ball
    half = big / 2
    I_half = prof.integrals(vals, centers, half)
    C1 = float(np.max(I_R / (I_half + half ** (n - 2))))
    rep = RegularityReport(kato_C0=C0, kato_delta=delta, doubling_C1=C1, samples=samples, cap=cap)
    rep.is_shen = bool(delta > 0 and C1 <= cap)
    rep.margin = float(min(delta, np.log(cap / C1) if C1 > 0 else np.inf))
    if q is not None:
        rh = check_reverse_holder(field_, q, samples, seed, r_min, r_max)
        rep.rh_q, rep.rh_characteristic = rh.rh_q, rh.rh_characteristic
    return rep
