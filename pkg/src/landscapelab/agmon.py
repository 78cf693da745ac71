"""Agmon distances ``rho(x, E, w)`` on the grid graph and landscape sublevel sets."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy import ndimage
from scipy.sparse.csgraph import dijkstra

from .grid import ScalarField
from .operators import MatrixField

DEFAULT_STENCIL_RADIUS = 2


def stencil_offsets(dim, radius=DEFAULT_STENCIL_RADIUS):
    """Primitive integer offsets with ``max |o_i| <= radius``, one per direction pair.

    ``radius=1`` is the ``3^n - 1`` neighbourhood.  Radius 2 adds knight-type
    moves, which roughly halves the lattice-metric anisotropy.
    """
    out = []
    for o in itertools.product(range(-radius, radius + 1), repeat=dim):
        if not any(o) or math.gcd(*map(abs, o)) != 1:
            continue
        first = next(v for v in o if v)
        if first > 0:
            out.append(o)
    return np.array(out, dtype=int)


@dataclass
class GeodesicField:
    grid: object
    w: ScalarField
    sources: np.ndarray
    rho: ScalarField
    A: MatrixField | None = None
    stencil_radius: int = DEFAULT_STENCIL_RADIUS
    lipschitz_slack: float = float("nan")


def _edge_weights(w, A, offsets):
    """Trapezoid edge costs ``0.5 (sqrt(w q)(x) + sqrt(w q)(y)) |dx|`` per offset."""
    grid = w.grid
    vals = np.asarray(w.values, dtype=float)
    shape = np.array(grid.shape)
    idx = np.arange(grid.size).reshape(grid.shape)
    rows, cols, data = [], [], []
    for o in offsets:
        length = grid.h * float(np.linalg.norm(o))
        if A is None:
            root = np.sqrt(vals)
        else:
            root = np.sqrt(vals * A.inverse_quadratic(o))
        src = tuple(slice(max(0, -k), s - max(0, k)) for k, s in zip(o, shape))
        dst = tuple(slice(max(0, k), s - max(0, -k)) for k, s in zip(o, shape))
        rows.append(idx[src].ravel())
        cols.append(idx[dst].ravel())
        data.append((0.5 * (root[src] + root[dst]) * length).ravel())
    return np.concatenate(rows), np.concatenate(cols), np.concatenate(data)


def agmon_graph(w, A=None, stencil_radius=DEFAULT_STENCIL_RADIUS):
    """Sparse undirected graph whose shortest paths approximate the Agmon metric."""
    grid = w.grid
    if np.asarray(w.values).min() < 0:
        raise ValueError("Agmon weight must be nonnegative")
    if A is not None and not A.is_symmetric:
        A = None  # nonsymmetric coefficients use the Euclidean metric
    r, c, d = _edge_weights(w, A, stencil_offsets(grid.dim, stencil_radius))
    # zero-cost edges stay stored explicitly: they are free travel, not missing edges
    return sp.csr_matrix((d, (r, c)), shape=(grid.size, grid.size))


def _as_flat_sources(grid, sources):
    src = np.asarray(sources)
    if src.dtype == bool:
        src = np.flatnonzero(src.ravel())
    elif src.ndim == 2:
        src = np.ravel_multi_index(tuple(src.T), grid.shape)
    return np.unique(src.astype(int).ravel())


def agmon_distance_field(w, sources, A=None, stencil_radius=DEFAULT_STENCIL_RADIUS):
    """Distance ``rho(., sources, w)`` in the metric ``ds^2 = w dx.A^{-1}dx``.

    ``sources`` is a boolean mask, a list of flat indices or an ``(k, n)``
    array of multi-indices.
    """
    grid = w.grid
    src = _as_flat_sources(grid, sources)
    if src.size == 0:
        raise ValueError("Agmon distance needs a nonempty source set")
    G = agmon_graph(w, A, stencil_radius)
    dist = dijkstra(G, directed=False, indices=src, min_only=True)
    rho = ScalarField(grid, dist.reshape(grid.shape), "rho")
    out = GeodesicField(grid, w, src, rho, A, stencil_radius)
    out.lipschitz_slack = lipschitz_slack(out)
    return out


def pairwise_distance(w, x, y, A=None, stencil_radius=DEFAULT_STENCIL_RADIUS):
    """``rho(x, y, w)`` between two multi-indices."""
    f = agmon_distance_field(w, [w.grid.ravel_index(x)], A, stencil_radius)
    return float(f.rho.values[tuple(y)])


def lipschitz_slack(field):
    """Largest ``A grad rho . grad rho / w - 1`` over interior nodes with ``w > 0``.

    Uses centred differences; nodes next to a source are skipped because the
    distance has a kink there.
    """
    grid = field.grid
    rho = field.rho.values
    w = np.asarray(field.w.values, dtype=float)
    grads = np.gradient(rho, grid.h)
    grads = [grads] if grid.dim == 1 else list(grads)
    g = np.stack(grads, axis=-1)
    if field.A is not None and field.A.is_symmetric:
        energy = np.einsum("...i,...ij,...j->...", g, field.A.values, g)
    else:
        energy = np.sum(g * g, axis=-1)
    near_src = np.zeros(grid.size, dtype=bool)
    near_src[field.sources] = True
    near_src = ndimage.binary_dilation(near_src.reshape(grid.shape),
                                       structure=np.ones((3,) * grid.dim), iterations=2)
    ok = grid.interior_mask & ~near_src & (w > 0)
    ok = ndimage.binary_erosion(ok, structure=np.ones((3,) * grid.dim))
    if not ok.any():
        return float("nan")
    return float(np.max(energy[ok] / w[ok]) - 1.0)


@dataclass
class SublevelSet:
    mask: np.ndarray
    w: ScalarField
    mu: float
    components: int

    @property
    def empty(self):
        return not self.mask.any()

    @property
    def indices(self):
        return np.flatnonzero(self.mask.ravel())


def sublevel_set(uhat, mu):
    """``E = {1/u <= mu}`` over interior nodes and the decay weight ``(1/u - mu)_+``.

    Boundary nodes, where ``u = 0``, get the largest interior weight so the
    weight stays finite on the whole grid.
    """
    grid = uhat.grid
    u = np.asarray(uhat.values, dtype=float)
    inner = grid.interior_mask
    if np.any(u[inner] <= 0):
        raise ValueError("sublevel sets need u > 0 at interior nodes")
    inv = np.full(grid.shape, np.inf)
    inv[inner] = 1.0 / u[inner]
    mask = inner & (inv <= mu)
    w = np.zeros(grid.shape)
    w[inner] = np.maximum(inv[inner] - mu, 0.0)
    w[~inner] = w[inner].max(initial=0.0)
    _, count = ndimage.label(mask)
    return SublevelSet(mask, ScalarField(grid, w, "w"), float(mu), int(count))
