"""The Fefferman-Phong-Shen maximal function ``m(x, w)``.

``1/m(x, w)`` is the critical radius at which ``r^(2-n) int_{B(x,r)} w``
reaches ``C1``.  Ball integrals are the continuum ball volume times the node
average over the closed ball, so between lattice shells the map
``r -> r^(2-n) |B_r| avg`` is an explicit power of ``r`` and the crossing is
solved exactly on each shell interval.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .grid import ScalarField, ball_average, ball_offsets
from .potentials import ball_volume, parse_polynomial

log = logging.getLogger(__name__)


@dataclass
class MaximalField:
    m: ScalarField
    C1: float
    clamped: np.ndarray
    computed: np.ndarray
    resolution: float

    @property
    def radius(self):
        return self.m.with_values(np.where(self.computed, 1.0 / np.where(self.computed, self.m.values, 1.0),
                                           np.nan), name="1/m")

    @property
    def valid(self):
        """Nodes where ``m`` was computed and not clamped at the box edge."""
        return self.computed & ~self.clamped


def _strides(shape):
    return np.array([int(np.prod(shape[j + 1:])) for j in range(len(shape))])


def maximal_function(w, C1=1.0, nodes=None, r_max=None):
    """``m(., w)`` at every interior node (or at the boolean mask ``nodes``).

    The search radius at a node is capped by its distance to the box
    boundary; nodes whose threshold lies beyond it are clamped to that radius
    and flagged in ``clamped``.
    """
    grid = w.grid
    n = grid.dim
    if n < 3:
        raise ValueError("the maximal function is defined for n >= 3")
    vals = np.asarray(w.values, dtype=float)
    if vals.min() < 0:
        raise ValueError("maximal function needs w >= 0")
    if not vals.sum() > 0:
        raise ValueError("maximal function needs a weight with positive integral")
    mask = grid.interior_mask if nodes is None else np.asarray(nodes, dtype=bool) & grid.interior_mask
    idx = np.flatnonzero(mask.ravel())
    inscribed = grid.distance_to_boundary().ravel()[idx]
    cap = inscribed if r_max is None else np.minimum(inscribed, r_max)
    offs, dist = ball_offsets(float(cap.max()), grid.h, n)
    flat_offs = offs @ _strides(grid.shape)
    # group offsets into shells of equal distance
    shell_start = np.flatnonzero(np.r_[True, np.diff(dist) > 1e-9 * grid.h])
    shell_end = np.r_[shell_start[1:], dist.size]
    shell_r = dist[shell_start]

    flat_vals = vals.ravel()
    total = np.zeros(idx.size)
    count = np.zeros(idx.size)
    radius = np.full(idx.size, np.nan)
    clamped = np.zeros(idx.size, dtype=bool)
    active = np.arange(idx.size)
    omega = ball_volume(1.0, n)
    for s, (a, b) in enumerate(zip(shell_start, shell_end)):
        if active.size == 0:
            break
        base = idx[active]
        total[active] += flat_vals[base[:, None] + flat_offs[None, a:b]].sum(axis=1)
        count[active] += b - a
        avg = total[active] / count[active]
        lo = shell_r[s]
        hi = shell_r[s + 1] if s + 1 < shell_r.size else np.inf
        with np.errstate(divide="ignore"):
            cross = np.where(avg > 0, (C1 / (omega * np.where(avg > 0, avg, 1.0))) ** 0.5, np.inf)
        cross = np.maximum(cross, lo)
        limit = cap[active]
        hit_cap = np.minimum(cross, hi) >= limit
        done = (cross < hi) | hit_cap
        r = np.where(hit_cap, limit, cross)
        radius[active[done]] = r[done]
        clamped[active[done & hit_cap]] = True
        active = active[~done]
    if active.size:
        radius[active] = cap[active]
        clamped[active] = True
    m = np.zeros(grid.size)
    m[idx] = 1.0 / radius
    computed = np.zeros(grid.size, dtype=bool)
    computed[idx] = True
    cl = np.zeros(grid.size, dtype=bool)
    cl[idx] = clamped
    if cl.any():
        log.info("maximal function clamped at %d nodes", int(cl.sum()))
    return MaximalField(ScalarField(grid, m.reshape(grid.shape), f"m(.,{w.name or 'w'})"),
                        float(C1), cl.reshape(grid.shape), computed.reshape(grid.shape), grid.h)


def maximal_brute_oracle(w, C1, node):
    """Largest ``r`` in ``{h, 2h, ...}`` (inside the box) with ``r^(2-n) int_B w <= C1``.

    Uses plain boolean ball masks; returns 0 when no radius qualifies.
    """
    grid = w.grid
    n = grid.dim
    x = grid.coordinates[tuple(node)]
    limit = float(grid.distance_to_boundary()[tuple(node)])
    best = 0.0
    k = 1
    while k * grid.h <= limit + 1e-12:
        r = k * grid.h
        integral = ball_volume(r, n) * ball_average(w, x, r)
        if r ** (2 - n) * integral <= C1:
            best = r
        k += 1
    return best


def polynomial_m_closed_form(expr, alpha, grid):
    """``(sum_beta |d^beta P|^(alpha / (alpha |beta| + 2)))^2`` at every node.

    The sum runs over all multi-indices with ``|beta| <= deg P``; the result is
    comparable to ``m^2(., |P|^alpha)`` and to ``1/u``.
    """
    import itertools

    import sympy

    P, syms = parse_polynomial(expr, grid.dim)
    deg = P.total_degree()
    if deg > 4:
        raise ValueError("polynomial degree must be at most 4")
    x = grid.coordinates
    coords = [x[..., j] for j in range(grid.dim)]
    total = np.zeros(grid.shape)
    expr_ = P.as_expr()
    for beta in itertools.product(range(deg + 1), repeat=grid.dim):
        order = sum(beta)
        if order > deg:
            continue
        d = expr_
        for s, b in zip(syms, beta):
            if b:
                d = sympy.diff(d, s, b)
        if d == 0:
            continue
        vals = np.broadcast_to(np.asarray(sympy.lambdify(syms, d, "numpy")(*coords), dtype=float), grid.shape)
        total += np.abs(vals) ** (alpha / (alpha * order + 2))
    return ScalarField(grid, total ** 2, "poly_m2")
