"""Dirichlet landscape functions: bounded boxes, nested-box exhaustion, magnetic surrogate."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .grid import Grid, ScalarField, integrate
from .operators import InadmissibleSelection, MatrixField, assemble_real
from .solvers import solve_linear

log = logging.getLogger(__name__)

DIVERGENCE_FACTOR = 1e6


@dataclass
class LandscapeResult:
    u: ScalarField
    radius_schedule: list = field(default_factory=list)
    increments: list = field(default_factory=list)
    converged: bool = True
    min_interior: float = float("nan")
    diverged: bool = False
    stages: list = field(default_factory=list, repr=False)
    operator: object = field(default=None, repr=False)
    reports: list = field(default_factory=list, repr=False)

    @property
    def message(self):
        if self.diverged:
            return "condition (Green-integrability) empirically fails"
        return "converged" if self.converged else "not converged"


def _potential_on(V, grid):
    if callable(V) and not isinstance(V, ScalarField):
        return V(grid)
    if isinstance(V, ScalarField):
        return V
    return ScalarField(grid, np.broadcast_to(np.asarray(V, dtype=float), grid.shape))


def landscape_bounded(grid, A=None, V=0.0, tol=1e-12):
    """Solve ``(-div A grad + V) u = 1`` on the box with ``u = 0`` on its boundary."""
    Vf = _potential_on(V, grid)
    if np.any(Vf.values < 0):
        raise ValueError("landscape requires V >= 0")
    if not integrate(Vf) > 0:
        raise ValueError("landscape requires a potential with positive integral")
    M = assemble_real(grid, A, Vf)
    u, report = solve_linear(M, np.ones(M.n), tol=tol)
    if not report.converged:
        raise RuntimeError(f"landscape solve failed (residual {report.residual:.3g})")
    field_u = M.extend(u, name="u")
    return LandscapeResult(u=field_u, converged=True, min_interior=float(u.min()),
                           operator=M, reports=[report])


def _embed(coarse, fine_grid):
    """Values of ``coarse`` at the nodes of ``fine_grid`` it shares, zero elsewhere."""
    g = coarse.grid
    offset = np.rint((g.lower - fine_grid.lower) / fine_grid.h).astype(int)
    out = np.zeros(fine_grid.shape)
    sl = tuple(slice(o, o + s) for o, s in zip(offset, g.shape))
    out[sl] = coarse.values
    return out


def _window_slice(grid, center, half_width):
    lo = np.ceil((np.asarray(center) - half_width - grid.lower) / grid.h - 1e-9).astype(int)
    hi = np.floor((np.asarray(center) + half_width - grid.lower) / grid.h + 1e-9).astype(int)
    lo = np.clip(lo, 0, np.asarray(grid.shape) - 1)
    hi = np.clip(hi, 0, np.asarray(grid.shape) - 1)
    return tuple(slice(a, b + 1) for a, b in zip(lo, hi))


def landscape_exhaustion(V, h, dim, R0=2.0, center=None, A=None, stop_tol=1e-6,
                         max_stages=6, tol=1e-12, schedule=None):
    """Landscape function on R^n as the limit of Dirichlet solutions on growing boxes.

    Boxes have half-width ``R_k = R0 * 2^k`` (or ``schedule``) around ``center``.
    ``V`` is a callable taking a :class:`Grid` and returning a ScalarField, so it
    can be sampled on every stage.  Stops once the largest increment on the
    central window of half-width ``R0`` drops below ``stop_tol``; flags divergence
    when ``u`` exceeds ``1e6 * diameter^2``.
    """
    center = np.zeros(dim) if center is None else np.asarray(center, dtype=float)
    radii = list(schedule) if schedule is not None else [R0 * 2 ** k for k in range(max_stages)]
    result = LandscapeResult(u=None, converged=False)
    prev = None
    for R in radii:
        grid = Grid.box(center - R, center + R, h)
        Vf = _potential_on(V, grid)
        A_stage = A(grid) if callable(A) else A
        M = assemble_real(grid, A_stage, Vf)
        x0 = None if prev is None else M.restrict(_embed(prev, grid))
        u, report = solve_linear(M, np.ones(M.n), tol=tol, x0=x0)
        result.reports.append(report)
        if not report.converged:
            raise RuntimeError(f"stage R={R} did not converge (residual {report.residual:.3g})")
        u_field = M.extend(u, name="u")
        result.radius_schedule.append(R)
        result.stages.append(u_field)
        result.operator = M
        cap = DIVERGENCE_FACTOR * (2 * R * np.sqrt(dim)) ** 2
        if u.max() > cap:
            result.diverged = True
            result.u = u_field
            log.info("exhaustion diverged at R=%g (max u = %.3g)", R, u.max())
            break
        if prev is not None:
            win = _window_slice(grid, center, radii[0])
            inc = u_field.values[win] - _embed(prev, grid)[win]
            result.increments.append(float(np.abs(inc).max()))
        result.u = u_field
        prev = u_field
        incs = result.increments
        if incs and incs[-1] < stop_tol:
            result.converged = True
            break
        if len(incs) >= 2 and incs[-1] > 0.5 * incs[-2]:
            # increments that stop shrinking signal a non-integrable Green's function
            result.diverged = True
            log.info("exhaustion increments stopped shrinking at R=%g", R)
            break
    g = result.u.grid
    result.min_interior = float(result.u.values[g.interior_mask].min())
    return result


def shared_node_defect(result):
    """Largest ``u_{R_k} - u_{R_{k+1}}`` over shared nodes (monotonicity check)."""
    worst = -np.inf
    for coarse, fine in zip(result.stages, result.stages[1:]):
        worst = max(worst, float(np.max(_embed(coarse, fine.grid) - fine.values)))
    return worst


def landscape_magnetic_surrogate(grid, B, V, selection, tol_select=None, tol=1e-12):
    """Landscape of ``-Delta + sum_S b + V``; ``selection`` must be admissible."""
    Vf = _potential_on(V, grid)
    eff = B.selection_sum(selection).values + Vf.values
    if tol_select is None:
        tol_select = 1e-12 * float(np.abs(B.values).max(initial=0.0))
    if eff.min() < -tol_select:
        raise InadmissibleSelection(
            f"selection {selection} is not admissible: min(sum_S b + V) = {eff.min():.3g}")
    eff = np.maximum(eff, 0.0)
    res = landscape_bounded(grid, MatrixField.identity(grid), ScalarField(grid, eff, "Sigma_S B + V"), tol=tol)
    res.u = res.u.with_values(res.u.values, name="u_S")
    return res


def green_row_sums(M):
    """``h^n sum_y G(x, y)`` from the dense inverse (small grids only)."""
    G = np.linalg.inv(M.todense()) / M.grid.h ** M.grid.dim
    return M.extend(G.sum(axis=1) * M.grid.h ** M.grid.dim, name="green_row_sum")


def lower_bound_witness(u, V, c2=0.25, samples=20, seed=0):
    """Search balls ``B(x0, |V|_inf^{-1/2})`` for sub-balls where ``u >= c1 |V|_inf^{-1}``.

    Returns the smallest fitted ``c1`` over sampled centres ``x0`` whose 4x
    dilate fits inside the box.
    """
    grid = u.grid
    vmax = float(np.max(V.values))
    r0 = vmax ** -0.5
    pts = grid.coordinates
    dist = grid.distance_to_boundary()
    ok = np.argwhere(dist >= 4 * r0)
    if ok.size == 0:
        return float("nan")
    rng = np.random.default_rng(seed)
    picks = ok[rng.choice(len(ok), size=min(samples, len(ok)), replace=False)]
    c1_values = []
    for idx in picks:
        x0 = pts[tuple(idx)]
        in_b0 = np.sum((pts - x0) ** 2, axis=-1) <= r0 ** 2
        best = 0.0
        for cand in np.argwhere(in_b0):
            xt = pts[tuple(cand)]
            sub = np.sum((pts - xt) ** 2, axis=-1) <= (c2 * r0) ** 2
            best = max(best, float(u.values[sub].min()) * vmax)
        c1_values.append(best)
    return float(min(c1_values))
