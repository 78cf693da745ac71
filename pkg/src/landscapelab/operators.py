"""Discrete Schrödinger operators on a :class:`~landscapelab.grid.Grid`.

Real operators ``-div A grad + V`` use a flux-form stencil; magnetic operators
``-(grad - i a)^2 + V`` carry Peierls phases on nearest-neighbour edges.
Dirichlet boundary nodes are eliminated, so every operator acts on interior
nodes only.

Sign convention for the magnetic field: ``b_jk = d a_j / d x_k - d a_k / d x_j``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
import scipy.io
import scipy.sparse as sp

from .grid import EdgeSet, Grid, ScalarField


class EllipticityError(ValueError):
    pass


class InadmissibleSelection(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class MatrixField:
    """Per-node ``n x n`` coefficient matrix ``A`` with ellipticity constant ``lam``."""

    grid: Grid
    values: np.ndarray
    lam: float

    def __post_init__(self):
        n = self.grid.dim
        vals = np.asarray(self.values, dtype=float)
        if vals.shape == (n, n):
            vals = np.broadcast_to(vals, self.grid.shape + (n, n))
        if vals.shape != self.grid.shape + (n, n):
            raise ValueError(f"expected shape {self.grid.shape + (n, n)}, got {vals.shape}")
        object.__setattr__(self, "values", vals)
        self.check_ellipticity()

    @classmethod
    def identity(cls, grid):
        return cls(grid, np.eye(grid.dim), lam=1.0)

    @classmethod
    def constant(cls, grid, matrix, lam=None):
        matrix = np.asarray(matrix, dtype=float)
        if lam is None:
            sym = 0.5 * (matrix + matrix.T)
            lam = min(float(np.linalg.eigvalsh(sym).min()), 1.0 / float(np.abs(matrix).max()))
        return cls(grid, matrix, lam)

    def check_ellipticity(self):
        if not 0 < self.lam <= 1:
            raise EllipticityError("ellipticity constant must lie in (0, 1]")
        n = self.grid.dim
        flat = self.values.reshape(-1, n, n)
        sym = 0.5 * (flat + np.swapaxes(flat, 1, 2))
        lowest = np.linalg.eigvalsh(sym)[:, 0]
        tol = 1e-12
        if np.any(lowest < self.lam - tol):
            raise EllipticityError(f"xi.A.xi >= lam|xi|^2 fails: min eigenvalue {lowest.min():.3g} < {self.lam}")
        if np.any(np.abs(flat) > 1.0 / self.lam + tol):
            raise EllipticityError(f"|A| exceeds 1/lam = {1 / self.lam:.3g}")

    @property
    def is_symmetric(self):
        return bool(np.all(self.values == np.swapaxes(self.values, -1, -2)))

    @property
    def is_diagonal(self):
        n = self.grid.dim
        off = self.values * (1 - np.eye(n))
        return bool(np.all(off == 0))

    def inverse_quadratic(self, direction):
        """``d.A^{-1}.d`` per node for a unit direction ``d``."""
        d = np.asarray(direction, dtype=float)
        d = d / np.linalg.norm(d)
        sym = 0.5 * (self.values + np.swapaxes(self.values, -1, -2))
        sol = np.linalg.solve(sym, np.broadcast_to(d, sym.shape[:-1]).copy()[..., None])[..., 0]
        return sol @ d


@dataclass(frozen=True, eq=False)
class AntisymmetricField:
    """Per-node antisymmetric matrix ``B = (b_jk)``."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        n = self.grid.dim
        vals = np.array(self.values, dtype=float).reshape(self.grid.shape + (n, n))
        vals = 0.5 * (vals - np.swapaxes(vals, -1, -2))
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_components(cls, grid, comps):
        """Build from a ``{(j, k): array}`` mapping with ``j < k`` (zero-based)."""
        n = grid.dim
        vals = np.zeros(grid.shape + (n, n))
        for (j, k), arr in comps.items():
            vals[..., j, k] = arr
            vals[..., k, j] = -np.asarray(arr)
        return cls(grid, vals)

    def component(self, j, k):
        return self.values[..., j, k]

    def norm(self):
        """``|B| = sum_{j<k} |b_jk|`` as a ScalarField."""
        n = self.grid.dim
        total = np.zeros(self.grid.shape)
        for j, k in itertools.combinations(range(n), 2):
            total += np.abs(self.values[..., j, k])
        return ScalarField(self.grid, total, "|B|")

    def selection_sum(self, selection):
        total = np.zeros(self.grid.shape)
        for j, k in selection.pairs:
            total += self.values[..., j, k]
        return ScalarField(self.grid, total, "Sigma_S B")


@dataclass(frozen=True)
class SelectionOfPairs:
    """One ordered pair ``(j, k)`` (zero-based) for each unordered pair of axes."""

    pairs: tuple

    def __post_init__(self):
        pairs = tuple(sorted((int(j), int(k)) for j, k in self.pairs))
        object.__setattr__(self, "pairs", pairs)
        seen = set()
        for j, k in pairs:
            if j == k:
                raise ValueError("a selection cannot contain a diagonal pair")
            key = frozenset((j, k))
            if key in seen:
                raise ValueError(f"both orientations of {{{j}, {k}}} selected")
            seen.add(key)

    def is_complete(self, dim):
        return len(self.pairs) == dim * (dim - 1) // 2 and all(max(p) < dim for p in self.pairs)

    @classmethod
    def upper(cls, dim):
        return cls(tuple(itertools.combinations(range(dim), 2)))

    @classmethod
    def cyclic(cls, dim):
        """``{(0,1), (1,2), ..., (n-1,0)}``; for ``n = 3`` this covers every axis pair."""
        if dim == 2:
            return cls(((0, 1),))
        if dim != 3:
            raise ValueError("cyclic selection covers every pair only for n <= 3")
        return cls(((0, 1), (1, 2), (2, 0)))

    def __str__(self):
        return "{" + ", ".join(f"({j + 1},{k + 1})" for j, k in self.pairs) + "}"


@dataclass(frozen=True, eq=False)
class EdgePhaseField:
    """Peierls phase ``theta`` on each nearest-neighbour edge ``x -> x + h e_axis``.

    ``phases[axis]`` has the grid shape with that axis shortened by one.
    Traversing an edge backwards picks up ``-theta``.
    """

    grid: Grid
    phases: tuple

    def __post_init__(self):
        g = self.grid
        out = []
        for ax in range(g.dim):
            shape = list(g.shape)
            shape[ax] -= 1
            arr = np.asarray(self.phases[ax], dtype=float).reshape(shape)
            if not np.all(np.isfinite(arr)):
                raise ValueError("non-finite Peierls phase")
            out.append(arr)
        object.__setattr__(self, "phases", tuple(out))

    @classmethod
    def zero(cls, grid):
        return cls.from_vector_potential(grid, lambda x: np.zeros(x.shape))

    @classmethod
    def from_vector_potential(cls, grid, a):
        """Midpoint rule: ``theta = a((x + y) / 2) . (y - x)``.

        ``a`` maps positions of shape ``(..., n)`` to vectors of the same shape.
        """
        x = grid.coordinates
        phases = []
        for ax in range(grid.dim):
            lo = [slice(None)] * grid.dim
            hi = [slice(None)] * grid.dim
            lo[ax] = slice(0, -1)
            hi[ax] = slice(1, None)
            mid = 0.5 * (x[tuple(lo)] + x[tuple(hi)])
            phases.append(grid.h * np.asarray(a(mid))[..., ax])
        return cls(grid, tuple(phases))

    @classmethod
    def from_node_components(cls, grid, components):
        """Phases from node samples of ``a``: endpoint average times ``h``."""
        phases = []
        for ax in range(grid.dim):
            comp = np.asarray(components[ax].values if isinstance(components[ax], ScalarField)
                              else components[ax])
            lo = [slice(None)] * grid.dim
            hi = [slice(None)] * grid.dim
            lo[ax] = slice(0, -1)
            hi[ax] = slice(1, None)
            phases.append(0.5 * grid.h * (comp[tuple(lo)] + comp[tuple(hi)]))
        return cls(grid, tuple(phases))

    def gauge_shift(self, phi):
        """Add the discrete gradient of node field ``phi``: ``theta += phi(y) - phi(x)``."""
        vals = phi.values if isinstance(phi, ScalarField) else np.asarray(phi)
        return EdgePhaseField(self.grid, tuple(p + np.diff(vals, axis=ax)
                                               for ax, p in enumerate(self.phases)))

    def edge_array(self, edges=None):
        """Phases aligned with an :class:`EdgeSet` built by ``EdgeSet.from_grid``."""
        edges = edges or EdgeSet.from_grid(self.grid)
        flat = np.concatenate([p.ravel() for p in self.phases])
        if len(edges) != flat.size:
            raise ValueError("edge set does not match the phase layout")
        return flat

    def plaquette_flux(self, j, k):
        """Counter-clockwise phase sum around each ``(j, k)`` plaquette."""
        tj, tk = self.phases[j], self.phases[k]
        n = self.grid.dim

        def sl(arr, ax, start, stop):
            idx = [slice(None)] * n
            idx[ax] = slice(start, stop)
            return arr[tuple(idx)]

        # theta_j(x) + theta_k(x + e_j) - theta_j(x + e_k) - theta_k(x)
        tj_lo = sl(tj, k, 0, -1)
        tj_hi = sl(tj, k, 1, None)
        tk_lo = sl(tk, j, 0, -1)
        tk_hi = sl(tk, j, 1, None)
        return tj_lo + tk_hi - tj_hi - tk_lo


@dataclass(frozen=True, eq=False)
class SparseOperator:
    """A discrete operator restricted to the interior (unknown) nodes of ``grid``."""

    matrix: sp.csr_matrix
    grid: Grid
    nodes: np.ndarray
    kind: str = "general"

    def __post_init__(self):
        if self.kind not in ("symmetric", "hermitian", "general"):
            raise ValueError(f"unknown operator kind {self.kind!r}")
        m = sp.csr_matrix(self.matrix)
        m.sort_indices()
        object.__setattr__(self, "matrix", m)

    @property
    def shape(self):
        return self.matrix.shape

    @property
    def n(self):
        return self.matrix.shape[0]

    @property
    def dtype(self):
        return self.matrix.dtype

    @property
    def is_self_adjoint(self):
        return self.kind in ("symmetric", "hermitian")

    def __matmul__(self, vec):
        return self.matrix @ vec

    def diagonal(self):
        return self.matrix.diagonal()

    def restrict(self, field):
        vals = field.values if isinstance(field, ScalarField) else np.asarray(field)
        return np.asarray(vals).ravel()[self.nodes]

    def extend(self, vec, name=""):
        """Put interior values back on the full grid, zero on the boundary."""
        out = np.zeros(self.grid.size, dtype=np.result_type(vec, float))
        out[self.nodes] = vec
        return ScalarField(self.grid, out.reshape(self.grid.shape), name)

    def hermitian_defect(self):
        diff = self.matrix - self.matrix.conj().T
        return float(np.abs(diff.data).max()) if diff.nnz else 0.0

    def shifted(self, shift, scale=1.0):
        """``scale * M + shift * I`` with the same node layout."""
        eye = sp.identity(self.n, dtype=self.dtype, format="csr")
        return SparseOperator(scale * self.matrix + shift * eye, self.grid, self.nodes, self.kind)

    def todense(self):
        return self.matrix.toarray()

    def write_matrix_market(self, path, comment=""):
        scipy.io.mmwrite(path, self.matrix, comment=comment)


def _interior_layout(grid):
    nodes = grid.interior_set
    lookup = -np.ones(grid.size, dtype=np.int64)
    lookup[nodes] = np.arange(nodes.size)
    return nodes, lookup


def _shifted_index(grid, offset):
    """Flat index of ``idx + offset`` for every node, ``-1`` where it leaves the box."""
    idx = np.indices(grid.shape).reshape(grid.dim, -1)
    tgt = idx + np.asarray(offset).reshape(-1, 1)
    ok = np.all((tgt >= 0) & (tgt < np.asarray(grid.shape).reshape(-1, 1)), axis=0)
    out = -np.ones(grid.size, dtype=np.int64)
    out[ok] = np.ravel_multi_index(tuple(tgt[:, ok]), grid.shape)
    return out


def _field_values(V, grid):
    if isinstance(V, ScalarField):
        if V.grid != grid:
            raise ValueError("potential lives on a different grid")
        return V.values
    arr = np.asarray(V, dtype=float)
    return np.broadcast_to(arr, grid.shape)


def _assemble(grid, entries, diag_extra):
    """Collect ``(row_flat, col_flat, value)`` triplets restricted to interior rows/cols."""
    nodes, lookup = _interior_layout(grid)
    rows, cols, vals = [], [], []
    for r, c, v in entries:
        r_loc = lookup[r]
        c_loc = lookup[c]
        keep = (r_loc >= 0) & (c_loc >= 0)
        rows.append(r_loc[keep])
        cols.append(c_loc[keep])
        vals.append(np.asarray(v)[keep])
    diag = np.asarray(diag_extra).ravel()[nodes]
    rows.append(np.arange(nodes.size))
    cols.append(np.arange(nodes.size))
    vals.append(diag)
    m = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(nodes.size, nodes.size))
    return m.tocsr(), nodes


def assemble_real(grid, A=None, V=0.0):
    """Assemble ``-div A grad + V`` with homogeneous Dirichlet data.

    Diagonal coefficients use the flux form with arithmetic face averages;
    off-diagonal coefficients use centred differences.  For ``A = I`` this is the
    standard ``(2n+1)``-point Laplacian plus ``V``.
    """
    if A is None:
        A = MatrixField.identity(grid)
    elif not isinstance(A, MatrixField):
        A = MatrixField.constant(grid, A)
    A.check_ellipticity()
    Vv = _field_values(V, grid)
    n, h2 = grid.dim, grid.h ** 2
    flat_all = np.arange(grid.size)
    Avals = A.values.reshape(grid.size, n, n)
    entries = []
    diag = np.array(Vv, dtype=float).ravel().copy()
    for i in range(n):
        e = np.zeros(n, dtype=int)
        e[i] = 1
        for sign in (1, -1):
            nb = _shifted_index(grid, sign * e)
            ok = nb >= 0
            face = np.zeros(grid.size)
            face[ok] = 0.5 * (Avals[ok, i, i] + Avals[nb[ok], i, i])
            diag += face / h2
            entries.append((flat_all[ok], nb[ok], -face[ok] / h2))
    for i, j in itertools.permutations(range(n), 2):
        if np.all(Avals[:, i, j] == 0):
            continue
        ei = np.zeros(n, dtype=int)
        ej = np.zeros(n, dtype=int)
        ei[i] = 1
        ej[j] = 1
        # -d_i(A_ij d_j u) at x, centred in both directions
        for si, sj in itertools.product((1, -1), repeat=2):
            corner = _shifted_index(grid, si * ei + sj * ej)
            mid = _shifted_index(grid, si * ei)
            ok = (corner >= 0) & (mid >= 0)
            coef = -si * sj * Avals[mid[ok], i, j] / (4 * h2)
            entries.append((flat_all[ok], corner[ok], coef))
    matrix, nodes = _assemble(grid, entries, diag)
    kind = "symmetric" if A.is_symmetric else "general"
    return SparseOperator(matrix, grid, nodes, kind)


def assemble_magnetic(grid, phases, V=0.0):
    """Assemble ``-(grad - i a)^2 + V`` with Peierls phases.

    Diagonal ``2n/h^2 + V``; for the edge ``x -> y = x + h e_j`` the entry in row
    ``y``, column ``x`` is ``-exp(i theta)/h^2`` and its conjugate sits at
    ``(x, y)``, so the quadratic form is ``sum |f(y) - e^{i theta} f(x)|^2 / h^2``.
    """
    if phases is None:
        phases = EdgePhaseField.zero(grid)
    Vv = _field_values(V, grid)
    if np.iscomplexobj(Vv):
        raise ValueError("potential must be real")
    edges = EdgeSet.from_grid(grid)
    theta = phases.edge_array(edges)
    h2 = grid.h ** 2
    link = np.exp(1j * theta) / h2
    diag = (2 * grid.dim / h2 + np.asarray(Vv, dtype=float).ravel()).astype(complex)
    entries = [(edges.dst, edges.src, -link), (edges.src, edges.dst, -np.conj(link))]
    matrix, nodes = _assemble(grid, entries, diag)
    return SparseOperator(matrix, grid, nodes, "hermitian")


def magnetic_gradient(grid, phases, f):
    """Covariant differences ``(f(y) - e^{i theta} f(x)) / h`` on every edge."""
    edges = EdgeSet.from_grid(grid)
    theta = phases.edge_array(edges)
    vals = (f.values if isinstance(f, ScalarField) else np.asarray(f)).ravel()
    return (vals[edges.dst] - np.exp(1j * theta) * vals[edges.src]) / grid.h


def discrete_field_from_phases(phases):
    """Recover ``b_jk`` at nodes from plaquette fluxes.

    A counter-clockwise ``(j, k)`` plaquette carries ``-b_jk h^2``; each node
    averages the plaquettes of that plane that touch it.
    """
    grid = phases.grid
    n = grid.dim
    if n < 2:
        raise ValueError("a magnetic field needs dimension >= 2")
    comps = {}
    for j, k in itertools.combinations(range(n), 2):
        cell = -phases.plaquette_flux(j, k) / grid.h ** 2
        total = np.zeros(grid.shape)
        count = np.zeros(grid.shape)
        for dj, dk in itertools.product((0, 1), repeat=2):
            idx = [slice(None)] * n
            idx[j] = slice(dj, grid.shape[j] - 1 + dj)
            idx[k] = slice(dk, grid.shape[k] - 1 + dk)
            total[tuple(idx)] += cell
            count[tuple(idx)] += 1
        comps[(j, k)] = total / count
    return AntisymmetricField.from_components(grid, comps)


def all_selections(dim):
    """Every selection of pairs: ``2 ** (n(n-1)/2)`` of them."""
    base = list(itertools.combinations(range(dim), 2))
    out = []
    for flips in itertools.product((False, True), repeat=len(base)):
        out.append(SelectionOfPairs(tuple((k, j) if f else (j, k) for (j, k), f in zip(base, flips))))
    return out


@dataclass(frozen=True)
class SelectionSearch:
    admissible: list
    maximal: SelectionOfPairs | None
    candidates: int
    margins: dict


def enumerate_admissible_selections(B, V=0.0, tol=None):
    """Test every selection ``S`` for ``sum_S b + V >= -tol`` at all nodes.

    ``maximal`` is set when no component of ``B`` changes sign; it is the
    selection with ``sum_S b = |B|``.  It is reported even if ``V`` makes it
    inadmissible (check ``admissible``).
    """
    grid = B.grid
    if grid.dim not in (2, 3):
        raise ValueError("selections are enumerated for n = 2 or 3")
    Vv = _field_values(V, grid)
    if tol is None:
        tol = 1e-12 * float(np.abs(B.values).max(initial=0.0))
    admissible, margins = [], {}
    cands = all_selections(grid.dim)
    for S in cands:
        margin = float(np.min(B.selection_sum(S).values + Vv))
        margins[S] = margin
        if margin >= -tol:
            admissible.append(S)
    maximal = None
    pairs = []
    for j, k in itertools.combinations(range(grid.dim), 2):
        b = B.values[..., j, k]
        if np.all(b >= -tol):
            pairs.append((j, k))
        elif np.all(b <= tol):
            pairs.append((k, j))
        else:
            pairs = None
            break
    if pairs is not None:
        maximal = SelectionOfPairs(tuple(pairs))
    return SelectionSearch(admissible, maximal, len(cands), margins)


def rotate_vector_potential(a, rotation):
    """Potential in rotated coordinates ``x' = R x``: ``a'(x') = R a(R^T x')``."""
    R = np.asarray(rotation, dtype=float)

    def rotated(xp):
        x = xp @ R  # R^T x' for row vectors
        return a(x) @ R.T

    return rotated
