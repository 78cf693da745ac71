"""Uniform rectangular grids in 1 to 3 dimensions and node-sampled fields.

Node ordering everywhere is C order (last axis fastest).
"""
from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field as dc_field
from functools import cached_property

import numpy as np


class BallBelowResolution(ValueError):
    """Raised when a ball contains no grid node."""


class EmptyRegionWarning(UserWarning):
    pass


@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform lattice ``origin + h * idx`` with the same spacing on every axis."""

    shape: tuple
    h: float
    origin: tuple = None

    def __post_init__(self):
        shape = tuple(int(s) for s in self.shape)
        if not 1 <= len(shape) <= 3:
            raise ValueError(f"dimension must be 1, 2 or 3, got {len(shape)}")
        if min(shape) < 3:
            raise ValueError(f"every axis needs at least 3 nodes, got shape {shape}")
        if not self.h > 0:
            raise ValueError("spacing h must be positive")
        origin = self.origin if self.origin is not None else (0.0,) * len(shape)
        origin = tuple(float(o) for o in np.broadcast_to(origin, (len(shape),)))
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "h", float(self.h))
        object.__setattr__(self, "origin", origin)

    @classmethod
    def box(cls, lower, upper, h):
        """Grid covering the box ``[lower, upper]`` (scalars broadcast to every axis).

        The upper corner is rounded to the nearest node.
        """
        lower = np.atleast_1d(np.asarray(lower, dtype=float))
        upper = np.atleast_1d(np.asarray(upper, dtype=float))
        lower, upper = np.broadcast_arrays(lower, upper)
        counts = np.rint((upper - lower) / h).astype(int) + 1
        return cls(tuple(counts), h, tuple(lower))

    @classmethod
    def cube(cls, half_width, h, dim):
        """Grid on ``[-half_width, half_width]^dim``."""
        return cls.box([-half_width] * dim, [half_width] * dim, h)

    def __eq__(self, other):
        if not isinstance(other, Grid):
            return NotImplemented
        return (self.shape == other.shape and self.h == other.h
                and np.allclose(self.origin, other.origin, rtol=0, atol=1e-12 * self.h))

    def __hash__(self):
        return hash((self.shape, self.h))

    @property
    def dim(self):
        return len(self.shape)

    @property
    def size(self):
        return int(np.prod(self.shape))

    @property
    def cell_volume(self):
        return self.h ** self.dim

    @property
    def lower(self):
        return np.asarray(self.origin)

    @property
    def upper(self):
        return self.lower + self.h * (np.asarray(self.shape) - 1)

    @property
    def half_extent(self):
        """Half of the shortest side length."""
        return 0.5 * float(np.min(self.upper - self.lower))

    def axes(self):
        return [o + self.h * np.arange(s) for o, s in zip(self.origin, self.shape)]

    @cached_property
    def coordinates(self):
        """Array of shape ``(*shape, dim)`` with the node positions."""
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack(mesh, axis=-1)

    def points(self):
        """Node positions as an ``(size, dim)`` array in C order."""
        return self.coordinates.reshape(-1, self.dim)

    def ravel_index(self, idx):
        return int(np.ravel_multi_index(tuple(idx), self.shape))

    def unravel_index(self, flat):
        return tuple(int(i) for i in np.unravel_index(flat, self.shape))

    def position(self, idx):
        return self.lower + self.h * np.asarray(idx, dtype=float)

    def nearest_index(self, x):
        idx = np.rint((np.asarray(x, dtype=float) - self.lower) / self.h).astype(int)
        return tuple(int(i) for i in np.clip(idx, 0, np.asarray(self.shape) - 1))

    @cached_property
    def boundary_mask(self):
        mask = np.zeros(self.shape, dtype=bool)
        for ax in range(self.dim):
            sl = [slice(None)] * self.dim
            sl[ax] = 0
            mask[tuple(sl)] = True
            sl[ax] = -1
            mask[tuple(sl)] = True
        return mask

    @property
    def interior_mask(self):
        return ~self.boundary_mask

    @property
    def boundary_set(self):
        return np.flatnonzero(self.boundary_mask.ravel())

    @property
    def interior_set(self):
        return np.flatnonzero(self.interior_mask.ravel())

    def distance_to_boundary(self):
        """Euclidean distance from each node to the box boundary."""
        x = self.coordinates
        return np.minimum(x - self.lower, self.upper - x).min(axis=-1)

    def refine(self, factor=2):
        """Same box with spacing divided by ``factor``."""
        return Grid.box(self.lower, self.upper, self.h / factor)

    def edges(self):
        return EdgeSet.from_grid(self)

    def field(self, values, name=""):
        return ScalarField(self, values, name)

    def evaluate(self, fn, name=""):
        """Sample ``fn(x)`` where ``x`` has shape ``(*shape, dim)``."""
        return ScalarField(self, fn(self.coordinates), name)

    def zeros(self, name="", dtype=float):
        return ScalarField(self, np.zeros(self.shape, dtype=dtype), name)

    def ones(self, name=""):
        return ScalarField(self, np.ones(self.shape), name)


@dataclass(frozen=True, eq=False)
class ScalarField:
    """One value per node of ``grid``; values are stored with the grid's shape."""

    grid: Grid
    values: np.ndarray
    name: str = ""

    def __post_init__(self):
        vals = np.asarray(self.values)
        if vals.dtype.kind not in "fc":
            vals = vals.astype(float)
        if vals.size != self.grid.size:
            raise ValueError(f"field has {vals.size} values, grid has {self.grid.size} nodes")
        vals = vals.reshape(self.grid.shape)
        if not np.all(np.isfinite(vals)):
            raise ValueError(f"field {self.name!r} contains non-finite values")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def flat(self):
        return self.values.ravel()

    def with_values(self, values, name=None):
        return ScalarField(self.grid, values, self.name if name is None else name)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)

    def _binop(self, other, op):
        other_vals = other.values if isinstance(other, ScalarField) else other
        return ScalarField(self.grid, op(self.values, other_vals), self.name)

    def __add__(self, other):
        return self._binop(other, np.add)

    __radd__ = __add__

    def __sub__(self, other):
        return self._binop(other, np.subtract)

    def __mul__(self, other):
        return self._binop(other, np.multiply)

    __rmul__ = __mul__

    def __neg__(self):
        return ScalarField(self.grid, -self.values, self.name)


@dataclass(frozen=True)
class EdgeSet:
    """Nearest-neighbour pairs ``(node, node + e_axis)`` along positive axis directions."""

    grid: Grid
    src: np.ndarray
    dst: np.ndarray
    axis: np.ndarray = dc_field(repr=False)

    @classmethod
    def from_grid(cls, grid):
        index = np.arange(grid.size).reshape(grid.shape)
        src, dst, axis = [], [], []
        for ax in range(grid.dim):
            lo = [slice(None)] * grid.dim
            hi = [slice(None)] * grid.dim
            lo[ax] = slice(0, -1)
            hi[ax] = slice(1, None)
            s = index[tuple(lo)].ravel()
            src.append(s)
            dst.append(index[tuple(hi)].ravel())
            axis.append(np.full(s.size, ax))
        return cls(grid, np.concatenate(src), np.concatenate(dst), np.concatenate(axis))

    def __len__(self):
        return int(self.src.size)

    def midpoints(self):
        pts = self.grid.points()
        return 0.5 * (pts[self.src] + pts[self.dst])

    def interior(self):
        """Edges whose endpoints are both interior nodes."""
        inner = self.grid.interior_mask.ravel()
        keep = inner[self.src] & inner[self.dst]
        return EdgeSet(self.grid, self.src[keep], self.dst[keep], self.axis[keep])


def _region_weights_1d(coords, lo, hi, h):
    tol = 1e-9 * h
    w = ((coords >= lo - tol) & (coords <= hi + tol)).astype(float)
    on_edge = (np.abs(coords - lo) <= tol) | (np.abs(coords - hi) <= tol)
    w[on_edge & (w > 0)] = 0.5
    return w


def integrate(field, region=None):
    """Trapezoid-style quadrature of ``field`` over an axis-aligned box.

    Nodes strictly inside get weight ``h**n``; a node lying on a face of
    ``region`` gets a factor 1/2 for each axis on which it sits on the face.
    ``region`` is a sequence of ``(lo, hi)`` pairs; ``None`` means the whole grid.
    """
    grid = field.grid
    if region is None:
        region = list(zip(grid.lower, grid.upper))
    region = np.asarray(region, dtype=float).reshape(grid.dim, 2)
    weights = []
    for coords, (lo, hi) in zip(grid.axes(), region):
        weights.append(_region_weights_1d(coords, lo, hi, grid.h))
    if any(w.sum() == 0 for w in weights):
        warnings.warn("integration region does not intersect the grid", EmptyRegionWarning)
        return 0.0
    total = field.values
    for ax in reversed(range(grid.dim)):
        total = np.tensordot(total, weights[ax], axes=([ax], [0]))
    total = total * grid.cell_volume
    return complex(total) if np.iscomplexobj(total) else float(total)


def ball_mask(grid, center, radius):
    """Boolean node mask of the closed ball (ties included)."""
    d2 = np.sum((grid.coordinates - np.asarray(center, dtype=float)) ** 2, axis=-1)
    return d2 <= radius * radius * (1 + 1e-12) + 1e-300


def ball_integral(field, center, radius):
    """``h**n`` times the sum of node values in the closed ball; zero if empty."""
    mask = ball_mask(field.grid, center, radius)
    return float(field.values[mask].sum() * field.grid.cell_volume)


def ball_average(field, center, radius):
    """Average of node values over the closed ball ``|x - center| <= radius``.

    Balls use plain node counting, without boundary weights.
    """
    mask = ball_mask(field.grid, center, radius)
    count = int(mask.sum())
    if count == 0:
        raise BallBelowResolution(
            f"ball of radius {radius:g} at {tuple(np.atleast_1d(center))} contains no node")
    return float(field.values[mask].sum() / count)


def ball_offsets(radius, h, dim):
    """Integer offsets ``o`` with ``|o| * h <= radius``, sorted by distance.

    Returns ``(offsets, distances)``.
    """
    k = int(np.floor(radius / h + 1e-9))
    rng = np.arange(-k, k + 1)
    offs = np.array(list(itertools.product(rng, repeat=dim)), dtype=int).reshape(-1, dim)
    dist = h * np.sqrt(np.sum(offs.astype(float) ** 2, axis=1))
    keep = dist <= radius * (1 + 1e-12)
    offs, dist = offs[keep], dist[keep]
    order = np.argsort(dist, kind="stable")
    return offs[order], dist[order]


# -- serialization -----------------------------------------------------------

FORMAT_VERSION = 1


def _header(field, meta):
    g = field.grid
    parts = [f"n={g.dim}", "shape=" + "x".join(map(str, g.shape)), f"h={g.h!r}",
             "origin=" + ",".join(repr(o) for o in g.origin), f"field={field.name or 'field'}",
             f"version={FORMAT_VERSION}"]
    for key, val in (meta or {}).items():
        parts.append(f"{key}={val}")
    return "# grid " + " ".join(parts)


def write_field_csv(field, path, meta=None):
    """Write ``field`` as CSV: a ``# grid`` header, then index columns and the value."""
    g = field.grid
    idx = np.indices(g.shape).reshape(g.dim, -1).T
    cols = [f"i{k}" for k in range(g.dim)]
    with open(path, "w") as fh:
        fh.write(_header(field, meta) + "\n")
        if np.iscomplexobj(field.values):
            fh.write(",".join(cols + ["real", "imag"]) + "\n")
            data = np.column_stack([idx, field.flat.real, field.flat.imag])
        else:
            fh.write(",".join(cols + ["value"]) + "\n")
            data = np.column_stack([idx, field.flat])
        fmt = ["%d"] * g.dim + ["%.17g"] * (data.shape[1] - g.dim)
        np.savetxt(fh, data, delimiter=",", fmt=fmt)


def parse_header(line):
    if not line.startswith("# grid"):
        raise ValueError("missing '# grid' header line")
    out = {}
    for tok in line[len("# grid"):].split():
        key, _, val = tok.partition("=")
        out[key] = val
    return out


def read_field_csv(path):
    """Inverse of :func:`write_field_csv`; returns ``(field, header_dict)``."""
    with open(path) as fh:
        header = parse_header(fh.readline().strip())
        columns = fh.readline().strip().split(",")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    shape = tuple(int(s) for s in header["shape"].split("x"))
    origin = tuple(float(o) for o in header["origin"].split(","))
    grid = Grid(shape, float(header["h"]), origin)
    dim = grid.dim
    idx = data[:, :dim].astype(int)
    if columns[-1] == "imag":
        vals_flat = data[:, dim] + 1j * data[:, dim + 1]
        values = np.zeros(shape, dtype=complex)
    else:
        vals_flat = data[:, dim]
        values = np.zeros(shape)
    values[tuple(idx.T)] = vals_flat
    return ScalarField(grid, values, header.get("field", "")), header


def write_field_binary(field, path):
    """Raw little-endian float64 values in C order; the grid travels separately."""
    np.ascontiguousarray(field.values, dtype="<f8").tofile(path)


def read_field_binary(path, grid, name=""):
    return ScalarField(grid, np.fromfile(path, dtype="<f8").reshape(grid.shape), name)
