"""Cube grids, grid-sampled fields, finite-difference stencils and ball masks.

Fields live on the cube ``[-a, a]^dim`` sampled by ``nodes_per_axis`` nodes
per axis. Arrays are stored in C (row-major) order: array axis 0 is the
slowest-varying coordinate ``x_1``. The persistence format uses the same
ordering.

Vector fields are arrays of shape ``grid.shape + (dim,)`` and symmetric
matrix fields arrays of shape ``grid.shape + (dim, dim)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import ConfigurationError

# Relative slack on ball membership so that nodes lying exactly on the sphere
# are not lost to round-off in the coordinates.
_MEMBERSHIP_SLACK = 1e-12


@dataclass(frozen=True)
class GridSpec:
    """Uniform node grid on ``[-half_width, half_width]^dim``."""

    dim: int
    half_width: float
    nodes_per_axis: int

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ConfigurationError(f"dim must be 1, 2 or 3, got {self.dim}")
        if not (np.isfinite(self.half_width) and self.half_width > 0):
            raise ConfigurationError(f"half_width must be positive, got {self.half_width}")
        n = self.nodes_per_axis
        if int(n) != n or n < 5 or n % 2 == 0:
            raise ConfigurationError(f"nodes_per_axis must be an odd integer >= 5, got {n}")
        object.__setattr__(self, "nodes_per_axis", int(n))
        object.__setattr__(self, "half_width", float(self.half_width))

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_width / (self.nodes_per_axis - 1)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.nodes_per_axis,) * self.dim

    @property
    def node_count(self) -> int:
        return self.nodes_per_axis**self.dim

    @property
    def origin_index(self) -> tuple[int, ...]:
        return ((self.nodes_per_axis - 1) // 2,) * self.dim

    def coords(self) -> np.ndarray:
        """1D node coordinates, symmetric about an exact zero."""
        m = (self.nodes_per_axis - 1) // 2
        return self.spacing * (np.arange(self.nodes_per_axis) - m)

    def points(self) -> np.ndarray:
        """Node coordinates as an array of shape ``shape + (dim,)``."""
        axes = np.meshgrid(*([self.coords()] * self.dim), indexing="ij")
        return np.stack(axes, axis=-1)

    def radius_sq(self, center=None) -> np.ndarray:
        """Squared Euclidean distance of every node to ``center``."""
        pts = self.points()
        if center is not None:
            pts = pts - np.asarray(center, dtype=float)
        return np.sum(pts**2, axis=-1)

    def refine(self) -> GridSpec:
        """Same cube with the spacing halved."""
        return GridSpec(self.dim, self.half_width, 2 * self.nodes_per_axis - 1)

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "half_width": self.half_width,
            "nodes_per_axis": self.nodes_per_axis,
            "spacing": self.spacing,
        }

    @classmethod
    def from_dict(cls, d) -> GridSpec:
        return cls(int(d["dim"]), float(d["half_width"]), int(d["nodes_per_axis"]))


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Scalar values at every node of ``grid``.

    ``values`` is stored with shape ``grid.shape`` and made read-only.
    """

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.size != self.grid.node_count:
            raise ConfigurationError(
                f"field has {v.size} values, grid needs {self.grid.node_count}"
            )
        v = v.reshape(self.grid.shape)
        if not np.all(np.isfinite(v)):
            raise ConfigurationError("field values must be finite")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, grid: GridSpec, func) -> ScalarField:
        """Sample ``func(points)`` where ``points`` has shape ``shape + (dim,)``."""
        return cls(grid, func(grid.points()))

    @property
    def flat_values(self) -> np.ndarray:
        return self.values.reshape(-1)

    def at_origin(self) -> float:
        return float(self.values[self.grid.origin_index])


def _check_size(grid: GridSpec):
    if grid.nodes_per_axis < 5:
        raise ConfigurationError("finite differences need at least 5 nodes per axis")


def _values(f):
    if isinstance(f, ScalarField):
        return f.grid, f.values
    raise TypeError(f"expected ScalarField, got {type(f).__name__}")


def gradient_array(u: np.ndarray, h: float) -> np.ndarray:
    """Gradient of a raw node array; see :func:`fd_gradient`."""
    if u.ndim == 1:
        return np.gradient(u, h, edge_order=2)[..., None]
    return np.stack(np.gradient(u, h, edge_order=2), axis=-1)


def fd_gradient(f: ScalarField) -> np.ndarray:
    """Second-order gradient of ``f``.

    Central differences at interior nodes, second-order one-sided
    differences at the faces of the cube. Exact on quadratics.

    Returns an array of shape ``grid.shape + (dim,)``.
    """
    grid, u = _values(f)
    _check_size(grid)
    return gradient_array(u, grid.spacing)


def _inner(ndim, axes):
    sl = [slice(None)] * ndim
    for ax in axes:
        sl[ax] = slice(1, -1)
    return tuple(sl)


def _shift(ndim, shifts):
    sl = [slice(None)] * ndim
    for ax, s in shifts.items():
        sl[ax] = slice(1 + s, None if s == 1 else s - 1)
    return tuple(sl)


def _edge_fill(inner: np.ndarray, axes) -> np.ndarray:
    pad = [(0, 0)] * inner.ndim
    for ax in axes:
        pad[ax] = (1, 1)
    return np.pad(inner, pad, mode="edge")


def hessian_array(u: np.ndarray, h: float) -> np.ndarray:
    """Hessian of a raw node array; see :func:`fd_hessian`."""
    d = u.ndim
    out = np.empty(u.shape + (d, d))
    inv_h2 = 1.0 / (h * h)
    for i in range(d):
        d2 = (u[_shift(d, {i: 1})] - 2.0 * u[_inner(d, [i])] + u[_shift(d, {i: -1})]) * inv_h2
        out[..., i, i] = _edge_fill(d2, [i])
        for j in range(i + 1, d):
            pp = u[_shift(d, {i: 1, j: 1})]
            pm = u[_shift(d, {i: 1, j: -1})]
            mp = u[_shift(d, {i: -1, j: 1})]
            mm = u[_shift(d, {i: -1, j: -1})]
            mixed = _edge_fill((pp - pm - mp + mm) * (0.25 * inv_h2), [i, j])
            out[..., i, j] = mixed
            out[..., j, i] = mixed
    return out


def fd_hessian(f: ScalarField) -> np.ndarray:
    """Second-order Hessian of ``f``.

    Interior nodes use the 3-point stencil for pure second derivatives and
    the 4-point cross stencil for mixed ones. A node on a face takes the
    stencil centred on its nearest interior neighbour along the offending
    axes (a shifted stencil), which keeps the result exact on quadratics.
    Entries ``[i, j]`` and ``[j, i]`` are the same array, so the output is
    symmetric bit for bit.

    Returns an array of shape ``grid.shape + (dim, dim)``.
    """
    grid, u = _values(f)
    _check_size(grid)
    return hessian_array(u, grid.spacing)


@dataclass(frozen=True, eq=False)
class BallMask:
    """Nodes of ``grid`` inside the closed ball ``|x - center| <= radius``.

    ``members`` and ``boundary`` are boolean arrays of shape ``grid.shape``.
    A boundary node is a member with at least one axis neighbour that is not
    a member; neighbours off the grid count as non-members.
    """

    grid: GridSpec
    center: np.ndarray
    radius: float
    members: np.ndarray = field(repr=False)
    boundary: np.ndarray = field(repr=False)

    @cached_property
    def member_nodes(self) -> np.ndarray:
        """Flat (row-major) indices of the member nodes."""
        return np.flatnonzero(self.members)

    @cached_property
    def boundary_nodes(self) -> np.ndarray:
        return np.flatnonzero(self.boundary)

    @property
    def interior(self) -> np.ndarray:
        return self.members & ~self.boundary

    @property
    def count(self) -> int:
        return int(self.members.sum())


def make_ball_mask(grid: GridSpec, center=None, radius: float = 1.0) -> BallMask:
    if not radius > 0:
        raise ConfigurationError(f"radius must be positive, got {radius}")
    c = np.zeros(grid.dim) if center is None else np.asarray(center, dtype=float).reshape(grid.dim)
    members = grid.radius_sq(c) <= radius * radius * (1.0 + _MEMBERSHIP_SLACK)
    if not members.any():
        raise ConfigurationError(
            f"ball of radius {radius} about {c.tolist()} contains no grid node"
        )
    padded = np.pad(members, 1, mode="constant", constant_values=False)
    all_neighbours_in = np.ones_like(members)
    for ax in range(grid.dim):
        for s in (-1, 1):
            all_neighbours_in &= np.roll(padded, s, axis=ax)[_inner(grid.dim, range(grid.dim))]
    boundary = members & ~all_neighbours_in
    members.flags.writeable = False
    boundary.flags.writeable = False
    return BallMask(grid, c, float(radius), members, boundary)


def interior_nodes(grid: GridSpec) -> np.ndarray:
    """Boolean array marking nodes not on a face of the cube."""
    m = np.zeros(grid.shape, dtype=bool)
    m[_inner(grid.dim, range(grid.dim))] = True
    return m
