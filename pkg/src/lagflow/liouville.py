"""Parabolic rescaling, growth-at-antiquity ratios and quadratic fits.

The probes here measure how close a computed flow is to the rigid
(quadratic) picture; they do not produce pass/fail verdicts.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import ConfigurationError, CoverageError, FitError
from .flow import Trajectory
from .grid import BallMask, GridSpec, ScalarField

# Preimages within this many cells of a node take the node value exactly.
_SNAP = 1e-9


@dataclass(frozen=True)
class RescaleSpec:
    """``u~(x, t) = u(lam (x - x0), lam^2 t) / lam^2``."""

    lam: float
    x0: tuple = ()

    def __post_init__(self):
        if not self.lam > 0:
            raise ConfigurationError(f"scaling factor must be positive, got {self.lam}")

    def center(self, dim: int) -> np.ndarray:
        return np.zeros(dim) if len(self.x0) == 0 else np.asarray(self.x0, dtype=float).reshape(dim)


def _locate(s: np.ndarray, n: int):
    r = np.rint(s)
    s = np.where(np.abs(s - r) < _SNAP, r, s)
    i0 = np.clip(np.floor(s).astype(int), 0, n - 2)
    return i0, s - i0


def _multilinear(data: np.ndarray, grid: GridSpec, pts: np.ndarray) -> np.ndarray:
    """Interpolate node arrays ``data[..., *grid.shape]`` at ``pts`` (shape ``(m, dim)``)."""
    h, n = grid.spacing, grid.nodes_per_axis
    m = (n - 1) // 2
    loc = [_locate(pts[:, k] / h + m, n) for k in range(grid.dim)]
    lead = data.shape[: data.ndim - grid.dim]
    out = np.zeros(lead + (len(pts),))
    for corner in itertools.product((0, 1), repeat=grid.dim):
        weight = np.ones(len(pts))
        idx = []
        for (i0, w), c in zip(loc, corner):
            weight = weight * (w if c else 1.0 - w)
            idx.append(i0 + c)
        nz = weight != 0.0
        if not nz.any():
            continue
        vals = data[(Ellipsis, *[ix[nz] for ix in idx])]
        out[..., nz] += weight[nz] * vals
    return out


def rescale(
    traj: Trajectory,
    spec: RescaleSpec,
    target_grid: GridSpec,
    target_times=None,
) -> Trajectory:
    """Rescaled trajectory sampled on ``target_grid``.

    Space is interpolated multilinearly and time linearly, so rescaled
    values stay within the range of the source values. ``target_times``
    defaults to the source snapshot times divided by ``lam^2``. Raises
    :class:`CoverageError` when a preimage leaves the source cube or the
    source time span.
    """
    src = traj.grid
    if target_grid.dim != src.dim:
        raise ConfigurationError("target grid dimension differs from the source")
    lam = float(spec.lam)
    x0 = spec.center(src.dim)
    times = traj.times / lam**2 if target_times is None else np.asarray(target_times, dtype=float)

    pre = lam * (target_grid.points().reshape(-1, src.dim) - x0)
    excess = np.max(np.abs(pre), axis=1) - src.half_width
    worst = int(np.argmax(excess))
    if excess[worst] > 1e-12 * src.half_width:
        node = np.unravel_index(worst, target_grid.shape)
        raise CoverageError(
            f"target node {tuple(int(i) for i in node)} maps to {pre[worst].tolist()}, "
            f"outside the source cube of half width {src.half_width}",
            node=tuple(int(i) for i in node),
        )
    s_times = lam**2 * times
    lo, hi = traj.times[0], traj.times[-1]
    slack = 1e-12 * max(1.0, abs(hi))
    bad = (s_times < lo - slack) | (s_times > hi + slack)
    if bad.any():
        raise CoverageError(f"target time {times[bad][0]} maps to {s_times[bad][0]}, outside [{lo}, {hi}]")

    spatial = _multilinear(traj.data, src, pre)
    out = np.empty((len(times), len(pre)))
    for j, s in enumerate(s_times):
        if len(traj) == 1:
            out[j] = spatial[0]
            continue
        k = int(np.clip(np.searchsorted(traj.times, s, side="right") - 1, 0, len(traj) - 2))
        span = traj.times[k + 1] - traj.times[k]
        w = (s - traj.times[k]) / span
        if abs(w - round(w)) < _SNAP:
            w = float(round(w))
        out[j] = spatial[k] if w == 0.0 else (spatial[k + 1] if w == 1.0 else (1 - w) * spatial[k] + w * spatial[k + 1])
    prov = {"rescaled_from": dict(traj.provenance), "lambda": lam, "x0": x0.tolist()}
    if "dt" in traj.provenance:
        prov["dt"] = traj.provenance["dt"] / lam**2
    return Trajectory(target_grid, traj.theta0, times, out / lam**2, prov)


def aligned_target_grid(source: GridSpec, lam: float, nodes_per_axis: int | None = None) -> GridSpec:
    """Target grid of half width ``a / lam`` whose node preimages are source nodes.

    With the default node count the target spacing is ``h / lam``, so every
    preimage lands exactly on a source node.
    """
    return GridSpec(source.dim, source.half_width / lam, nodes_per_axis or source.nodes_per_axis)


@dataclass(frozen=True, eq=False)
class GrowthReport:
    R0: float
    n: int
    times: np.ndarray
    ratios: np.ndarray
    threshold: float

    def to_dict(self) -> dict:
        return {
            "R0": self.R0,
            "n": self.n,
            "threshold": self.threshold,
            "times": self.times.tolist(),
            "ratios": self.ratios.tolist(),
        }

    def csv_rows(self):
        return [(float(t), float(r), self.threshold) for t, r in zip(self.times, self.ratios)]


def growth_threshold(n: int) -> float:
    """``1 / (6 sqrt(n) + 2)^2``."""
    return 1.0 / (6.0 * math.sqrt(n) + 2.0) ** 2


def growth_ratio(traj: Trajectory, R0: float, mask: BallMask) -> GrowthReport:
    """Per snapshot, ``max_{mask} |u| / (|x|^2 + R0)``."""
    if not R0 > 0:
        raise ConfigurationError(f"R0 must be positive, got {R0}")
    grid = traj.grid
    weight = 1.0 / (grid.radius_sq() + R0)
    sel = mask.members
    ratios = np.array([float(np.max(np.abs(traj.data[k][sel]) * weight[sel])) for k in range(len(traj))])
    return GrowthReport(float(R0), grid.dim, traj.times.copy(), ratios, growth_threshold(grid.dim))


@dataclass(frozen=True, eq=False)
class QuadraticFit:
    """``x.Ax/2 + linear.x + constant`` fitted over a mask."""

    A: np.ndarray
    linear: np.ndarray
    constant: float
    residual_sup: float

    def __call__(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        return 0.5 * np.einsum("...i,ij,...j->...", pts, self.A, pts) + pts @ self.linear + self.constant

    def to_dict(self) -> dict:
        return {
            "A": self.A.tolist(),
            "linear": self.linear.tolist(),
            "constant": self.constant,
            "residual_sup": self.residual_sup,
        }


def quadratic_design(pts: np.ndarray) -> tuple[np.ndarray, list]:
    """Columns ``x_i^2/2``, ``x_i x_j`` (i < j), ``x_i``, ``1`` and their labels."""
    n = pts.shape[1]
    cols, labels = [], []
    for i in range(n):
        for j in range(i, n):
            cols.append(0.5 * pts[:, i] ** 2 if i == j else pts[:, i] * pts[:, j])
            labels.append(("A", i, j))
    for i in range(n):
        cols.append(pts[:, i])
        labels.append(("b", i))
    cols.append(np.ones(len(pts)))
    labels.append(("c",))
    return np.column_stack(cols), labels


def quadratic_fit(field: ScalarField, mask: BallMask) -> QuadraticFit:
    """Least-squares quadratic over the mask nodes.

    Solved through the normal equations with a Cholesky factorisation after
    scaling each column to unit norm.
    """
    grid = field.grid
    n = grid.dim
    pts = grid.points()[mask.members]
    y = field.values[mask.members]
    design, labels = quadratic_design(pts)
    if len(y) < design.shape[1]:
        raise FitError(f"mask has {len(y)} nodes, a quadratic in {n}D needs {design.shape[1]}")
    scale = np.linalg.norm(design, axis=0)
    if np.any(scale == 0):
        raise FitError("degenerate mask: a design column vanishes")
    x = design / scale
    normal = x.T @ x
    if np.linalg.cond(normal) > 1e12:
        raise FitError("rank-deficient design: mask nodes do not determine a quadratic")
    try:
        coef = scipy.linalg.cho_solve(scipy.linalg.cho_factor(normal), x.T @ y) / scale
    except np.linalg.LinAlgError as err:
        raise FitError(f"normal equations not positive definite: {err}") from err
    A = np.zeros((n, n))
    b = np.zeros(n)
    c = 0.0
    for value, lab in zip(coef, labels):
        if lab[0] == "A":
            A[lab[1], lab[2]] = A[lab[2], lab[1]] = value
        elif lab[0] == "b":
            b[lab[1]] = value
        else:
            c = float(value)
    fit = QuadraticFit(A, b, c, 0.0)
    resid = float(np.max(np.abs(y - fit(pts))))
    return QuadraticFit(A, b, c, resid)
