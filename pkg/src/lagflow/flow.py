"""Explicit time stepping of ``u_t = sum arctan(lambda_i(D^2 u)) - theta0``.

Also hosts the Newton solver for the stationary (special Lagrangian)
problem ``sum arctan(lambda_i) = theta0`` with Dirichlet data.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConfigurationError, DivergenceError, RangeError, SolverError
from .geometry import eigenvalues_sym, lagrangian_angle, metric_from_hessian
from .grid import GridSpec, ScalarField, hessian_array, interior_nodes

log = logging.getLogger(__name__)

SCHEMES = ("rk2", "rk4")
BOUNDARY_MODES = ("free", "dirichlet_function")


@dataclass(frozen=True)
class FlowState:
    u: ScalarField
    t: float = 0.0
    theta0: float = 0.0

    @property
    def grid(self) -> GridSpec:
        return self.u.grid


@dataclass(frozen=True)
class SolverConfig:
    """Time stepping parameters.

    The step is ``dt = dt_safety * h**2 / dim`` rounded down so that a whole
    number of steps (a multiple of ``snapshot_stride``) reaches ``t_end``.
    In ``dirichlet_function`` mode ``boundary_function(points, t)`` supplies
    the face values; ``points`` has shape ``(m, dim)``.
    """

    t_end: float
    dt_safety: float = 0.4
    scheme: str = "rk2"
    snapshot_stride: int = 1
    boundary_mode: str = "free"
    boundary_function: Callable | None = field(default=None, compare=False)

    def __post_init__(self):
        if not 0.0 < self.dt_safety <= 0.5:
            raise ConfigurationError(f"dt_safety must lie in (0, 0.5], got {self.dt_safety}")
        if self.scheme not in SCHEMES:
            raise ConfigurationError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if int(self.snapshot_stride) != self.snapshot_stride or self.snapshot_stride < 1:
            raise ConfigurationError("snapshot_stride must be a positive integer")
        if self.boundary_mode not in BOUNDARY_MODES:
            raise ConfigurationError(f"boundary_mode must be one of {BOUNDARY_MODES}")
        if self.boundary_mode == "dirichlet_function" and self.boundary_function is None:
            raise ConfigurationError("dirichlet_function mode needs a boundary_function")

    def to_dict(self) -> dict:
        return {
            "t_end": self.t_end,
            "dt_safety": self.dt_safety,
            "scheme": self.scheme,
            "snapshot_stride": self.snapshot_stride,
            "boundary_mode": self.boundary_mode,
        }


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Snapshots of a flow on a fixed grid.

    ``data`` has shape ``(len(times),) + grid.shape``. ``provenance`` records
    the solver configuration, step size and any seed information.
    """

    grid: GridSpec
    theta0: float
    times: np.ndarray
    data: np.ndarray
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float).reshape(-1)
        data = np.asarray(self.data, dtype=float).reshape((len(times),) + self.grid.shape)
        if len(times) > 1 and np.any(np.diff(times) <= 0):
            raise ConfigurationError("trajectory times must be strictly increasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "data", data)

    @classmethod
    def from_fields(cls, fields, times, theta0=0.0, provenance=None) -> Trajectory:
        fields = list(fields)
        grid = fields[0].grid
        if any(f.grid != grid for f in fields):
            raise ConfigurationError("all snapshots must share one grid")
        return cls(grid, theta0, times, np.stack([f.values for f in fields]), dict(provenance or {}))

    def __len__(self):
        return len(self.times)

    def snapshot(self, k: int) -> ScalarField:
        return ScalarField(self.grid, self.data[k])

    @property
    def snapshots(self) -> list[ScalarField]:
        return [self.snapshot(k) for k in range(len(self.times))]

    @property
    def dt_snap(self) -> float:
        return float(self.times[1] - self.times[0]) if len(self.times) > 1 else 0.0

    @property
    def dt(self) -> float:
        """Solver step, falling back to the snapshot spacing."""
        return float(self.provenance.get("dt", self.dt_snap))

    def state(self, k: int) -> FlowState:
        return FlowState(self.snapshot(k), float(self.times[k]), self.theta0)

    def index_of_time(self, t: float, tol: float | None = None) -> int:
        """Index of the snapshot at time ``t``.

        The nearest snapshot is accepted when it lies within ``tol`` (default:
        the solver step) of ``t``; otherwise :class:`RangeError`.
        """
        k = int(np.argmin(np.abs(self.times - t)))
        tol = max(self.dt, 1e-12) if tol is None else tol
        if abs(self.times[k] - t) > tol * (1 + 1e-9):
            raise RangeError(
                f"no snapshot at t={t} (nearest t={self.times[k]}, tolerance {tol})"
            )
        return k


def max_dt(grid: GridSpec, dt_safety: float = 0.5) -> float:
    """Largest admissible explicit step ``dt_safety * h^2 / dim``.

    The discrete operator ``g^{ij} d_ij`` has spectral radius at most
    ``4 dim / h^2`` because ``g^{-1} <= I``; both RK2 and RK4 are stable
    for ``dt * 4 dim / h^2 <= 2``.
    """
    return dt_safety * grid.spacing**2 / grid.dim


def _angle_2d(u, h):
    # same stencils and closed-form eigenvalues as fd_hessian/eigen_sym,
    # without assembling the matrix field
    inv_h2 = 1.0 / (h * h)
    uxx = np.empty_like(u)
    uyy = np.empty_like(u)
    uxy = np.empty_like(u)
    uxx[1:-1] = (u[2:] - 2.0 * u[1:-1] + u[:-2]) * inv_h2
    uxx[0], uxx[-1] = uxx[1], uxx[-2]
    uyy[:, 1:-1] = (u[:, 2:] - 2.0 * u[:, 1:-1] + u[:, :-2]) * inv_h2
    uyy[:, 0], uyy[:, -1] = uyy[:, 1], uyy[:, -2]
    uxy[1:-1, 1:-1] = (u[2:, 2:] - u[2:, :-2] - u[:-2, 2:] + u[:-2, :-2]) * (0.25 * inv_h2)
    uxy[0], uxy[-1] = uxy[1], uxy[-2]
    uxy[:, 0], uxy[:, -1] = uxy[:, 1], uxy[:, -2]
    m = 0.5 * (uxx + uyy)
    d = 0.5 * (uxx - uyy)
    r = np.sqrt(d * d + uxy * uxy)
    return np.arctan(m - r) + np.arctan(m + r)


def angle_array(u: np.ndarray, h: float) -> np.ndarray:
    """Nodewise Lagrangian angle of the discrete Hessian of ``u``."""
    if u.ndim == 2:
        return _angle_2d(u, h)
    return lagrangian_angle(eigenvalues_sym(hessian_array(u, h)))


def rhs(state: FlowState) -> ScalarField:
    """``sum arctan(lambda_i(D^2 u)) - theta0`` at every node."""
    return ScalarField(state.grid, angle_array(state.u.values, state.grid.spacing) - state.theta0)


class _Stepper:
    def __init__(self, grid, theta0, scheme="rk2", boundary_mode="free", boundary_function=None):
        self.h = grid.spacing
        self.theta0 = theta0
        self.scheme = scheme
        self.bfun = boundary_function if boundary_mode == "dirichlet_function" else None
        if self.bfun is not None:
            self.faces = ~interior_nodes(grid)
            self.face_points = grid.points()[self.faces]

    def f(self, u):
        return angle_array(u, self.h) - self.theta0

    def pin(self, u, t):
        if self.bfun is not None:
            u[self.faces] = self.bfun(self.face_points, t)
        return u

    def __call__(self, u, t, dt):
        f = self.f
        if self.scheme == "rk2":
            k1 = f(u)
            k2 = f(self.pin(u + dt * k1, t + dt))
            out = u + (0.5 * dt) * (k1 + k2)
        else:
            k1 = f(u)
            k2 = f(self.pin(u + (0.5 * dt) * k1, t + 0.5 * dt))
            k3 = f(self.pin(u + (0.5 * dt) * k2, t + 0.5 * dt))
            k4 = f(self.pin(u + dt * k3, t + dt))
            out = u + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        return self.pin(out, t + dt)


def _check_finite(u, t):
    bad = ~np.isfinite(u)
    if bad.any():
        node = tuple(int(i) for i in np.argwhere(bad)[0])
        raise DivergenceError(f"non-finite value at node {node}, t={t}", node=node, time=t)


def step(state: FlowState, dt: float, config: SolverConfig | None = None) -> FlowState:
    """Advance ``state`` by one explicit Runge-Kutta step of size ``dt``."""
    grid = state.grid
    safety = 0.5 if config is None else config.dt_safety
    bound = max_dt(grid, safety)
    if dt < 0 or dt > bound * (1 + 1e-12):
        raise ConfigurationError(f"dt={dt} outside [0, {bound}] (dt_safety={safety})")
    if dt == 0:
        return state
    if config is None:
        stepper = _Stepper(grid, state.theta0)
    else:
        stepper = _Stepper(grid, state.theta0, config.scheme, config.boundary_mode, config.boundary_function)
    u = stepper(np.array(state.u.values), state.t, dt)
    _check_finite(u, state.t + dt)
    return FlowState(ScalarField(grid, u), state.t + dt, state.theta0)


def plan_steps(grid: GridSpec, t0: float, config: SolverConfig) -> tuple[int, float]:
    """Number of steps and uniform step size for a march from ``t0`` to ``t_end``."""
    span = config.t_end - t0
    if span < 0:
        raise ConfigurationError(f"t_end={config.t_end} precedes the initial time {t0}")
    if span == 0:
        return 0, 0.0
    stride = config.snapshot_stride
    nsteps = math.ceil(span / max_dt(grid, config.dt_safety) - 1e-9)
    nsteps = stride * math.ceil(nsteps / stride)
    return nsteps, span / nsteps


def evolve(state: FlowState, config: SolverConfig, provenance: dict | None = None) -> Trajectory:
    """March from ``state.t`` to ``config.t_end`` with a uniform step.

    Snapshots are kept every ``snapshot_stride`` steps; the first and the
    last state are always stored. On divergence the
    :class:`DivergenceError` carries the partial trajectory.
    """
    grid = state.grid
    nsteps, dt = plan_steps(grid, state.t, config)
    stepper = _Stepper(grid, state.theta0, config.scheme, config.boundary_mode, config.boundary_function)
    prov = {"config": config.to_dict(), "dt": dt, "steps": nsteps}
    prov.update(provenance or {})
    t0 = state.t
    u = np.array(state.u.values)
    times, snaps = [t0], [u.copy()]
    for i in range(1, nsteps + 1):
        t_prev = t0 + (i - 1) * dt
        try:
            u = stepper(u, t_prev, dt)
            _check_finite(u, t_prev + dt)
        except DivergenceError as err:
            err.partial = Trajectory(grid, state.theta0, times, np.stack(snaps), prov)
            raise
        if i % config.snapshot_stride == 0:
            times.append(config.t_end if i == nsteps else t0 + i * dt)
            snaps.append(u.copy())
    log.debug("evolved %d steps of dt=%.3e on %s", nsteps, dt, grid)
    return Trajectory(grid, state.theta0, np.array(times), np.stack(snaps), prov)


def convexity_monitor(state: FlowState) -> float:
    """Smallest Hessian eigenvalue over interior nodes."""
    grid = state.grid
    lam = eigenvalues_sym(hessian_array(state.u.values, grid.spacing))
    return float(lam[..., 0][interior_nodes(grid)].min())


def equation_residual(traj: Trajectory, time_index: int) -> ScalarField:
    """``u_t - (sum arctan(lambda_i) - theta0)`` with a central time difference."""
    if not 1 <= time_index <= len(traj) - 2:
        raise RangeError(f"time_index {time_index} needs neighbours on both sides")
    k = time_index
    ut = (traj.data[k + 1] - traj.data[k - 1]) / (traj.times[k + 1] - traj.times[k - 1])
    return ScalarField(traj.grid, ut - (angle_array(traj.data[k], traj.grid.spacing) - traj.theta0))


# --- stationary problem -------------------------------------------------------


def _neighbour(idx, shape, shifts):
    out = list(idx)
    for ax, s in shifts.items():
        out[ax] = out[ax] + s
    return np.ravel_multi_index(out, shape)


def _jacobian(u, grid, interior_idx):
    """Sparse derivative of the interior residual w.r.t. interior unknowns."""
    h2 = grid.spacing**2
    shape = grid.shape
    d = grid.dim
    ginv = metric_from_hessian(hessian_array(u, grid.spacing)).g_inv.reshape(-1, d, d)[interior_idx]
    idx = np.unravel_index(interior_idx, shape)
    rows, cols, vals = [], [], []
    row = np.arange(len(interior_idx))

    def add(shifts, coef):
        rows.append(row)
        cols.append(_neighbour(idx, shape, shifts))
        vals.append(coef)

    for i in range(d):
        gii = ginv[:, i, i] / h2
        add({i: 1}, gii)
        add({i: -1}, gii)
        add({}, -2.0 * gii)
        for j in range(i + 1, d):
            gij = ginv[:, i, j] / (2.0 * h2)
            add({i: 1, j: 1}, gij)
            add({i: -1, j: -1}, gij)
            add({i: 1, j: -1}, -gij)
            add({i: -1, j: 1}, -gij)
    full = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(len(interior_idx), grid.node_count),
    )
    return full[:, interior_idx]


def _boundary_values(boundary_data, grid, faces):
    if isinstance(boundary_data, ScalarField):
        return np.asarray(boundary_data.values)[faces]
    if callable(boundary_data):
        return np.asarray(boundary_data(grid.points()[faces]), dtype=float)
    vals = np.asarray(boundary_data, dtype=float)
    if vals.shape != (int(faces.sum()),):
        raise ConfigurationError("boundary data must have one value per face node")
    return vals


def solve_stationary(
    theta0: float,
    boundary_data,
    grid: GridSpec,
    max_iters: int = 50,
    tol: float = 1e-10,
) -> ScalarField:
    """Solve ``sum arctan(lambda_i(D^2 u)) = theta0`` with Dirichlet data.

    ``boundary_data`` is a callable on face-node coordinates (shape
    ``(m, dim)``), a ScalarField whose face values are used, or a flat array
    of face values. Damped Newton on interior nodes with the linearisation
    ``g^{ij} d_ij``; the step is halved until the max-norm residual drops.
    The starting guess is ``tan(theta0/n) |x|^2 / 2`` plus the affine
    function that best matches the boundary data in least squares.
    """
    n = grid.dim
    if not abs(theta0) < n * math.pi / 2:
        raise ConfigurationError(f"|theta0| must be below n*pi/2, got {theta0}")
    faces = ~interior_nodes(grid)
    bvals = _boundary_values(boundary_data, grid, faces)
    if not np.all(np.isfinite(bvals)):
        raise ConfigurationError("boundary data must be finite")

    pts = grid.points()
    q = 0.5 * math.tan(theta0 / n) * np.sum(pts**2, axis=-1)
    design = np.column_stack([pts[faces], np.ones(int(faces.sum()))])
    coef, *_ = np.linalg.lstsq(design, bvals - q[faces], rcond=None)
    u = q + pts @ coef[:-1] + coef[-1]
    u[faces] = bvals

    interior_idx = np.flatnonzero(~faces.reshape(-1))
    h = grid.spacing

    def residual(v):
        return (angle_array(v, h) - theta0).reshape(-1)[interior_idx]

    r = residual(u)
    history = [float(np.abs(r).max())]
    for it in range(max_iters):
        if history[-1] < tol:
            return ScalarField(grid, u)
        jac = _jacobian(u, grid, interior_idx).tocsc()
        with warnings.catch_warnings():
            warnings.simplefilter("error", spla.MatrixRankWarning)
            try:
                delta = spla.spsolve(jac, -r)
            except (spla.MatrixRankWarning, RuntimeError) as err:
                raise SolverError(f"singular linearised system: {err}", history) from err
        if not np.all(np.isfinite(delta)):
            raise SolverError("singular linearised system", history)
        s = 1.0
        while True:
            trial = u.copy()
            trial.reshape(-1)[interior_idx] += s * delta
            r_trial = residual(trial)
            norm = float(np.abs(r_trial).max())
            if norm < history[-1] or s < 2.0**-30:
                break
            s *= 0.5
        u, r = trial, r_trial
        history.append(norm)
        log.debug("newton %d: residual %.3e (step %.3g)", it + 1, norm, s)
    if history[-1] < tol:
        return ScalarField(grid, u)
    raise SolverError(
        f"Newton did not converge in {max_iters} iterations (residual {history[-1]:.3e})", history
    )
