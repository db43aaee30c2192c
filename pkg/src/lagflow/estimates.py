"""Numerical checks of the a priori estimates for convex solutions.

Every check returns an :class:`EstimateReport`. Margins are signed slacks
of the inequality being checked (positive means satisfied); a report fails
when its worst margin is below ``-tolerance_used`` and is
``not_applicable`` when one of the hypotheses could not be verified on the
data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, HypothesisError, RangeError
from .flow import FlowState, Trajectory
from .geometry import (
    apply_L,
    covariant_grad_sq,
    eigenvalues_sym,
    metric_from_hessian,
    volume_b,
)
from .grid import (
    BallMask,
    GridSpec,
    ScalarField,
    gradient_array,
    hessian_array,
    interior_nodes,
    make_ball_mask,
)

PASS = "pass"
FAIL = "fail"
NOT_APPLICABLE = "not_applicable"

EPS_CVX = 1e-8
TOL_C1 = 10.0
TOL_C2 = 10.0


def tolerance(h: float, dt_snap: float, c1: float = TOL_C1, c2: float = TOL_C2) -> float:
    """Discretisation budget ``c1 h^2 + c2 dt_snap``."""
    return c1 * h * h + c2 * dt_snap


@dataclass(frozen=True)
class KorevaarParams:
    alpha: float
    gamma: float
    K: float = 1.0

    def check(self, n: int) -> None:
        """Raise :class:`HypothesisError` unless ``alpha > 3n/2``, ``alpha*gamma < 1``, ``K > 0``."""
        if not self.alpha > 1.5 * n:
            raise HypothesisError(f"alpha={self.alpha} must exceed 3n/2={1.5 * n}")
        if not self.gamma > 0:
            raise HypothesisError(f"gamma={self.gamma} must be positive")
        if not self.alpha * self.gamma < 1:
            raise HypothesisError(f"alpha*gamma={self.alpha * self.gamma} must be below 1")
        if not self.K > 0:
            raise HypothesisError(f"K={self.K} must be positive")


@dataclass(frozen=True)
class BarrierSpec:
    R: float
    n: int

    def __post_init__(self):
        if not self.R > 0:
            raise ConfigurationError(f"R must be positive, got {self.R}")


@dataclass
class EstimateReport:
    check_name: str
    status: str
    worst_margin: float
    worst_location: dict | None
    tolerance_used: float
    hypothesis_log: list = field(default_factory=list)
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.status == PASS

    def to_dict(self) -> dict:
        return {
            "name": self.check_name,
            "status": self.status,
            "margin": _json_float(self.worst_margin),
            "location": self.worst_location,
            "tolerance": self.tolerance_used,
            "hypothesis_log": self.hypothesis_log,
            "details": {k: _json_float(v) for k, v in self.details.items()},
        }

    CSV_COLUMNS = ("name", "status", "margin", "tolerance", "time", "node")

    def csv_row(self) -> dict:
        loc = self.worst_location or {}
        return {
            "name": self.check_name,
            "status": self.status,
            "margin": self.worst_margin,
            "tolerance": self.tolerance_used,
            "time": loc.get("time", ""),
            "node": " ".join(str(i) for i in loc.get("node", [])),
        }


def _json_float(v):
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    return v


class _Hypotheses:
    """Collects precondition checks for one report."""

    def __init__(self):
        self.log = []

    def require(self, name: str, holds: bool, detail: str = "") -> bool:
        self.log.append({"hypothesis": name, "holds": bool(holds), "detail": detail})
        return bool(holds)

    @property
    def failed(self) -> bool:
        return any(not e["holds"] for e in self.log)


def _finish(name, margin, location, tol, hyps, details=None) -> EstimateReport:
    if hyps.failed:
        status = NOT_APPLICABLE
    else:
        status = FAIL if margin < -tol else PASS
    return EstimateReport(name, status, float(margin), location, float(tol), hyps.log, details or {})


def _not_applicable(name, tol, hyps, details=None) -> EstimateReport:
    return EstimateReport(name, NOT_APPLICABLE, float("nan"), None, float(tol), hyps.log, details or {})


def _location(grid: GridSpec, flat_index: int, time: float) -> dict:
    node = np.unravel_index(int(flat_index), grid.shape)
    x = grid.coords()[list(node)]
    return {"node": [int(i) for i in node], "x": [float(v) for v in x], "time": float(time)}


def _hessians(traj: Trajectory, k: int) -> np.ndarray:
    return hessian_array(traj.data[k], traj.grid.spacing)


def _min_eigenvalue(traj: Trajectory, k: int, where: np.ndarray) -> float:
    lam = eigenvalues_sym(_hessians(traj, k))[..., 0]
    return float(lam[where].min())


def _convexity(hyps, traj, where, indices, eps=EPS_CVX) -> bool:
    worst = min(_min_eigenvalue(traj, k, where) for k in indices)
    return hyps.require("convex", worst >= -eps, f"min eigenvalue {worst:.3e} (threshold -{eps:g})")


def _mask_fits(grid: GridSpec, radius: float, what: str):
    if radius > grid.half_width * (1 + 1e-12):
        raise ConfigurationError(
            f"{what} of radius {radius} does not fit the cube of half width {grid.half_width}"
        )


def _cylinder_indices(traj: Trajectory, t_final: float) -> tuple[list[int], int]:
    """Snapshot indices covering ``[0, t_final]``; checks both ends are present."""
    if abs(traj.times[0]) > max(traj.dt, 1e-12):
        raise RangeError(f"trajectory starts at t={traj.times[0]}, expected t=0")
    k_end = traj.index_of_time(t_final)
    return list(range(k_end + 1)), k_end


# --- Jacobi inequality -----------------------------------------------------


def jacobi_expression(traj: Trajectory, time_index: int) -> np.ndarray:
    """Nodewise ``Lb + 2 |grad_g b|^2 / b`` at an interior snapshot."""
    grid = traj.grid
    cache = {}

    def b_field(u, t):
        key = float(t)
        if key not in cache:
            cache[key] = volume_b(eigenvalues_sym(hessian_array(u.values, grid.spacing)))
        return cache[key]

    lb = apply_L(traj, b_field, time_index).values
    b = b_field(traj.snapshot(time_index), traj.times[time_index])
    metric = metric_from_hessian(_hessians(traj, time_index))
    grad_sq = covariant_grad_sq(metric, gradient_array(b, grid.spacing))
    return lb + 2.0 * grad_sq / b


def check_jacobi(
    traj: Trajectory,
    mask: BallMask,
    c1: float = TOL_C1,
    c2: float = TOL_C2,
    eps_cvx: float = EPS_CVX,
) -> EstimateReport:
    """Check ``Lb + 2 |grad_g b|^2 / b <= 0`` on the interior of ``mask``.

    The margin at a node is ``-(Lb + 2 |grad_g b|^2 / b)``.
    """
    name = "jacobi"
    grid = traj.grid
    if len(traj) < 3:
        raise RangeError("the Jacobi check needs at least 3 snapshots")
    tol = tolerance(grid.spacing, traj.dt_snap, c1, c2)
    hyps = _Hypotheses()
    inner = interior_nodes(grid)
    if not _convexity(hyps, traj, inner, range(len(traj)), eps_cvx):
        return _not_applicable(name, tol, hyps)
    where = mask.interior & inner
    hyps.require("mask has interior nodes", where.any(), f"{int(where.sum())} nodes")
    if hyps.failed:
        return _not_applicable(name, tol, hyps)
    flat = np.flatnonzero(where)
    worst, loc = math.inf, None
    for k in range(1, len(traj) - 1):
        margin = -jacobi_expression(traj, k).reshape(-1)[flat]
        i = int(np.argmin(margin))
        if margin[i] < worst:
            worst, loc = float(margin[i]), _location(grid, flat[i], traj.times[k])
    return _finish(name, worst, loc, tol, hyps, {"h": grid.spacing, "dt_snap": traj.dt_snap})


# --- height bound and barrier ----------------------------------------------


def height_bound_check(traj: Trajectory, R: float, tol: float | None = None) -> EstimateReport:
    """Check ``u(0, 1/n) <= arctan(pi/R^2) + max_{B_R x {0}} u``."""
    name = "height"
    grid = traj.grid
    n = grid.dim
    _mask_fits(grid, R, "B_R")
    indices, k_end = _cylinder_indices(traj, 1.0 / n)
    tol = tolerance(grid.spacing, traj.dt_snap) if tol is None else tol
    hyps = _Hypotheses()
    if not hyps.require("theta0 == 0", traj.theta0 == 0.0, f"theta0={traj.theta0}"):
        return _not_applicable(name, tol, hyps)
    ball = make_ball_mask(grid, None, R)
    bound = math.atan(math.pi / R**2) + float(traj.data[0][ball.members].max())
    value = float(traj.data[k_end][grid.origin_index])
    loc = {"node": list(grid.origin_index), "x": [0.0] * n, "time": float(traj.times[k_end])}
    return _finish(name, bound - value, loc, tol, hyps, {"bound": bound, "u_origin": value})


def barrier_value(spec: BarrierSpec, x, t):
    """``w = (t n pi / 2) (|x|/R)^2 + n t arctan(t n pi / R^2)``."""
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    n, R = spec.n, spec.R
    r2 = np.sum(x * x, axis=-1)
    return 0.5 * t * n * math.pi * r2 / R**2 + n * t * np.arctan(t * n * math.pi / R**2)


def barrier_residual(spec: BarrierSpec, x, t) -> np.ndarray:
    """``w_t - sum arctan(lambda_i(D^2 w))`` at points ``x`` (shape ``(m, n)``) and times ``t``.

    ``D^2 w = (t n pi / R^2) I``, so the angle term is ``n arctan(t n pi / R^2)``.
    """
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ConfigurationError("barrier is only defined for t >= 0")
    n, R = spec.n, spec.R
    r2 = np.sum(x * x, axis=-1)
    k = n * math.pi / R**2
    s = t * k
    w_t = 0.5 * n * math.pi * r2 / R**2 + n * np.arctan(s) + n * t * k / (1.0 + s * s)
    angle = n * np.arctan(s)
    return w_t - angle


# --- gradient bound --------------------------------------------------------


def gradient_bound_value(R: float, M: float) -> float:
    """``(M + arctan(pi / R^2)) / R``."""
    return (M + math.atan(math.pi / R**2)) / R


def gradient_bound_check(
    traj: Trajectory, R: float, M: float, tol: float | None = None, eps_cvx: float = EPS_CVX
) -> EstimateReport:
    """Check ``max_{B_1 x [0, 1/n]} |Du| <= (M + arctan(pi/R^2)) / R``."""
    name = "gradient"
    grid = traj.grid
    n = grid.dim
    _mask_fits(grid, 2 * R + 1, "B_{2R+1}")
    indices, _ = _cylinder_indices(traj, 1.0 / n)
    tol = tolerance(grid.spacing, traj.dt_snap) if tol is None else tol
    hyps = _Hypotheses()
    big = make_ball_mask(grid, None, 2 * R + 1)
    u0 = traj.data[0][big.members]
    osc = float(u0.max() - u0.min())
    hyps.require("oscillation at t=0 <= M", osc <= M * (1 + 1e-12), f"oscillation {osc:.6g}, M={M}")
    _convexity(hyps, traj, interior_nodes(grid) & big.members, indices, eps_cvx)
    if hyps.failed:
        return _not_applicable(name, tol, hyps)
    unit = make_ball_mask(grid, None, 1.0)
    flat = unit.member_nodes
    worst_grad, loc = -1.0, None
    for k in indices:
        g = np.linalg.norm(gradient_array(traj.data[k], grid.spacing), axis=-1).reshape(-1)[flat]
        i = int(np.argmax(g))
        if g[i] > worst_grad:
            worst_grad, loc = float(g[i]), _location(grid, flat[i], traj.times[k])
    bound = gradient_bound_value(R, M)
    return _finish(name, bound - worst_grad, loc, tol, hyps, {"bound": bound, "max_grad": worst_grad, "oscillation": osc})


# --- Korevaar test function and Hessian bounds -----------------------------


@dataclass(frozen=True, eq=False)
class KorevaarFields:
    phi: ScalarField
    eta: ScalarField
    h: ScalarField
    argmax: tuple
    h_max: float


def korevaar_fields(state: FlowState, params: KorevaarParams, t: float | None = None) -> KorevaarFields:
    """``phi = [alpha |Du|^2 - alpha gamma + n t (1 - |x|^2)]^+``, ``eta = e^{K phi} - 1``, ``h = eta b``.

    ``argmax`` is the node maximising ``h`` over the unit ball.
    """
    grid = state.grid
    n = grid.dim
    t = state.t if t is None else t
    u = state.u.values
    a, gam, K = params.alpha, params.gamma, params.K
    du2 = np.sum(gradient_array(u, grid.spacing) ** 2, axis=-1)
    x2 = grid.radius_sq()
    phi = np.maximum(a * du2 - a * gam + n * t * (1.0 - x2), 0.0)
    eta = np.expm1(K * phi)
    b = volume_b(eigenvalues_sym(hessian_array(u, grid.spacing)))
    h = eta * b
    unit = make_ball_mask(grid, None, 1.0).members
    masked = np.where(unit, h, -np.inf)
    idx = np.unravel_index(int(np.argmax(masked)), grid.shape)
    return KorevaarFields(
        ScalarField(grid, phi), ScalarField(grid, eta), ScalarField(grid, h),
        tuple(int(i) for i in idx), float(h[idx]),
    )


def hessian_bound_constant(n: int, params: KorevaarParams) -> float:
    """``e^{2nK} (2a/(2a-3n))^n / (e^{K(1-a g)} - 1)^{2n}`` for ``a = alpha``, ``g = gamma``."""
    params.check(n)
    a, g, K = params.alpha, params.gamma, params.K
    return math.exp(2 * n * K) * (2 * a / (2 * a - 3 * n)) ** n / math.expm1(K * (1 - a * g)) ** (2 * n)


@dataclass(frozen=True)
class MainConstants:
    n: int
    gamma: float
    alpha: float
    K: float
    C_hb: float
    C_paper: float
    gamma_below_bound: bool

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def main_gamma(n: int) -> float:
    """``(2 + arctan(pi / (9n)))^2 / (9n)``."""
    return (2.0 + math.atan(math.pi / (9 * n))) ** 2 / (9 * n)


def printed_constant(n: int, alpha: float, gamma: float) -> float:
    """``e 16^n / (e^{1 - alpha gamma} - 1)^{2n}``, the constant as stated for K = 1."""
    return math.e * 16.0**n / math.expm1(1 - alpha * gamma) ** (2 * n)


def main_constant(n: int) -> MainConstants:
    """Constants for ``alpha = 1.6 n``, ``K = 1`` and the oscillation-derived ``gamma``.

    ``C_hb`` substitutes these values into :func:`hessian_bound_constant`;
    ``C_paper`` is the stated closed form. They differ by ``e^{2n-1}``.
    """
    if n < 1:
        raise ConfigurationError("n must be positive")
    gamma = main_gamma(n)
    alpha = 1.6 * n
    c_hb = hessian_bound_constant(n, KorevaarParams(alpha, gamma, 1.0))
    return MainConstants(n, gamma, alpha, 1.0, c_hb, printed_constant(n, alpha, gamma), gamma < 0.61 / n)


def hessian_bound_check(traj: Trajectory, params: KorevaarParams, eps_cvx: float = EPS_CVX) -> EstimateReport:
    """Check ``lambda_max^2(0, 1/n) <= hessian_bound_constant(n, params)``.

    Hypotheses verified on the unit ball over ``[0, 1/n]``: convexity and
    ``|Du|^2 < gamma``; the parameter conditions are logged as well.
    """
    name = "hessian"
    grid = traj.grid
    n = grid.dim
    _mask_fits(grid, 1.0, "B_1")
    indices, k_end = _cylinder_indices(traj, 1.0 / n)
    hyps = _Hypotheses()
    try:
        constant = hessian_bound_constant(n, params)
        hyps.require("alpha > 3n/2, alpha*gamma < 1, K > 0", True)
    except HypothesisError as err:
        hyps.require("alpha > 3n/2, alpha*gamma < 1, K > 0", False, str(err))
        return _not_applicable(name, 0.0, hyps)
    unit = make_ball_mask(grid, None, 1.0).members
    _convexity(hyps, traj, unit & interior_nodes(grid), indices, eps_cvx)
    du2 = max(
        float(np.sum(gradient_array(traj.data[k], grid.spacing) ** 2, axis=-1)[unit].max()) for k in indices
    )
    hyps.require("|Du|^2 < gamma on B_1", du2 < params.gamma, f"max |Du|^2 = {du2:.6g}, gamma={params.gamma}")
    details = {"constant": constant, "max_grad_sq": du2}
    if math.isclose(params.alpha, 1.6 * n) and params.K == 1.0:
        details["constant_printed"] = printed_constant(n, params.alpha, params.gamma)
    if hyps.failed:
        return _not_applicable(name, 0.0, hyps, details)
    lam = eigenvalues_sym(_hessians(traj, k_end)[grid.origin_index])
    lam_max_sq = float(np.max(lam * lam))
    details["lambda_max_sq"] = lam_max_sq
    loc = {"node": list(grid.origin_index), "x": [0.0] * n, "time": float(traj.times[k_end])}
    return _finish(name, constant - lam_max_sq, loc, 0.0, hyps, details)


def theta_monotonicity_check(traj: Trajectory, tol: float | None = None, eps_cvx: float = EPS_CVX) -> EstimateReport:
    """Check that every node value is nondecreasing between snapshots."""
    name = "monotone"
    grid = traj.grid
    tol = 10.0 * np.finfo(float).eps * len(traj) if tol is None else tol
    hyps = _Hypotheses()
    hyps.require("theta0 == 0", traj.theta0 == 0.0, f"theta0={traj.theta0}")
    _convexity(hyps, traj, interior_nodes(grid), range(len(traj)), eps_cvx)
    if hyps.failed:
        return _not_applicable(name, tol, hyps)
    if len(traj) < 2:
        return _finish(name, 0.0, None, tol, hyps)
    inc = np.diff(traj.data, axis=0).reshape(len(traj) - 1, -1)
    k, i = np.unravel_index(int(np.argmin(inc)), inc.shape)
    return _finish(name, float(inc[k, i]), _location(grid, i, traj.times[k + 1]), tol, hyps)


def stationarity_check(traj: Trajectory, tol: float = 1e-9) -> EstimateReport:
    """Largest nodewise change from the first snapshot, as a negative margin."""
    grid = traj.grid
    change = np.abs(traj.data - traj.data[0]).reshape(len(traj), -1)
    k, i = np.unravel_index(int(np.argmax(change)), change.shape)
    return _finish("stationarity", -float(change[k, i]), _location(grid, i, traj.times[k]), tol, _Hypotheses())


def barrier_check(spec: BarrierSpec, samples: int = 10**6, seed: int = 0, tol: float = 1e-12) -> EstimateReport:
    """Sample ``B_R x [0, 1/n]`` uniformly and report the smallest barrier residual."""
    rng = np.random.default_rng(seed)
    n = spec.n
    direction = rng.standard_normal((samples, n))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    radius = spec.R * rng.random(samples) ** (1.0 / n)
    x = direction * radius[:, None]
    t = rng.random(samples) / n
    res = barrier_residual(spec, x, t)
    i = int(np.argmin(res))
    loc = {"x": x[i].tolist(), "time": float(t[i])}
    return _finish("barrier", float(res[i]), loc, tol, _Hypotheses(), {"R": spec.R, "n": n, "samples": samples})
