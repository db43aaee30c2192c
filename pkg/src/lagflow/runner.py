"""Config-driven runs: validate, generate data, evolve, persist, check.

A run config is a JSON object::

    {
      "grid": {"dim": 2, "half_width": 1.0, "nodes_per_axis": 65},
      "flow": {"theta0": 0.0, "t_end": 0.5, "dt_safety": 0.4, "scheme": "rk2",
               "snapshot_stride": 10, "boundary_mode": "free"},
      "initial_data": {"kind": "seeded_convex", "parameters": {}, "seed": 1},
      "checks": [{"name": "jacobi", "radius": 0.8}, {"name": "monotone"}],
      "output_dir": "out"
    }

``flow.theta0`` may be the string ``"matched"`` for quadratic data, which
selects the angle of ``A`` so the data is stationary. In
``dirichlet_function`` mode the face values are held at the initial data.
Each check may carry ``"expect": "not_applicable"``; by default a check is
expected to pass. Checks ``growth`` and ``quadfit`` are probes: they write
their output but never affect the exit status.
"""

from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import estimates as est
from .errors import ConfigurationError, HypothesisError, LagflowError
from .flow import FlowState, SolverConfig, evolve
from .geometry import eigenvalues_sym, lagrangian_angle
from .grid import GridSpec, fd_hessian, interior_nodes, make_ball_mask
from .initial_data import KINDS, generate_initial_data
from .liouville import growth_ratio, quadratic_fit
from .persistence import save_trajectory, write_csv, write_json, write_reports

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_INVALID = 2
EXIT_STAGE_ERROR = 3

CHECKS = ("jacobi", "height", "gradient", "hessian", "barrier", "monotone", "stationarity")
PROBES = ("growth", "quadfit")


@dataclass
class RunConfig:
    grid: dict
    flow: dict
    initial_data: dict
    checks: list = field(default_factory=list)
    output_dir: str = "out"

    @classmethod
    def from_dict(cls, d: dict) -> RunConfig:
        missing = [k for k in ("grid", "flow", "initial_data") if k not in d]
        if missing:
            raise ConfigurationError(f"run config lacks {missing}")
        return cls(d["grid"], d["flow"], d["initial_data"], list(d.get("checks", [])), d.get("output_dir", "out"))

    @classmethod
    def from_file(cls, path) -> RunConfig:
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        return {
            "grid": self.grid,
            "flow": self.flow,
            "initial_data": self.initial_data,
            "checks": self.checks,
            "output_dir": self.output_dir,
        }


def _theta0(cfg: RunConfig, u0, grid) -> float:
    theta0 = cfg.flow.get("theta0", 0.0)
    if theta0 == "matched":
        if cfg.initial_data.get("kind") != "quadratic":
            raise ConfigurationError('theta0 "matched" needs quadratic initial data')
        lam = eigenvalues_sym(fd_hessian(u0)[grid.origin_index])
        return float(lagrangian_angle(lam))
    return float(theta0)


def _resolve_gamma(spec: dict, n: int) -> float:
    gamma = spec.get("gamma", "main")
    return est.main_gamma(n) if gamma == "main" else float(gamma)


def _check_params(spec: dict, grid: GridSpec, flow: dict, theta0: float) -> list[str]:
    """Problems with one check's parameters; empty when all preconditions hold."""
    name = spec.get("name")
    n, a = grid.dim, grid.half_width
    t_end = float(flow.get("t_end", 0.0))
    problems = []
    expect = spec.get("expect", "pass")
    if expect not in ("pass", "not_applicable"):
        problems.append(f"expect must be 'pass' or 'not_applicable', got {expect!r}")
    if name not in CHECKS + PROBES:
        return [f"unknown check {name!r}"]
    needs_cylinder = name in ("height", "gradient", "hessian")
    if needs_cylinder and t_end < 1.0 / n - 1e-12:
        problems.append(f"{name} needs t_end >= 1/n = {1.0 / n}")
    if name == "jacobi":
        r = float(spec.get("radius", 0.8))
        if not 0 < r <= a:
            problems.append(f"jacobi radius {r} must lie in (0, {a}]")
    elif name == "height":
        R = float(spec.get("R", 3.0))
        if not 0 < R <= a:
            problems.append(f"height R={R} must lie in (0, {a}]")
        if theta0 != 0.0 and expect == "pass":
            problems.append("height needs theta0 = 0")
    elif name == "gradient":
        R, M = float(spec.get("R", 3 * math.sqrt(n))), float(spec.get("M", 2.0))
        if not R > 0 or 2 * R + 1 > a:
            problems.append(f"gradient needs 0 < 2R+1 <= {a}, got R={R}")
        if not M > 0:
            problems.append(f"gradient needs M > 0, got {M}")
    elif name == "hessian":
        params = est.KorevaarParams(float(spec.get("alpha", 1.6 * n)), _resolve_gamma(spec, n), float(spec.get("K", 1.0)))
        try:
            params.check(n)
        except HypothesisError as err:
            problems.append(f"hessian: {err}")
        if a < 1:
            problems.append("hessian needs the unit ball inside the grid")
    elif name == "barrier":
        if not float(spec.get("R", 3 * math.sqrt(n))) > 0:
            problems.append("barrier needs R > 0")
    elif name == "monotone":
        if theta0 != 0.0 and expect == "pass":
            problems.append("monotone needs theta0 = 0")
    elif name == "growth":
        if not float(spec.get("R0", 1.0)) > 0:
            problems.append("growth needs R0 > 0")
    return [f"{name}: {p}" if not p.startswith(name) else p for p in problems]


def validate(cfg: RunConfig):
    """Build grid, solver config, initial data and phase; collect every problem.

    Returns ``(problems, grid, solver, u0, theta0)``; the last four are
    ``None`` when validation could not get that far.
    """
    problems = []
    grid = solver = u0 = None
    theta0 = 0.0
    try:
        grid = GridSpec.from_dict(cfg.grid)
    except (LagflowError, KeyError, TypeError, ValueError) as err:
        return [f"grid: {err}"], None, None, None, 0.0
    flow = dict(cfg.flow)
    try:
        bmode = flow.get("boundary_mode", "free")
        solver = SolverConfig(
            t_end=float(flow["t_end"]),
            dt_safety=float(flow.get("dt_safety", 0.4)),
            scheme=flow.get("scheme", "rk2"),
            snapshot_stride=int(flow.get("snapshot_stride", 1)),
            boundary_mode=bmode,
            boundary_function=(lambda p, t: None) if bmode == "dirichlet_function" else None,
        )
        if solver.t_end < float(flow.get("t0", 0.0)):
            problems.append("flow: t_end precedes t0")
    except (LagflowError, KeyError, TypeError, ValueError) as err:
        problems.append(f"flow: {err}")
    idata = cfg.initial_data
    if idata.get("kind") not in KINDS:
        problems.append(f"initial_data: unknown kind {idata.get('kind')!r}")
    else:
        try:
            u0 = generate_initial_data(idata["kind"], idata.get("parameters"), idata.get("seed"), grid)
            theta0 = _theta0(cfg, u0, grid)
        except (LagflowError, KeyError, TypeError, ValueError) as err:
            problems.append(f"initial_data: {err}")
    for spec in cfg.checks:
        problems.extend(_check_params(spec, grid, flow, theta0))
    return problems, grid, solver, u0, theta0


def _run_check(spec, traj, grid) -> est.EstimateReport:
    name = spec["name"]
    n = grid.dim
    if name == "jacobi":
        mask = make_ball_mask(grid, spec.get("center"), float(spec.get("radius", 0.8)))
        return est.check_jacobi(traj, mask, float(spec.get("c1", est.TOL_C1)), float(spec.get("c2", est.TOL_C2)))
    if name == "height":
        return est.height_bound_check(traj, float(spec.get("R", 3.0)), spec.get("tol"))
    if name == "gradient":
        return est.gradient_bound_check(traj, float(spec.get("R", 3 * math.sqrt(n))), float(spec.get("M", 2.0)), spec.get("tol"))
    if name == "hessian":
        params = est.KorevaarParams(float(spec.get("alpha", 1.6 * n)), _resolve_gamma(spec, n), float(spec.get("K", 1.0)))
        return est.hessian_bound_check(traj, params)
    if name == "barrier":
        bs = est.BarrierSpec(float(spec.get("R", 3 * math.sqrt(n))), int(spec.get("n", n)))
        return est.barrier_check(bs, int(spec.get("samples", 10**6)), int(spec.get("seed", 0)))
    if name == "monotone":
        return est.theta_monotonicity_check(traj, spec.get("tol"))
    if name == "stationarity":
        return est.stationarity_check(traj, float(spec.get("tol", 1e-9)))
    raise ConfigurationError(f"unknown check {name!r}")


def _run_probe(spec, traj, grid, out: Path):
    name = spec["name"]
    radius = float(spec.get("radius", grid.half_width))
    mask = make_ball_mask(grid, None, radius)
    if name == "growth":
        rep = growth_ratio(traj, float(spec.get("R0", 1.0)), mask)
        write_json(rep.to_dict(), out / "growth.json")
        write_csv(rep.csv_rows(), ("t", "ratio", "threshold"), out / "growth.csv")
        return rep.to_dict()
    k = int(spec.get("time_index", -1))
    fit = quadratic_fit(traj.snapshot(k), mask)
    write_json(fit.to_dict(), out / "quadfit.json")
    return fit.to_dict()


def run(config) -> int:
    """Execute a run config (a :class:`RunConfig` or plain dict); returns the exit status.

    Writes ``validation.json`` on invalid configs, otherwise ``trajectory/``,
    ``report.json``, ``report.csv``, probe outputs and ``failures.json``
    into ``output_dir``. Artifacts written before an error are kept.
    """
    cfg = config if isinstance(config, RunConfig) else RunConfig.from_dict(config)
    out = Path(cfg.output_dir)
    problems, grid, solver, u0, theta0 = validate(cfg)
    if problems:
        write_json({"valid": False, "problems": problems}, out / "validation.json")
        for p in problems:
            log.error("invalid config: %s", p)
        return EXIT_INVALID
    write_json({"valid": True, "problems": []}, out / "validation.json")
    if solver.boundary_mode == "dirichlet_function":
        faces = ~interior_nodes(grid)
        frozen = np.array(u0.values[faces])
        solver = SolverConfig(
            solver.t_end, solver.dt_safety, solver.scheme, solver.snapshot_stride,
            "dirichlet_function", lambda p, t: frozen,
        )
    started = time.perf_counter()
    try:
        traj = evolve(
            FlowState(u0, float(cfg.flow.get("t0", 0.0)), theta0),
            solver,
            {"run_config": cfg.to_dict(), "seed": cfg.initial_data.get("seed")},
        )
    except LagflowError as err:
        partial = getattr(err, "partial", None)
        if partial is not None:
            save_trajectory(partial, out / "trajectory_partial")
        write_json({"stage": "evolve", "error": str(err)}, out / "failures.json")
        return EXIT_STAGE_ERROR
    log.info("evolved %d snapshots in %.1fs", len(traj), time.perf_counter() - started)
    save_trajectory(traj, out / "trajectory")

    reports, probes, failures = [], {}, []
    for spec in cfg.checks:
        name = spec["name"]
        try:
            if name in PROBES:
                probes[name] = _run_probe(spec, traj, grid, out)
                continue
            rep = _run_check(spec, traj, grid)
        except LagflowError as err:
            failures.append({"check": name, "error": str(err)})
            continue
        reports.append(rep)
        expect = spec.get("expect", "pass")
        if rep.status != expect:
            failures.append({"check": name, "status": rep.status, "expected": expect, "margin": rep.worst_margin})
    write_reports(reports, out)
    write_json(failures, out / "failures.json")
    for f in failures:
        log.warning("check failed: %s", f)
    return EXIT_OK if not failures else EXIT_CHECK_FAILED


def full_suite_config() -> dict:
    """The bundled configuration exercising every check on one n = 2 run."""
    from importlib.resources import files

    return json.loads(files("lagflow").joinpath("configs/full_suite.json").read_text())
