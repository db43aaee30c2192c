"""Command-line entry point: ``python -m lagflow <command> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import estimates as est
from .errors import LagflowError
from .flow import Trajectory, angle_array, solve_stationary
from .grid import GridSpec, interior_nodes, make_ball_mask
from .initial_data import generate_initial_data
from .liouville import RescaleSpec, growth_ratio, quadratic_fit, rescale
from .persistence import load_trajectory, save_trajectory, write_csv, write_json, write_reports
from .runner import RunConfig, full_suite_config, run

BUNDLED = "full-suite"
STATUS_EXIT = {est.PASS: 0, est.FAIL: 1, est.NOT_APPLICABLE: 2}


def _point(text):
    return tuple(float(v) for v in text.split(",")) if text else ()


def _print(obj):
    print(json.dumps(obj, indent=2, default=float))


def cmd_simulate(args):
    if args.config == BUNDLED:
        cfg = RunConfig.from_dict(full_suite_config())
    else:
        cfg = RunConfig.from_file(args.config)
    if args.out:
        cfg.output_dir = args.out
    return run(cfg)


def cmd_verify(args):
    if args.check == "barrier":
        if args.n is None:
            sys.exit("verify barrier needs --n")
        R = args.R if args.R is not None else 3 * math.sqrt(args.n)
        report = est.barrier_check(est.BarrierSpec(R, args.n), args.samples, args.seed)
    else:
        if not args.traj:
            sys.exit(f"verify {args.check} needs --traj")
        traj = load_trajectory(args.traj)
        n = traj.grid.dim
        if args.check == "jacobi":
            mask = make_ball_mask(traj.grid, None, args.radius)
            report = est.check_jacobi(traj, mask, args.c1, args.c2)
        elif args.check == "height":
            report = est.height_bound_check(traj, args.R if args.R is not None else 3.0)
        elif args.check == "gradient":
            R = args.R if args.R is not None else 3 * math.sqrt(n)
            report = est.gradient_bound_check(traj, R, args.M)
        elif args.check == "hessian":
            alpha = args.alpha if args.alpha is not None else 1.6 * n
            gamma = args.gamma if args.gamma is not None else est.main_gamma(n)
            report = est.hessian_bound_check(traj, est.KorevaarParams(alpha, gamma, args.K))
        else:
            report = est.theta_monotonicity_check(traj)
    _print(report.to_dict())
    if args.out:
        write_reports([report], args.out, stem=f"verify_{args.check}")
    return STATUS_EXIT[report.status]


def cmd_constants(args):
    mc = est.main_constant(args.n)
    out = {"n": args.n, "gamma": mc.gamma, "C_hb": mc.C_hb, "C_paper": mc.C_paper,
           "ratio": mc.C_hb / mc.C_paper, "gamma_below_0.61/n": mc.gamma_below_bound}
    if any(v is not None for v in (args.alpha, args.gamma)):
        params = est.KorevaarParams(
            args.alpha if args.alpha is not None else mc.alpha,
            args.gamma if args.gamma is not None else mc.gamma,
            args.K,
        )
        out["custom"] = {"alpha": params.alpha, "gamma": params.gamma, "K": params.K,
                         "constant": est.hessian_bound_constant(args.n, params)}
    _print(out)
    return 0


def cmd_rescale(args):
    traj = load_trajectory(args.traj)
    src = traj.grid
    target = GridSpec(src.dim, src.half_width / args.lam if args.half_width is None else args.half_width,
                      args.nodes or src.nodes_per_axis)
    out = rescale(traj, RescaleSpec(args.lam, _point(args.x0)), target)
    save_trajectory(out, args.out)
    print(f"wrote {len(out)} snapshots to {args.out}")
    return 0


def cmd_probe(args):
    traj = load_trajectory(args.traj)
    radius = args.radius if args.radius is not None else traj.grid.half_width
    mask = make_ball_mask(traj.grid, None, radius)
    if args.kind == "growth":
        rep = growth_ratio(traj, args.R0, mask)
        _print(rep.to_dict())
        if args.csv:
            write_csv(rep.csv_rows(), ("t", "ratio", "threshold"), args.csv)
    else:
        fit = quadratic_fit(traj.snapshot(args.index), mask)
        _print(fit.to_dict())
    return 0


def cmd_stationary(args):
    """Config keys: ``grid``, ``theta0`` (number or "matched"), ``boundary``
    (initial-data style spec: kind, parameters, seed), ``max_iters``, ``tol``.
    """
    cfg = json.loads(Path(args.config).read_text())
    grid = GridSpec.from_dict(cfg["grid"])
    b = cfg["boundary"]
    data = generate_initial_data(b["kind"], b.get("parameters"), b.get("seed"), grid)
    theta0 = cfg.get("theta0", 0.0)
    if theta0 == "matched":
        theta0 = float(angle_array(data.values, grid.spacing)[grid.origin_index])
    sol = solve_stationary(float(theta0), data, grid, int(cfg.get("max_iters", 50)), float(cfg.get("tol", 1e-10)))
    res = np.abs(angle_array(sol.values, grid.spacing) - theta0)[interior_nodes(grid)].max()
    save_trajectory(Trajectory.from_fields([sol], [0.0], float(theta0), {"stationary_config": cfg}), Path(args.out) / "trajectory")
    summary = {"theta0": float(theta0), "residual": float(res)}
    write_json(summary, Path(args.out) / "stationary.json")
    _print(summary)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lagflow", description="Lagrangian mean curvature flow laboratory")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run a JSON config end to end")
    s.add_argument("--config", required=True, help=f'JSON run config, or "{BUNDLED}" for the bundled suite')
    s.add_argument("--out")
    s.set_defaults(func=cmd_simulate)

    v = sub.add_parser("verify", help="check one estimate on a saved trajectory")
    v.add_argument("check", choices=["jacobi", "height", "gradient", "hessian", "barrier", "monotone"])
    v.add_argument("--traj")
    v.add_argument("--out", help="directory for JSON/CSV report")
    v.add_argument("--R", type=float)
    v.add_argument("--M", type=float, default=2.0)
    v.add_argument("--radius", type=float, default=0.8)
    v.add_argument("--alpha", type=float)
    v.add_argument("--gamma", type=float)
    v.add_argument("--K", type=float, default=1.0)
    v.add_argument("--c1", type=float, default=est.TOL_C1)
    v.add_argument("--c2", type=float, default=est.TOL_C2)
    v.add_argument("--n", type=int)
    v.add_argument("--samples", type=int, default=10**6)
    v.add_argument("--seed", type=int, default=0)
    v.set_defaults(func=cmd_verify)

    c = sub.add_parser("constants", help="print gamma(n), C_hb and C_paper as JSON")
    c.add_argument("--n", type=int, required=True)
    c.add_argument("--alpha", type=float)
    c.add_argument("--gamma", type=float)
    c.add_argument("--K", type=float, default=1.0)
    c.set_defaults(func=cmd_constants)

    r = sub.add_parser("rescale", help="parabolic rescaling of a saved trajectory")
    r.add_argument("--traj", required=True)
    r.add_argument("--lambda", dest="lam", type=float, required=True)
    r.add_argument("--x0", default="", help="comma-separated point")
    r.add_argument("--out", required=True)
    r.add_argument("--nodes", type=int, help="target nodes per axis (default: source)")
    r.add_argument("--half-width", type=float, help="target half width (default: source / lambda)")
    r.set_defaults(func=cmd_rescale)

    pr = sub.add_parser("probe", help="growth ratio or quadratic fit of a saved trajectory")
    pr.add_argument("kind", choices=["growth", "quadfit"])
    pr.add_argument("--traj", required=True)
    pr.add_argument("--R0", type=float, default=1.0)
    pr.add_argument("--radius", type=float)
    pr.add_argument("--index", type=int, default=-1)
    pr.add_argument("--csv")
    pr.set_defaults(func=cmd_probe)

    st = sub.add_parser("stationary", help="Newton solve of the special Lagrangian equation")
    st.add_argument("--config", required=True)
    st.add_argument("--out", required=True)
    st.set_defaults(func=cmd_stationary)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except LagflowError as err:
        print(f"error: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
