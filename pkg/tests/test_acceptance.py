"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Run with ``pytest tests/test_acceptance.py -v``; the verdict lines appear in
the "acceptance criteria" section of the terminal summary.
"""

import json
import math
import time

import mpmath
import numpy as np
import pytest

from lagflow import estimates as est
from lagflow.errors import ChecksumError, TruncatedFileError
from lagflow.flow import FlowState, SolverConfig, Trajectory, equation_residual, evolve, plan_steps
from lagflow.grid import GridSpec, ScalarField, interior_nodes, make_ball_mask
from lagflow.initial_data import generate_initial_data, random_psd
from lagflow.liouville import RescaleSpec, aligned_target_grid, rescale
from lagflow.persistence import load_trajectory, save_trajectory

mpmath.mp.dps = 50

SEEDS = (1, 2, 3, 4, 5)
N = 2
T_END = 0.5


def run_convex(seed, half_width, nodes, dt_snap, parameters=None):
    g = GridSpec(N, half_width, nodes)
    u0 = generate_initial_data("seeded_convex", parameters, seed, g)
    _, dt = plan_steps(g, 0.0, SolverConfig(T_END))
    stride = max(1, round(dt_snap / dt))
    return evolve(FlowState(u0), SolverConfig(T_END, snapshot_stride=stride), {"seed": seed})


@pytest.fixture(scope="module")
def jacobi_runs():
    return {seed: run_convex(seed, 1.0, 65, 0.02) for seed in SEEDS}


@pytest.fixture(scope="module")
def height_runs():
    # same seeds on a cube large enough to hold B_3
    return {seed: run_convex(seed, 3.2, 65, 0.02) for seed in SEEDS}


@pytest.fixture(scope="module")
def gradient_runs():
    R = 3 * math.sqrt(2)
    params = {"normalize_oscillation": {"M": 2.0, "radius": 2 * R + 1}}
    return {seed: run_convex(seed, 10.0, 65, 0.02, params) for seed in SEEDS}


@pytest.fixture(scope="module")
def hessian_run():
    params = {"d_max": 0.1, "eps": 0.05, "center_range": 0.1}
    return run_convex(3, 2.0, 65, 0.02, params)


def test_criterion_01_stationarity(criterion):
    criterion(1, "stationary quadratics stay fixed to 1e-9")
    g = GridSpec(N, 1.0, 65)
    worst, slowest = 0.0, 0.0
    for seed in (11, 12, 13):
        A = random_psd(seed, N, 2.0)
        theta0 = float(np.sum(np.arctan(np.linalg.eigvalsh(A))))
        u0 = generate_initial_data("quadratic", {"A": A.tolist()}, None, g)
        start = time.perf_counter()
        traj = evolve(FlowState(u0, theta0=theta0), SolverConfig(T_END, snapshot_stride=100))
        slowest = max(slowest, time.perf_counter() - start)
        worst = max(worst, float(np.abs(traj.data - u0.values).max()))
    criterion.detail(f"max change {worst:.2e}, slowest run {slowest:.1f}s")
    assert worst <= 1e-9
    assert slowest < 60


def test_criterion_02_jacobi(criterion, jacobi_runs):
    criterion(2, "Jacobi slack within tol; positive part non-increasing under refinement")
    mask = make_ball_mask(jacobi_runs[1].grid, None, 0.8)
    reports = {seed: est.check_jacobi(traj, mask) for seed, traj in jacobi_runs.items()}
    slacks = {seed: -r.worst_margin for seed, r in reports.items()}
    assert all(r.status == est.PASS for r in reports.values()), slacks
    assert all(slacks[s] <= reports[s].tolerance_used for s in SEEDS)

    # refinement of seed 1 with dt_snap halved alongside h
    start = time.perf_counter()
    positive = [max(0.0, slacks[1])]
    for nodes, dt_snap in ((129, 0.01), (257, 0.005)):
        traj = run_convex(1, 1.0, nodes, dt_snap)
        rep = est.check_jacobi(traj, make_ball_mask(traj.grid, None, 0.8))
        assert rep.status == est.PASS
        positive.append(max(0.0, -rep.worst_margin))
        del traj
    elapsed = time.perf_counter() - start
    criterion.detail(
        "worst slack per seed " + ", ".join(f"{slacks[s]:.2e}" for s in SEEDS)
        + f"; positive part 65/129/257: {positive}; refinement {elapsed:.0f}s"
    )
    assert positive[0] >= positive[1] >= positive[2]
    assert elapsed < 600


def test_criterion_03_barrier(criterion):
    criterion(3, "barrier residual >= -1e-12 on 1e6 samples")
    worst = math.inf
    for n in (1, 2, 3):
        for R in (1.0, 3 * math.sqrt(n), 10.0):
            rep = est.barrier_check(est.BarrierSpec(R, n), samples=10**6, seed=17 * n)
            worst = min(worst, rep.worst_margin)
            assert rep.worst_margin >= -1e-12, (n, R, rep.worst_margin)
    criterion.detail(f"smallest residual {worst:.3e}")


def test_criterion_04_height(criterion, height_runs):
    criterion(4, "height bound on the convex instances and the zero solution")
    margins = []
    for traj in height_runs.values():
        rep = est.height_bound_check(traj, 3.0)
        margins.append(rep.worst_margin)
        assert rep.status == est.PASS
        assert rep.worst_margin >= -rep.tolerance_used
    g = GridSpec(N, 3.2, 65)
    times = np.linspace(0.0, 0.5, 6)
    zero = Trajectory(g, 0.0, times, np.zeros((6,) + g.shape))
    rep = est.height_bound_check(zero, 3.0)
    oracle = mpmath.atan(mpmath.pi / 9)
    err = abs(rep.worst_margin - float(oracle))
    criterion.detail(f"min margin {min(margins):.3f}; zero case error {err:.1e}")
    assert rep.status == est.PASS and err <= 1e-12


def test_criterion_05_gradient(criterion, gradient_runs):
    R = 3 * math.sqrt(2)
    criterion(5, "gradient bound with M = 2, R = 3 sqrt 2")
    bound = (2 + math.atan(math.pi / 18)) / R
    assert est.gradient_bound_value(R, 2.0) == pytest.approx(bound, rel=1e-15)
    worst = []
    for traj in gradient_runs.values():
        rep = est.gradient_bound_check(traj, R, 2.0)
        assert rep.status == est.PASS, rep.hypothesis_log
        worst.append(rep.details["max_grad"])
        assert rep.details["max_grad"] <= bound + rep.tolerance_used
    criterion.detail(f"max |Du| {max(worst):.4f} vs bound {bound:.4f} (no tolerance needed: {max(worst) <= bound})")


def test_criterion_06_constants(criterion):
    criterion(6, "main constants vs 50-digit oracle; gamma < 0.61/n; ratio e^(2n-1)")
    worst = 0.0
    for n in (1, 2, 3):
        mc = est.main_constant(n)
        g = (2 + mpmath.atan(mpmath.pi / (9 * n))) ** 2 / (9 * n)
        a = mpmath.mpf(16) * n / 10
        denom = (mpmath.e ** (1 - a * g) - 1) ** (2 * n)
        c_hb = mpmath.e ** (2 * n) * (2 * a / (2 * a - 3 * n)) ** n / denom
        c_paper = mpmath.e * mpmath.mpf(16) ** n / denom
        errs = [
            abs(mc.gamma / float(g) - 1),
            abs(mc.C_hb / float(c_hb) - 1),
            abs(mc.C_paper / float(c_paper) - 1),
            abs(mc.C_hb / mc.C_paper / float(mpmath.e ** (2 * n - 1)) - 1),
        ]
        worst = max(worst, *errs)
    for n in range(1, 11):
        assert (2 + mpmath.atan(mpmath.pi / (9 * n))) ** 2 / (9 * n) < mpmath.mpf("0.61") / n
        assert est.main_constant(n).gamma_below_bound
    criterion.detail(f"worst relative error {worst:.1e}")
    assert worst < 1e-10


def test_criterion_07_hessian(criterion, hessian_run):
    criterion(7, "Hessian bound at (0, 1/2) below min(C_hb, C_paper)")
    n = 2
    mc = est.main_constant(n)
    params = est.KorevaarParams(mc.alpha, mc.gamma, mc.K)
    rep = est.hessian_bound_check(hessian_run, params)
    assert all(e["holds"] for e in rep.hypothesis_log), rep.hypothesis_log
    assert rep.status == est.PASS
    lam_sq = rep.details["lambda_max_sq"]
    criterion.detail(
        f"lambda_max^2 {lam_sq:.3f}, max|Du|^2 {rep.details['max_grad_sq']:.3f} < gamma {mc.gamma:.3f}, "
        f"C_hb {mc.C_hb:.3e}, C_paper {mc.C_paper:.3e}"
    )
    assert lam_sq <= min(mc.C_hb, mc.C_paper)


def test_criterion_08_monotonicity(criterion, jacobi_runs, height_runs, gradient_runs, hessian_run):
    criterion(8, "u nondecreasing on every convex run with theta0 = 0")
    runs = [*jacobi_runs.values(), *height_runs.values(), *gradient_runs.values(), hessian_run]
    margins = []
    for traj in runs:
        rep = est.theta_monotonicity_check(traj)
        assert rep.status == est.PASS, rep.hypothesis_log
        assert rep.tolerance_used == pytest.approx(10 * np.finfo(float).eps * len(traj))
        margins.append(rep.worst_margin)
    criterion.detail(f"{len(runs)} runs, smallest increment {min(margins):.2e}")


def test_criterion_09_rescaling(criterion, jacobi_runs):
    criterion(9, "rescaled residual <= 2x source + C h^2; lambda = 1 bit-exact")
    src = jacobi_runs[2]
    h = src.grid.spacing

    def residual(traj):
        inside = interior_nodes(traj.grid)
        return max(float(np.abs(equation_residual(traj, k).values[inside]).max()) for k in range(1, len(traj) - 1))

    base = residual(src)
    ident = rescale(src, RescaleSpec(1.0), src.grid)
    assert np.array_equal(ident.data, src.data)
    out = []
    for lam in (1.0, 2.0, 4.0):
        target = aligned_target_grid(src.grid, lam)
        r = residual(rescale(src, RescaleSpec(lam), target))
        out.append(r)
        assert r <= 2 * base + h**2
    criterion.detail(f"source {base:.2e}; rescaled " + ", ".join(f"{r:.2e}" for r in out))


def test_criterion_10_solver_order(criterion):
    criterion(10, "1D self-convergence order >= 1.9 at t = 0.5")
    start = time.perf_counter()

    def final(nodes):
        g = GridSpec(1, 1.0, nodes)
        u0 = ScalarField.from_function(g, lambda p: 0.5 * np.sin(math.pi * p[..., 0]))
        steps, _ = plan_steps(g, 0.0, SolverConfig(0.5))
        cfg = SolverConfig(0.5, snapshot_stride=steps, boundary_mode="dirichlet_function",
                           boundary_function=lambda p, t: np.zeros(len(p)))
        return evolve(FlowState(u0), cfg).data[-1]

    a, b, c = final(65), final(129), final(257)
    d1 = np.abs(b[::2] - a).max()
    d2 = np.abs(c[::4] - b[::2]).max()
    order = math.log2(d1 / d2)
    elapsed = time.perf_counter() - start
    criterion.detail(f"order {order:.3f}, {elapsed:.1f}s")
    assert order >= 1.9 and elapsed < 60


def test_criterion_11_persistence(criterion, tmp_path, jacobi_runs):
    criterion(11, "bit-exact round trip; checksum and truncation errors")
    traj = jacobi_runs[3]
    save_trajectory(traj, tmp_path / "ok")
    back = load_trajectory(tmp_path / "ok")
    assert np.array_equal(back.data, traj.data) and np.array_equal(back.times, traj.times)

    save_trajectory(traj, tmp_path / "sum")
    manifest = json.loads((tmp_path / "sum" / "manifest.json").read_text())
    manifest["checksums"][0] = "f" * 64
    (tmp_path / "sum" / "manifest.json").write_text(json.dumps(manifest))
    with pytest.raises(ChecksumError):
        load_trajectory(tmp_path / "sum")

    save_trajectory(traj, tmp_path / "cut")
    f = tmp_path / "cut" / "snap_00001.f64"
    f.write_bytes(f.read_bytes()[:-8])
    with pytest.raises(TruncatedFileError) as info:
        load_trajectory(tmp_path / "cut")
    assert info.value.filename == "snap_00001.f64"
    criterion.detail(f"{len(traj)} snapshots")
