
import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lagflow.errors import ConfigurationError, CoverageError, FitError
from lagflow.flow import FlowState, SolverConfig, Trajectory, evolve
from lagflow.grid import BallMask, GridSpec, ScalarField, make_ball_mask
from lagflow.initial_data import convex_seed, random_psd
from lagflow.liouville import (
    RescaleSpec,
    aligned_target_grid,
    growth_ratio,
    growth_threshold,
    quadratic_fit,
    rescale,
)


def static_traj(grid, func, times=(0.0, 0.5, 1.0), theta0=0.0):
    pts = grid.points()
    return Trajectory(grid, theta0, np.array(times), np.stack([func(pts) for _ in times]))


def quad_func(A):
    return lambda p: 0.5 * np.einsum("...i,ij,...j->...", p, A, p)


@pytest.fixture(scope="module")
def seeded_run():
    g = GridSpec(2, 2.0, 33)
    u0 = ScalarField.from_function(g, convex_seed(8, 2))
    return evolve(FlowState(u0), SolverConfig(0.5, snapshot_stride=8))


def test_identity_is_bit_exact(seeded_run):
    out = rescale(seeded_run, RescaleSpec(1.0), seeded_run.grid)
    assert np.array_equal(out.data, seeded_run.data)
    assert np.array_equal(out.times, seeded_run.times)


@pytest.mark.parametrize("lam", [0.5, 1.0, 2.0, 4.0])
def test_quadratic_scaling_invariance(lam):
    g = GridSpec(2, 4.0, 33)
    A = random_psd(1, 2, 2.0)
    traj = static_traj(g, quad_func(A))
    target = aligned_target_grid(g, lam)
    out = rescale(traj, RescaleSpec(lam), target)
    exact = quad_func(A)(target.points())
    assert np.abs(out.data - exact).max() <= 1e-12 * (1 + np.abs(exact).max())


def test_rescale_times_and_provenance(seeded_run):
    out = rescale(seeded_run, RescaleSpec(2.0), aligned_target_grid(seeded_run.grid, 2.0))
    np.testing.assert_allclose(out.times, seeded_run.times / 4)
    assert out.provenance["dt"] == pytest.approx(seeded_run.provenance["dt"] / 4)
    assert out.provenance["lambda"] == 2.0


def test_coverage_errors(seeded_run):
    with pytest.raises(CoverageError) as info:
        rescale(seeded_run, RescaleSpec(2.0), seeded_run.grid)
    assert info.value.node is not None
    with pytest.raises(CoverageError):
        rescale(seeded_run, RescaleSpec(1.0), seeded_run.grid, target_times=[0.0, 0.75])
    with pytest.raises(ConfigurationError):
        RescaleSpec(0.0)


def test_rescale_with_center():
    g = GridSpec(1, 2.0, 33)
    traj = static_traj(g, lambda p: p[..., 0] ** 3)
    target = GridSpec(1, 0.5, 17)
    out = rescale(traj, RescaleSpec(2.0, (0.5,)), target)
    x = target.coords()
    np.testing.assert_allclose(out.data[0], (2 * (x - 0.5)) ** 3 / 4, atol=0.02)


def test_rescale_stays_in_source_range(seeded_run):
    target = GridSpec(2, 0.9, 23)
    out = rescale(seeded_run, RescaleSpec(1.7), target, target_times=[0.0, 0.05, 0.1])
    assert out.data.min() * 1.7**2 >= seeded_run.data.min() - 1e-12
    assert out.data.max() * 1.7**2 <= seeded_run.data.max() + 1e-12


def test_rescale_group_law():
    g = GridSpec(2, 4.0, 65)
    f = lambda p: np.sin(p[..., 0]) * np.cos(0.5 * p[..., 1]) + 0.1 * p[..., 0] ** 2
    traj = static_traj(g, f)
    target = GridSpec(2, 0.9, 19)
    mid = rescale(traj, RescaleSpec(1.5), GridSpec(2, 2.5, 65))
    twice = rescale(mid, RescaleSpec(1.5), target)
    once = rescale(traj, RescaleSpec(2.25), target)
    h = g.spacing
    assert np.abs(twice.data - once.data).max() <= 2 * h**2


def test_growth_threshold_oracle():
    mpmath.mp.dps = 50
    oracle = 1 / (6 * mpmath.sqrt(2) + 2) ** 2
    assert growth_threshold(2) == pytest.approx(float(oracle), rel=1e-15)
    assert growth_threshold(1) == pytest.approx(1 / 64)


def test_growth_ratio_examples():
    g = GridSpec(2, 10.0, 41)
    zero = static_traj(g, lambda p: 0 * p[..., 0])
    rep = growth_ratio(zero, 1.0, make_ball_mask(g, None, 10.0))
    assert np.all(rep.ratios == 0)
    half = static_traj(g, lambda p: 0.5 * np.sum(p**2, -1))
    for radius in (2.0, 5.0, 10.0):
        r = growth_ratio(half, 1.0, make_ball_mask(g, None, radius)).ratios[0]
        assert r < 0.5
        assert r == pytest.approx(0.5 * radius**2 / (radius**2 + 1), rel=1e-12)
    with pytest.raises(ConfigurationError):
        growth_ratio(zero, 0.0, make_ball_mask(g, None, 1.0))
    assert rep.csv_rows()[0][2] == rep.threshold


def test_growth_ratio_scaling_identity(seeded_run):
    lam, R0 = 2.0, 1.0
    target = aligned_target_grid(seeded_run.grid, lam)
    resc = rescale(seeded_run, RescaleSpec(lam), target)
    x2 = target.radius_sq()
    k = len(seeded_run) - 1
    lhs = np.abs(resc.data[k]) / (x2 + R0 / lam**2)
    # target node i maps onto source node i, so the identity holds node by node
    np.testing.assert_allclose(lhs, np.abs(seeded_run.data[k]) / (lam**2 * x2 + R0), rtol=1e-12, atol=1e-15)


def test_quadfit_exact_quadratic():
    g = GridSpec(2, 1.0, 17)
    A = np.array([[1.3, -0.4], [-0.4, 0.7]])
    b = np.array([0.2, -1.1])
    f = ScalarField.from_function(g, lambda p: quad_func(A)(p) + p @ b + 0.3)
    fit = quadratic_fit(f, make_ball_mask(g, None, 1.0))
    assert fit.residual_sup <= 1e-10
    np.testing.assert_allclose(fit.A, A, atol=1e-10)
    np.testing.assert_allclose(fit.linear, b, atol=1e-10)
    assert fit.constant == pytest.approx(0.3, abs=1e-10)
    np.testing.assert_array_equal(fit.A, fit.A.T)


def test_quadfit_linear():
    g = GridSpec(3, 1.0, 7)
    a = np.array([1.0, -2.0, 0.5])
    fit = quadratic_fit(ScalarField.from_function(g, lambda p: p @ a), make_ball_mask(g, None, 1.0))
    np.testing.assert_allclose(fit.A, 0, atol=1e-12)
    np.testing.assert_allclose(fit.linear, a, atol=1e-12)
    assert fit.residual_sup <= 1e-12


def test_quadfit_against_dense_lstsq():
    g = GridSpec(2, 1.0, 9)
    c = np.array([0.3, -0.2])
    f = ScalarField.from_function(
        g, lambda p: quad_func(np.eye(2))(p) + 0.01 * np.sqrt(1 + np.sum((p - c) ** 2, -1))
    )
    mask = make_ball_mask(g, None, 1.0)
    fit = quadratic_fit(f, mask)
    pts = g.points()[mask.members]
    x, y = pts[:, 0], pts[:, 1]
    design = np.column_stack([x * x / 2, x * y, y * y / 2, x, y, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(design, f.values[mask.members], rcond=None)
    oracle = np.abs(design @ coef - f.values[mask.members]).max()
    assert fit.residual_sup == pytest.approx(oracle, rel=0.2)
    assert fit.residual_sup > 0


@given(seed=st.integers(0, 10**6))
def test_quadfit_idempotent(seed):
    g = GridSpec(2, 1.0, 9)
    rng = np.random.default_rng(seed)
    f = ScalarField(g, rng.standard_normal(g.shape))
    mask = make_ball_mask(g, None, 1.0)
    fit = quadratic_fit(f, mask)
    again = quadratic_fit(ScalarField.from_function(g, fit), mask)
    assert again.residual_sup <= 1e-12
    assert fit.residual_sup >= 0


def test_quadfit_errors():
    g = GridSpec(2, 1.0, 9)
    zero = ScalarField(g, np.zeros(g.shape))
    with pytest.raises(FitError):
        quadratic_fit(zero, make_ball_mask(g, None, 0.01))
    # nodes on the x1 axis only: the x2 columns vanish
    line = np.zeros(g.shape, bool)
    line[:, g.origin_index[1]] = True
    with pytest.raises(FitError):
        quadratic_fit(zero, BallMask(g, np.zeros(2), 1.0, line, line))
    # nodes on the diagonal: columns are nonzero but linearly dependent
    diag = np.eye(9, dtype=bool)
    with pytest.raises(FitError):
        quadratic_fit(zero, BallMask(g, np.zeros(2), 1.5, diag, diag))
