import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lagflow.errors import ConfigurationError
from lagflow.grid import (
    GridSpec,
    ScalarField,
    fd_gradient,
    fd_hessian,
    interior_nodes,
    make_ball_mask,
)


def test_gridspec_validation():
    with pytest.raises(ConfigurationError):
        GridSpec(4, 1.0, 9)
    with pytest.raises(ConfigurationError):
        GridSpec(2, 1.0, 8)
    with pytest.raises(ConfigurationError):
        GridSpec(2, 1.0, 3)
    with pytest.raises(ConfigurationError):
        GridSpec(2, -1.0, 9)


def test_coords_symmetric_with_exact_zero():
    g = GridSpec(2, 1.0, 9)
    x = g.coords()
    assert x[4] == 0.0
    assert g.spacing == 0.25
    np.testing.assert_array_equal(x, -x[::-1])
    assert g.points().shape == (9, 9, 2)


def test_roundtrip_dict_and_refine():
    g = GridSpec(3, 2.0, 7)
    assert GridSpec.from_dict(g.to_dict()) == g
    r = g.refine()
    assert r.nodes_per_axis == 13 and r.spacing == g.spacing / 2


def test_scalar_field_rejects_nonfinite_and_is_readonly():
    g = GridSpec(1, 1.0, 5)
    with pytest.raises(ConfigurationError):
        ScalarField(g, [0, 1, np.nan, 2, 3])
    with pytest.raises(ConfigurationError):
        ScalarField(g, np.zeros(4))
    f = ScalarField(g, np.arange(5.0))
    with pytest.raises(ValueError):
        f.values[0] = 1.0


def test_hessian_of_half_norm_is_identity_everywhere():
    g = GridSpec(2, 1.0, 9)
    f = ScalarField.from_function(g, lambda p: 0.5 * np.sum(p**2, axis=-1))
    H = fd_hessian(f)
    np.testing.assert_allclose(H, np.broadcast_to(np.eye(2), H.shape), atol=1e-13)


def test_hessian_of_x1x2():
    g = GridSpec(2, 1.0, 9)
    H = fd_hessian(ScalarField.from_function(g, lambda p: p[..., 0] * p[..., 1]))
    target = np.array([[0.0, 1.0], [1.0, 0.0]])
    np.testing.assert_allclose(H, np.broadcast_to(target, H.shape), atol=1e-13)


def test_hessian_grid_too_small():
    # the 5-node minimum is enforced by GridSpec itself
    with pytest.raises(ConfigurationError):
        GridSpec(2, 1.0, 3)


def _sinsin_error(nodes):
    g = GridSpec(2, 1.0, nodes)
    f = ScalarField.from_function(g, lambda p: np.sin(p[..., 0]) * np.sin(p[..., 1]))
    H = fd_hessian(f)
    p = g.points()
    s0, s1, c0, c1 = np.sin(p[..., 0]), np.sin(p[..., 1]), np.cos(p[..., 0]), np.cos(p[..., 1])
    exact = np.stack([np.stack([-s0 * s1, c0 * c1], -1), np.stack([c0 * c1, -s0 * s1], -1)], -1)
    inner = interior_nodes(g)
    return np.abs(H - exact)[inner].max()


def test_hessian_second_order_convergence():
    errs = [_sinsin_error(n) for n in (17, 33, 65)]
    ratios = [errs[0] / errs[1], errs[1] / errs[2]]
    for r in ratios:
        assert 3.5 <= r <= 4.5, ratios


def test_gradient_second_order_convergence():
    def err(nodes):
        g = GridSpec(2, 1.0, nodes)
        f = ScalarField.from_function(g, lambda p: np.exp(p[..., 0]) * np.cos(p[..., 1]))
        p = g.points()
        ex = np.stack([np.exp(p[..., 0]) * np.cos(p[..., 1]), -np.exp(p[..., 0]) * np.sin(p[..., 1])], -1)
        return np.abs(fd_gradient(f) - ex).max()

    e = [err(n) for n in (17, 33, 65)]
    assert 3.5 <= e[0] / e[1] <= 4.5 and 3.5 <= e[1] / e[2] <= 4.5


coef = st.floats(-3, 3, allow_nan=False)


@given(dim=st.sampled_from([1, 2, 3]), data=st.data())
def test_quadratic_polynomials_are_exact(dim, data):
    A = np.array([[data.draw(coef) for _ in range(dim)] for _ in range(dim)])
    A = A + A.T
    b = np.array([data.draw(coef) for _ in range(dim)])
    c = data.draw(coef)
    g = GridSpec(dim, data.draw(st.floats(0.5, 4.0)), 7)
    f = ScalarField.from_function(g, lambda p: 0.5 * np.einsum("...i,ij,...j->...", p, A, p) + p @ b + c)
    p = g.points()
    scale = 1 + np.abs(A).max() * g.half_width**2 + np.abs(b).max() * g.half_width + abs(c)
    H = fd_hessian(f)
    h = g.spacing
    np.testing.assert_allclose(H, np.broadcast_to(A, H.shape), atol=10 * np.finfo(float).eps * scale / h**2)
    G = fd_gradient(f)
    np.testing.assert_allclose(G, p @ A + b, atol=10 * np.finfo(float).eps * scale / h)


@given(dim=st.sampled_from([1, 2, 3]), seed=st.integers(0, 10**6))
def test_hessian_bitwise_symmetric(dim, seed):
    g = GridSpec(dim, 1.0, 7)
    u = np.random.default_rng(seed).standard_normal(g.shape)
    H = fd_hessian(ScalarField(g, u))
    assert np.array_equal(H, np.swapaxes(H, -1, -2))


def test_mask_all_and_single_node():
    g = GridSpec(2, 1.0, 9)
    assert make_ball_mask(g, None, math.sqrt(2) * 1.0).count == 81
    m = make_ball_mask(g, None, 0.4 * g.spacing)
    assert m.count == 1 and m.members[g.origin_index]


def test_mask_count_brute_force():
    g = GridSpec(2, 1.0, 5)
    xs = [-1.0, -0.5, 0.0, 0.5, 1.0]
    expected = sum(1 for x, y in itertools.product(xs, xs) if x * x + y * y <= 1.0)
    assert expected == 13
    assert make_ball_mask(g, None, 1.0).count == expected


def test_mask_errors():
    g = GridSpec(2, 1.0, 9)
    with pytest.raises(ConfigurationError):
        make_ball_mask(g, None, 0.0)
    with pytest.raises(ConfigurationError):
        make_ball_mask(g, (5.0, 5.0), 0.1)


@given(
    dim=st.sampled_from([1, 2, 3]),
    radius=st.floats(0.2, 2.0),
    cx=st.floats(-0.5, 0.5),
)
def test_mask_consistency(dim, radius, cx):
    g = GridSpec(dim, 1.0, 9)
    m = make_ball_mask(g, (cx,) * dim, radius)
    members = m.members
    assert not (m.boundary & ~members).any()
    padded = np.pad(members, 1, constant_values=False)
    for idx in zip(*np.nonzero(members)):
        neighbours = []
        for ax in range(dim):
            for s in (-1, 1):
                j = list(i + 1 for i in idx)
                j[ax] += s
                neighbours.append(padded[tuple(j)])
        if m.boundary[idx]:
            assert not all(neighbours)
        else:
            assert all(neighbours)
