import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from lcpg.errors import UnsupportedTermError
from lcpg.prox import (L1, BallIndicator, ScadParams, Zero, combine, dist_to_interval,
                       is_separable, kkt_residual_exact, l1_total_weight, prox, scad_grad,
                       scad_penalty_grad, scad_penalty_value, scad_value, soft_threshold,
                       subdiff_bounds, subdiff_interval, term_value)
from lcpg.problem import constraint_subgradient_distance

finite = st.floats(min_value=-50, max_value=50, allow_nan=False)
vectors = arrays(float, st.integers(1, 6), elements=finite)


def test_soft_threshold_example():
    np.testing.assert_array_equal(soft_threshold([3.0, -0.5, 1.0], 1.0), [2.0, 0.0, 0.0])


def test_prox_of_l1_and_ball():
    np.testing.assert_allclose(prox(L1(2.0), [3.0, -1.0], 2.0), [2.0, 0.0])
    np.testing.assert_allclose(prox(BallIndicator(1.0), [3.0, 4.0], 1.0), [0.6, 0.8])
    both = combine([(1.0, L1(1.0)), (1.0, BallIndicator(1.0))])
    np.testing.assert_allclose(prox(both, [3.0, 0.0], 1.0), [1.0, 0.0])


def test_prox_rejects_terms_without_closed_form():
    two_balls = combine([(1.0, BallIndicator(1.0)), (1.0, BallIndicator(2.0))])
    with pytest.raises(UnsupportedTermError):
        prox(two_balls, [1.0, 1.0], 1.0)
    shifted = combine([(1.0, L1(1.0)), (1.0, BallIndicator(1.0, center=[1.0, 0.0]))])
    with pytest.raises(UnsupportedTermError):
        prox(shifted, [1.0, 1.0], 1.0)
    with pytest.raises(ValueError):
        prox(Zero(), [1.0], 0.0)


def test_term_values_and_weights():
    term = combine([(2.0, L1(1.5)), (0.0, L1(4.0)), (1.0, Zero())])
    assert l1_total_weight(term) == 3.0
    assert term_value(term, [1.0, -2.0]) == pytest.approx(9.0)
    assert term_value(BallIndicator(1.0), [2.0, 0.0]) == math.inf
    assert term_value(BallIndicator(1.0), [0.6, 0.8]) == 0.0
    assert is_separable(term) and not is_separable(BallIndicator(1.0))
    with pytest.raises(UnsupportedTermError):
        l1_total_weight(BallIndicator(1.0))


def test_subdiff_interval_of_l1_at_zero():
    assert subdiff_interval(L1(1.0), np.array([5.0, 0.0]), 1) == (-1.0, 1.0)
    assert subdiff_interval(L1(1.0), np.array([5.0, 0.0]), 0) == (1.0, 1.0)
    np.testing.assert_array_equal(dist_to_interval(np.array([2.0, 0.5]), -1.0, 1.0), [1.0, 0.0])


@given(center=vectors, weight=st.floats(0.01, 10), gamma=st.floats(0.1, 10))
def test_l1_prox_satisfies_optimality(center, weight, gamma):
    p = prox(L1(weight), center, gamma)
    lo, hi = subdiff_bounds(L1(weight), p)
    residual = dist_to_interval(gamma * (p - center), lo, hi)
    assert np.max(residual) <= 1e-9 * (1.0 + np.max(np.abs(center)))


@given(center=vectors, z=vectors, weight=st.floats(0.01, 5), gamma=st.floats(0.1, 10))
def test_prox_three_point_inequality(center, z, weight, gamma):
    if z.size != center.size:
        z = np.resize(z, center.size)
    term = combine([(1.0, L1(weight)), (1.0, BallIndicator(3.0))])
    z = prox(BallIndicator(3.0), z, 1.0)
    p = prox(term, center, gamma)
    lhs = term_value(term, z) + 0.5 * gamma * float((z - center) @ (z - center))
    rhs = term_value(term, p) + 0.5 * gamma * float((p - center) @ (p - center)) \
        + 0.5 * gamma * float((z - p) @ (z - p))
    assert lhs >= rhs - 1e-7 * (1.0 + abs(lhs))


@given(u=st.floats(-30, 30), v=st.floats(-30, 30))
def test_scad_gradient_is_lipschitz(u, v):
    p = ScadParams(2.0, 5.0)
    assert abs(scad_grad(u, p) - scad_grad(v, p)) <= abs(u - v) * p.smoothness + 1e-12


def test_scad_is_continuous_at_breakpoints():
    p = ScadParams(2.0, 5.0)
    for knot in (p.beta, p.beta * p.theta, -p.beta * p.theta):
        for fn in (scad_value, scad_grad):
            assert fn(knot - 1e-9, p) == pytest.approx(fn(knot + 1e-9, p), abs=1e-7)
    assert scad_value(100.0, p) == pytest.approx(p.beta * 100.0 - (p.theta + 1) * p.beta ** 2 / 2)
    with pytest.raises(ValueError):
        ScadParams(1.0, 1.0)


def test_scad_example_values(scad_example):
    constraint = scad_example.constraints[0]
    assert constraint.value(np.array([5.0, 0.0])) == pytest.approx(3.0, abs=1e-12)
    assert constraint.value(np.array([3.0, 0.0])) == pytest.approx(2.5, abs=1e-12)
    assert scad_example.eta[0] == 3.0


def test_mfcq_margin_of_scad_example(scad_example):
    assert constraint_subgradient_distance(scad_example, np.array([3.0, 0.0]), 0) == pytest.approx(0.5)
    assert constraint_subgradient_distance(scad_example, np.array([5.0, 0.0]), 0) == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("lam", np.linspace(0.0, 100.0, 21))
def test_kkt_residual_cannot_vanish_at_degenerate_point(scad_example, lam):
    assert kkt_residual_exact(scad_example, np.array([5.0, 0.0]), [lam]) >= 1.0 - 1e-12


def test_scad_penalty_sums_coordinates():
    p = ScadParams(1.0, 5.0)
    # inner, quadratic and linear pieces
    assert scad_penalty_value([0.5, -3.0, 10.0], p) == pytest.approx(0.0 + 0.5 + 7.0)
    np.testing.assert_allclose(scad_penalty_grad([0.5, -3.0, 10.0], p), [0.0, -0.5, 1.0])
