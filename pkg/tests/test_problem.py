import numpy as np
import pytest
import scipy.sparse as sp

from lcpg.errors import DimensionError, InfeasibleStartError
from lcpg.problem import (Composite, ConstrainedProblem, check_lipschitz, evaluate_constraints,
                          evaluate_objective, finite_sum_oracle, quadratic_oracle,
                          squared_distance_oracle, strong_feasibility_check,
                          scaled_tolerance, strong_feasibility_dual_bound,
                          validate_strict_feasibility, within_levels, zero_oracle)
from lcpg.prox import L1


def ball_problem(eta0=-1.0, x0=(0.0, 0.0)):
    objective = Composite(quadratic_oracle(np.eye(2), np.array([1.0, -1.0])), prox=L1(0.5), lipschitz=1.0)
    ball = Composite(squared_distance_oracle(1.0, np.zeros(2), 2.0), lipschitz=1.0)
    return ConstrainedProblem(objective, (ball,), eta=[0.0], eta0=[eta0], x0=np.asarray(x0))


def test_evaluates_composite_values():
    problem = ball_problem()
    x = np.array([1.0, 2.0])
    assert evaluate_objective(problem, x) == pytest.approx(0.5 * 5 + 1 - 2 + 0.5 * 3)
    np.testing.assert_allclose(evaluate_constraints(problem, x), [0.5])
    assert problem.m == 1 and problem.d == 2 and problem.L0 == 1.0
    with pytest.raises(DimensionError):
        evaluate_objective(problem, np.zeros(3))


def test_rejects_start_that_is_not_strictly_feasible():
    with pytest.raises(InfeasibleStartError) as info:
        ball_problem(eta0=-3.0)
    assert info.value.worst_violation == pytest.approx(-1.0)
    with pytest.raises(InfeasibleStartError):
        ball_problem(eta0=0.0)


def test_feasibility_report_lists_margins():
    problem = ball_problem(x0=(1.0, 0.0))
    report = validate_strict_feasibility(problem)
    assert report.passed
    np.testing.assert_allclose(report.margins, [0.5])
    np.testing.assert_allclose(report.level_gaps, [1.0])


def test_level_length_must_match_constraints():
    objective = Composite(zero_oracle(2))
    with pytest.raises(DimensionError):
        ConstrainedProblem(objective, (), eta=[0.0], eta0=[-1.0], x0=np.zeros(2))


def test_quadratic_oracle_accepts_sparse_matrices():
    Q = sp.csr_matrix(np.array([[2.0, 1.0], [1.0, 3.0]]))
    value, grad = quadratic_oracle(Q, np.array([1.0, 0.0]), c=-10.0).eval(np.array([1.0, 1.0]))
    assert value == pytest.approx(3.5 + 1.0 - 10.0)
    np.testing.assert_allclose(grad, [4.0, 4.0])


def test_lipschitz_check_on_quadratic():
    Q = np.diag([1.0, 4.0, 2.0])
    oracle = quadratic_oracle(Q)
    assert check_lipschitz(oracle, 4.0).passed
    assert not check_lipschitz(oracle, 1.0).passed


def test_finite_sum_oracle_means_components():
    centers = np.array([[0.0, 1.0], [2.0, -1.0], [4.0, 3.0]])

    def component(i, x):
        diff = x - centers[i]
        return 0.5 * float(diff @ diff), diff

    oracle = finite_sum_oracle(component, n=3, d=2)
    x = np.array([1.0, 1.0])
    np.testing.assert_allclose(oracle.grad(x), x - centers.mean(axis=0))
    np.testing.assert_allclose(oracle.batch_gradient([2, 2], x), x - centers[2])
    assert oracle.is_finite_sum


def test_strong_feasibility_diagnostics():
    problem = ball_problem()
    report = strong_feasibility_check(problem, np.zeros(2), diameter=0.5)
    np.testing.assert_allclose(report.margins, [-1.0 - 0.5 + 2.0])
    assert report.passed
    bound = strong_feasibility_dual_bound(problem, np.zeros(2), psi0_star=-1.0, diameter=1.0)
    assert bound == pytest.approx((0.0 + 1.0 + 1.0) / 1.0)


def test_level_tolerance_at_two_scales():
    assert scaled_tolerance(1e-9, 0.0) == pytest.approx(1e-9)
    assert scaled_tolerance(1e-9, -1e6) == pytest.approx(1e-9 * (1.0 + 1e6))
    np.testing.assert_allclose(scaled_tolerance(1e-9, [1e6, 0.0]), [1e-9 * (1.0 + 1e6), 1e-9])
    # small scale: the absolute 1e-9 slack
    assert within_levels([5e-10], [0.0], 1e-9)
    assert not within_levels([2e-9], [0.0], 1e-9)
    # large scale: relative slack
    assert within_levels([1e6 + 5e-4], [1e6], 1e-9)
    assert not within_levels([1e6 + 1e-2], [1e6], 1e-9)
    # a large constraint does not loosen a small one
    assert not within_levels([1e6, 2e-9], [1e6, 0.0], 1e-9)
