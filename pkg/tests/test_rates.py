import math

import numpy as np
import pytest

from experiments.generators import QcqpRecipe, gen_qcqp
from lcpg.drivers import RunConfig, RunMode, lcpg_run
from lcpg.errors import ConfigError
from lcpg.rates import (convex_gap_trace, convex_rate_bound, polynomial_rate_bound,
                        inexact_type2_bounds, level_gap_series, observed_type1_bound,
                        predicted_log_slope, reference_value_by_lcpg, strongly_convex_rate_bound,
                        type1_rate_bound)
from lcpg.schedules import LevelSchedule, strongly_convex_rho


@pytest.fixture(scope="module")
def small_qcqp():
    return gen_qcqp(QcqpRecipe(n=10, m=2, density=0.3, eig_max=5.0, seed=0)).problem


def test_polynomial_bound_values():
    assert polynomial_rate_bound(8, 1.0, 0.0, 0.0, 1.0, 1.0) == pytest.approx(1.6)
    # c = 2: max(8 * 4 * 0.5, 2 * 0.5 + 4) = 16
    assert polynomial_rate_bound(2, 1.0, 1.0, 1.0, 0.5, 4.0) == pytest.approx(8.0)


@pytest.mark.parametrize("K", [1, 10, 250])
def test_general_weights_reduce_to_polynomial_bound(K):
    gap = 5.0
    ks = np.arange(K + 1)
    alphas = ks + 1.0
    gaps = gap / (ks + 1.0)
    general = type1_rate_bound(alphas, 2.0, 3.0, 0.7, 1.5, gaps)
    assert general == pytest.approx(polynomial_rate_bound(K, 2.0, 3.0, 0.7, 1.5, gap))


def test_bound_argument_errors():
    with pytest.raises(ValueError):
        type1_rate_bound([1.0, 2.0], 1.0, 1.0, 1.0, 1.0, [1.0])
    with pytest.raises(ValueError):
        type1_rate_bound([], 1.0, 1.0, 1.0, 1.0, [])
    with pytest.raises(ValueError):
        convex_rate_bound(0, 1.0, 1.0, 1.0, 1.0, 1.0)
    with pytest.raises(ConfigError):
        strongly_convex_rate_bound(10, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0)
    with pytest.raises(ConfigError):
        strongly_convex_rate_bound(10, 1.0, 0.0, 1.0, 1.0, 1.0, 1.0)


def test_strongly_convex_bound_decay():
    # c = 2, head = 1/2: (0.5 * 2 + 0.5 * 4) = 3
    at0 = strongly_convex_rate_bound(0, 2.0, 1.0, 0.0, 0.0, 2.0, 4.0)
    assert at0 == pytest.approx(3.0)
    at10 = strongly_convex_rate_bound(10, 2.0, 1.0, 0.0, 0.0, 2.0, 4.0)
    assert at10 / at0 == pytest.approx(math.exp(-5.0))
    inexact = strongly_convex_rate_bound(10, 2.0, 1.0, 0.0, 0.0, 2.0, 4.0, a=0.5)
    assert inexact > at10


def test_predicted_slopes():
    assert predicted_log_slope(2.0, 1.0, 0.0, 0.0) == pytest.approx(-0.5)
    assert predicted_log_slope(2.0, 1.0, 0.0, 0.0, a=0.5) == pytest.approx(-1.0 / 3.0)
    assert predicted_log_slope(2.0, 1.0, 1.0, 2.0) == pytest.approx(-0.25)


def test_level_gap_series_polynomial(small_qcqp):
    gaps = level_gap_series(small_qcqp, LevelSchedule.polynomial(), 5)
    full = np.linalg.norm(small_qcqp.eta - small_qcqp.eta0)
    np.testing.assert_allclose(gaps, full / np.arange(1, 6))


def test_type2_delta_matches_run_report(small_qcqp):
    result = lcpg_run(small_qcqp, RunConfig(mode=RunMode.INEXACT, K=20))
    bounds = inexact_type2_bounds(small_qcqp, result)
    assert bounds.delta == pytest.approx(result.kkt.distance_bound)
    assert bounds.B_hat == result.max_dual_norm
    assert bounds.eps >= 0 and bounds.delta_tilde >= 0


def test_observed_bound_is_finite(small_qcqp):
    result = lcpg_run(small_qcqp, RunConfig(K=20))
    bound = observed_type1_bound(small_qcqp, result)
    assert np.isfinite(bound) and bound >= 0


def test_gap_trace_argument_errors(small_qcqp):
    with pytest.raises(ConfigError):
        convex_gap_trace(small_qcqp, RunConfig(mode=RunMode.CONVEX, K=5), None)
    with pytest.raises(ConfigError):
        convex_gap_trace(small_qcqp, RunConfig(mode=RunMode.EXACT, K=5), 0.0)


def test_convex_gap_trace(small_qcqp):
    cfg = RunConfig(mode=RunMode.CONVEX, K=60)
    reference = reference_value_by_lcpg(small_qcqp, K=300, config=cfg)
    trace = convex_gap_trace(small_qcqp, cfg, reference)
    assert trace.gaps.size == 61
    assert np.all(trace.gaps >= -1e-9)
    assert trace.gaps[-1] <= trace.gaps[0]
    assert trace.predicted > 0


def sampled_squared_residual(result, K):
    """E ||residual||^2 at the alpha-sampled index among the first K iterations."""
    alphas = np.asarray(result.alphas[:K])
    residuals = np.array([r.kkt_surrogate for r in result.trace[:K]])
    return float(alphas @ residuals ** 2 / alphas.sum())


@pytest.mark.slow
def test_residual_halves_with_twice_the_iterations():
    observed, analytic = [], []
    for seed in range(10):
        problem = gen_qcqp(QcqpRecipe(n=20, m=3, density=0.2, eig_max=10.0, seed=seed)).problem
        result = lcpg_run(problem, RunConfig(K=400))
        objs = [r.obj for r in result.trace] + [result.obj_final]
        D2 = (objs[0] - min(objs)) / problem.L0
        L_norm = float(np.linalg.norm(problem.L))
        gap = float(np.linalg.norm(problem.eta - problem.eta0))
        B200 = max(r.dual_norm for r in result.trace[:200])
        at200 = polynomial_rate_bound(200, problem.L0, L_norm, B200, D2, gap)
        at400 = polynomial_rate_bound(400, problem.L0, L_norm, result.max_dual_norm, D2, gap)
        seen200 = sampled_squared_residual(result, 200)
        seen400 = sampled_squared_residual(result, 400)
        assert seen200 <= at200 and seen400 <= at400
        observed.append(seen400 / seen200)
        analytic.append(at400 / at200)
    # exact runs contract faster than the worst case, so only the upper side binds
    assert float(np.mean(observed)) <= 0.75
    assert 0.35 <= float(np.mean(analytic)) <= 0.75


@pytest.mark.slow
def test_strongly_convex_gap_decays_geometrically():
    problem = gen_qcqp(QcqpRecipe(n=10, m=2, density=0.3, eig_max=5.0, objective_shift=1.0,
                                  seed=0)).problem
    assert problem.mu0 == 1.0
    cfg = RunConfig(mode=RunMode.STRONGLY_CONVEX, K=200)
    reference = reference_value_by_lcpg(problem, K=1000, config=cfg)
    trace = convex_gap_trace(problem, cfg, reference)
    rho = strongly_convex_rho(problem.L0, problem.mu0, cfg.strong_convexity_a)
    assert trace.predicted < 0
    assert trace.slope <= 0.5 * trace.predicted
    # iterates stay feasible for the tighter levels eta^k, so the gap cannot outrun rho^k
    assert trace.slope >= 2.0 * math.log(rho)
