"""Post-hoc rate bounds, instantiated with the observed dual norm B_hat.

None of these quantities feed back into the algorithm; B is never known in
advance, so every bound here is labelled with the B_hat it was computed from.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .drivers import RunConfig, RunMode, RunResult, lcpg_run
from .errors import ConfigError
from .problem import ConstrainedProblem
from .schedules import LevelSchedule, schedule_levels

logger = logging.getLogger(__name__)


def polynomial_rate_bound(K: int, L0: float, L_norm: float, B_hat: float, D2: float,
                         level_gap: float) -> float:
    """Residual bound for alpha_k = k+1 and the polynomial schedule."""
    c = L0 + B_hat * L_norm
    return 2.0 / (K + 2) * max(8.0 * c * c * D2, 2.0 * B_hat * L_norm * D2 + B_hat * level_gap)


def type1_rate_bound(alphas, L0: float, L_norm: float, B_hat: float, D2: float, level_gaps) -> float:
    """General-weight form: alphas and ||eta - eta^k|| for k = 0..K."""
    alphas = np.asarray(alphas, dtype=float)
    level_gaps = np.asarray(level_gaps, dtype=float)
    if alphas.shape != level_gaps.shape or alphas.size == 0:
        raise ValueError("alphas and level gaps must be nonempty and aligned")
    c = L0 + B_hat * L_norm
    a_K = float(alphas[-1])
    stationarity = 8.0 * c * c * D2 * a_K
    slackness = 2.0 * B_hat * L_norm * D2 * a_K + B_hat * float(alphas @ level_gaps)
    return max(stationarity, slackness) / float(alphas.sum())


def _level_gaps(problem: ConstrainedProblem, result: RunResult) -> np.ndarray:
    if problem.m == 0:
        return np.zeros(len(result.trace))
    return np.array([float(np.linalg.norm(problem.eta - r.eta_k)) for r in result.trace])


def observed_type1_bound(problem: ConstrainedProblem, result: RunResult,
                         psi0_star: Optional[float] = None) -> float:
    """type1_rate_bound with B_hat = max dual norm and D^2 from the run.

    Without ``psi0_star`` the smallest objective seen along the run stands in
    for the optimal value.
    """
    objs = [r.obj for r in result.trace] + [result.obj_final]
    floor = min(objs) if psi0_star is None else psi0_star
    D2 = max(objs[0] - floor, 0.0) / problem.L0
    return type1_rate_bound(result.alphas, problem.L0, float(np.linalg.norm(problem.L)),
                            result.max_dual_norm, D2, _level_gaps(problem, result))


@dataclass(frozen=True)
class Type2Bounds:
    eps: float
    delta: float
    delta_tilde: float
    B_hat: float


def inexact_type2_bounds(problem: ConstrainedProblem, result: RunResult,
                         B_hat: Optional[float] = None) -> Type2Bounds:
    B = result.max_dual_norm if B_hat is None else B_hat
    L0 = problem.L0
    L_norm = float(np.linalg.norm(problem.L))
    alphas = np.asarray(result.alphas, dtype=float)
    objs = [r.obj for r in result.trace] + [result.obj_final]
    drops = np.array([objs[k] - objs[k + 1] + r.eps_k for k, r in enumerate(result.trace)])
    delta_tilde = float(alphas @ drops)
    total = float(alphas.sum())
    c = L0 + B * L_norm
    gaps = _level_gaps(problem, result)
    eps = max(8.0 * c * c * delta_tilde / L0,
              B * float(alphas @ gaps) + 2.0 * B * L_norm * delta_tilde / L0) / total
    return Type2Bounds(eps=eps, delta=2.0 * delta_tilde / (L0 * total),
                       delta_tilde=delta_tilde, B_hat=B)


def convex_rate_bound(K: int, L0: float, L_norm: float, B_hat: float, D_tilde: float,
                      level_gap: float) -> float:
    if K < 1:
        raise ValueError("K must be at least 1")
    g = level_gap / L0
    bracket = (D_tilde ** 2 + (4.0 * B_hat + 2.0) * g + D_tilde * math.sqrt(g)
               + g * math.log(K) / K)
    return (L0 + B_hat * L_norm) / (K + 1) * bracket


def strongly_convex_rate_bound(K: int, L0: float, mu0: float, L_norm: float, B_hat: float,
                               level_gap: float, dist0_sq: float,
                               a: Optional[float] = None) -> float:
    """Gap bound at x^K; ``a=None`` is the exact-subproblem form."""
    if not 0 < mu0 < L0:
        raise ConfigError("need 0 < mu0 < L0")
    c = L0 + B_hat * L_norm
    head = (4.0 * B_hat + 1.0) / (2.0 * (L0 - mu0))
    if a is None:
        return math.exp(-mu0 * K / c) * (c - mu0) * (head * level_gap + 0.5 * dist0_sq)
    rho = (L0 - mu0) / (2.0 * (L0 - a * mu0))
    head += (c + 2.0 * a * mu0) / (mu0 * (L0 - mu0)) * (1.0 - rho)
    return (math.exp(-(1.0 - a) * mu0 * K / (c - a * mu0)) * (c - mu0)
            * (head * level_gap + 0.5 * dist0_sq))


def predicted_log_slope(L0: float, mu0: float, L_norm: float, B_hat: float,
                        a: Optional[float] = None) -> float:
    c = L0 + B_hat * L_norm
    if a is None:
        return -mu0 / c
    return -(1.0 - a) * mu0 / (c - a * mu0)


@dataclass(frozen=True)
class GapTrace:
    gaps: np.ndarray
    slope: float
    predicted: float
    B_hat: float
    result: RunResult


def convex_gap_trace(problem: ConstrainedProblem, config: RunConfig,
                     reference_value: Optional[float], result: Optional[RunResult] = None) -> GapTrace:
    """Optimality gaps along a convex or strongly convex run, with a rate fit.

    Convex runs report the least-squares slope of (k+1) * gap against k, which
    stays bounded at an O(1/k) rate; ``predicted`` is then the bound at K.
    Strongly convex runs report the slope of log(gap) against k next to the
    predicted exponent.
    """
    if reference_value is None:
        raise ConfigError("a reference optimal value is required")
    if config.mode not in (RunMode.CONVEX, RunMode.STRONGLY_CONVEX):
        raise ConfigError(f"gap traces need a convex mode, got {config.mode.value}")
    if result is None:
        result = lcpg_run(problem, config)
    objs = np.array([r.obj for r in result.trace] + [result.obj_final])
    gaps = objs - reference_value
    ks = np.arange(gaps.size, dtype=float)
    B_hat = result.max_dual_norm
    L_norm = float(np.linalg.norm(problem.L))
    level_gap = float(np.linalg.norm(problem.eta - problem.eta0)) if problem.m else 0.0

    if config.mode is RunMode.CONVEX:
        slope = float(np.polyfit(ks, gaps * (ks + 1.0), 1)[0])
        D_tilde = float(np.linalg.norm(problem.x0 - result.x_final))
        predicted = convex_rate_bound(max(config.K, 1), problem.L0, L_norm, B_hat, D_tilde, level_gap)
    else:
        floor = 1e-13 * (1.0 + abs(reference_value))
        usable = gaps > floor
        if usable.sum() < 2:
            raise ConfigError("too few positive gaps to fit a geometric rate")
        slope = float(np.polyfit(ks[usable], np.log(gaps[usable]), 1)[0])
        a = None if config.exact_subproblems else config.strong_convexity_a
        predicted = predicted_log_slope(problem.L0, problem.mu0, L_norm, B_hat, a)
    logger.info("gap trace (%s): slope=%.4e predicted=%.4e B_hat=%.3e",
                config.mode.value, slope, predicted, B_hat)
    return GapTrace(gaps=gaps, slope=slope, predicted=predicted, B_hat=B_hat, result=result)


def reference_value_by_lcpg(problem: ConstrainedProblem, K: int = 2000,
                            config: Optional[RunConfig] = None) -> float:
    """Long-horizon run used as the optimal-value reference.

    Keeps the mode and schedule of ``config`` (exact mode when omitted), so a
    geometric run is referenced against a longer geometric run.
    """
    base = config or RunConfig()
    run = lcpg_run(problem, base.replace(K=K, check_invariants=False, log_every=0))
    return min([r.obj for r in run.trace] + [run.obj_final])


def level_gap_series(problem: ConstrainedProblem, schedule: LevelSchedule, K: int) -> np.ndarray:
    """||eta - eta^k|| for k = 0..K-1."""
    return np.array([float(np.linalg.norm(problem.eta - schedule_levels(schedule, problem.eta0,
                                                                        problem.eta, k)))
                     for k in range(K)])
