"""Outer loops of the level-constrained proximal gradient family.

One driver covers the deterministic method, its inexact variant, the
stochastic and variance-reduced variants and the convex / strongly convex
modes; they differ only in how G^k, the level schedule and the subproblem
tolerance eps_k are chosen.
"""

from __future__ import annotations

import dataclasses
import enum
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional

import numpy as np

from .errors import (ConfigError, InvariantViolationError, LcpgError, RunAbortedError,
                     UncertifiedSolutionError)
from .estimators import (SvrgState, full_gradient, lcspg_gradient, lcsvrg_gradient,
                         svrg_lipschitz_margin)
from .ipm import refine_active_set, solve_path_following
from .primal_dual import PdStatus, dual_bound_Bk, pd_solve
from .problem import (ConstrainedProblem, evaluate_constraints, evaluate_objective, scaled_tolerance,
                      within_levels)
from .prox import is_separable, kkt_residual_exact, prox
from .schedules import (AlphaRule, LevelSchedule, alpha_weights, level_increment, make_rng,
                        sample_output_index, schedule_levels, strongly_convex_rho)
from .subproblem import MajorizedSubproblem, build_subproblem, solve_majorized_scad

logger = logging.getLogger(__name__)


class RunMode(str, enum.Enum):
    EXACT = "exact"
    INEXACT = "inexact"
    STOCHASTIC = "stochastic"
    SVRG = "svrg"
    CONVEX = "convex"
    STRONGLY_CONVEX = "strongly_convex"


class Subsolver(str, enum.Enum):
    IPM = "ipm"
    FIRSTORDER = "pd"
    SCAD = "scad"

    @classmethod
    def _missing_(cls, value):
        aliases = {"firstorder": cls.FIRSTORDER, "scad_special": cls.SCAD}
        return aliases.get(str(value).lower())


# RunConfig field -> Config attribute supplying its default
_CONFIG_DEFAULTS = {
    "K": "DEFAULT_K",
    "seed": "DEFAULT_SEED",
    "dual_radius": "DUAL_RADIUS",
    "eps_scale": "INEXACT_EPS_SCALE",
    "feas_tol": "FEAS_TOL",
    "ipm_kappa": "IPM_KAPPA",
    "ipm_gamma": "IPM_GAMMA",
    "ipm_tau0": "IPM_TAU0",
    "ipm_radius": "IPM_RADIUS",
    "ipm_max_newton": "IPM_MAX_NEWTON",
    "ipm_exact_eps": "IPM_EXACT_EPS",
    "pd_max_iter": "PD_MAX_ITER",
    "dual_residual_tol": "DUAL_RESIDUAL_TOL",
}


@dataclass(frozen=True)
class RunConfig:
    mode: RunMode = RunMode.EXACT
    K: int = 100
    seed: int = 0
    subsolver: Subsolver = Subsolver.IPM
    alpha_rule: Optional[AlphaRule] = None
    gamma: Optional[float] = None
    beta: Optional[float] = None
    batch_size: Optional[int] = None
    epoch_length: Optional[int] = None
    eps_scale: float = 0.5
    strong_convexity_a: float = 0.5
    exact_subproblems: bool = True
    schedule: Optional[LevelSchedule] = None
    psi0_lower_bound: Optional[float] = None
    dual_radius: float = 1e4
    ipm_kappa: float = 0.25
    ipm_gamma: float = 0.25
    ipm_tau0: float = 1.0
    ipm_radius: float = 10.0
    ipm_max_newton: int = 200
    ipm_exact_eps: float = 1e-9
    pd_max_iter: int = 20000
    dual_residual_tol: float = 1e-6
    feas_tol: float = 1e-9
    check_invariants: bool = True
    record_time: bool = False
    log_every: int = 0

    def __post_init__(self):
        try:
            object.__setattr__(self, "mode", RunMode(self.mode))
            object.__setattr__(self, "subsolver", Subsolver(self.subsolver))
            if self.alpha_rule is not None:
                object.__setattr__(self, "alpha_rule", AlphaRule(self.alpha_rule))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if isinstance(self.schedule, Mapping):
            object.__setattr__(self, "schedule", LevelSchedule(**self.schedule))
        if self.K < 1:
            raise ConfigError(f"K must be at least 1, got {self.K}")
        if not 0 < self.eps_scale < 1:
            raise ConfigError("eps_scale must lie in (0, 1)")
        if not 0 < self.strong_convexity_a < 1:
            raise ConfigError("strong_convexity_a must lie in (0, 1)")

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], defaults: Any = None) -> "RunConfig":
        """Build from lower_snake_case keys; omitted keys come from ``defaults`` (a Config)."""
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - names)
        if unknown:
            raise ConfigError(f"unknown run config keys: {', '.join(unknown)}")
        values = {}
        if defaults is not None:
            for name, attr in _CONFIG_DEFAULTS.items():
                if hasattr(defaults, attr):
                    values[name] = getattr(defaults, attr)
        values.update(data)
        return cls(**values)

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)


class KktType(str, enum.Enum):
    I = "I"
    II = "II"
    III = "III"


@dataclass(frozen=True)
class KktReport:
    kind: KktType
    khat: int
    stationarity: float
    exact: bool
    complementarity: float
    feasibility: float
    distance_bound: Optional[float] = None


TRACE_FIELDS = ("k", "obj", "feas_margin_min", "step_norm", "kkt_surrogate", "kkt_exact",
                "dual_norm", "eps_k", "grad_evals_full", "grad_evals_stoch",
                "subsolver_iters", "time_ms")


@dataclass(frozen=True, eq=False)
class IterateRecord:
    k: int
    x: np.ndarray
    obj: float
    psi: np.ndarray
    eta_k: np.ndarray
    step_norm: float
    lam: np.ndarray
    subsolver_iters: int
    grad_evals_full: int
    grad_evals_stoch: int
    eps_k: float
    kkt_surrogate: float
    kkt_exact: Optional[float]
    time_ms: Optional[float] = None

    @property
    def dual_norm(self) -> float:
        return float(np.linalg.norm(self.lam))

    @property
    def feas_margin_min(self) -> Optional[float]:
        if self.psi.size == 0:
            return None
        return float(np.min(self.eta_k - self.psi))

    def as_row(self) -> Dict[str, Any]:
        return {
            "k": self.k, "obj": self.obj, "feas_margin_min": self.feas_margin_min,
            "step_norm": self.step_norm, "kkt_surrogate": self.kkt_surrogate,
            "kkt_exact": self.kkt_exact, "dual_norm": self.dual_norm, "eps_k": self.eps_k,
            "grad_evals_full": self.grad_evals_full, "grad_evals_stoch": self.grad_evals_stoch,
            "subsolver_iters": self.subsolver_iters, "time_ms": self.time_ms,
        }


@dataclass
class RunResult:
    trace: List[IterateRecord]
    x_final: np.ndarray
    obj_final: float
    psi_final: np.ndarray
    config: RunConfig
    khat: Optional[int] = None
    kkt: Optional[KktReport] = None
    alphas: List[float] = field(default_factory=list)
    status: str = "ok"
    message: str = ""

    @property
    def max_dual_norm(self) -> float:
        return max((r.dual_norm for r in self.trace), default=0.0)

    @property
    def final_dual_norm(self) -> float:
        return self.trace[-1].dual_norm if self.trace else 0.0

    @property
    def grad_evals_full(self) -> int:
        return self.trace[-1].grad_evals_full if self.trace else 0

    @property
    def grad_evals_stoch(self) -> int:
        return self.trace[-1].grad_evals_stoch if self.trace else 0

    def effective_passes(self, n: int) -> float:
        return self.grad_evals_stoch / n if n else float(self.grad_evals_full)

    def rows(self) -> List[Dict[str, Any]]:
        return [r.as_row() for r in self.trace]


def kkt_residual_surrogate(L0_or_gamma: float, L, lam, step_norm: float) -> float:
    """2 (L0 + <lam, L>) ||x^{k+1} - x^k||: bound on dist(0, d_x Lagrangian)."""
    lam = np.asarray(lam, dtype=float)
    if np.any(lam < 0) or step_norm < 0:
        raise ValueError("multipliers and step norm must be nonnegative")
    return 2.0 * (L0_or_gamma + float(lam @ np.asarray(L, dtype=float))) * step_norm


def kkt_residual_surrogate_stochastic(gamma_k: float, L0: float, L, lam, step_norm: float) -> float:
    """Observable part 2 (gamma_k + L0 + 2<lam, L>)^2 ||step||^2 of the squared stochastic bound."""
    lam = np.asarray(lam, dtype=float)
    return 2.0 * (gamma_k + L0 + 2.0 * float(lam @ np.asarray(L, dtype=float))) ** 2 * step_norm ** 2


def default_schedule(problem: ConstrainedProblem, config: RunConfig) -> LevelSchedule:
    if config.schedule is not None:
        return config.schedule
    if config.mode is RunMode.STRONGLY_CONVEX:
        return LevelSchedule.geometric(
            strongly_convex_rho(problem.L0, problem.mu0, config.strong_convexity_a))
    return LevelSchedule.polynomial()


def _check_config(problem: ConstrainedProblem, config: RunConfig):
    """Resolve mode-dependent parameters; returns (gamma, alpha_rule, batch, T)."""
    mode = config.mode
    L0 = problem.L0
    gamma = config.gamma if config.gamma is not None else L0
    if not gamma > 0:
        raise ConfigError("gamma must be positive")
    rule = config.alpha_rule or (AlphaRule.EPOCH_FLOOR if mode is RunMode.SVRG else AlphaRule.K_PLUS_1)
    batch, T = None, 1
    if config.subsolver is Subsolver.SCAD and (problem.m != 1 or not problem.constraints[0].concave):
        raise ConfigError("scad subsolver needs exactly one concave (SCAD) constraint")
    if mode in (RunMode.STOCHASTIC, RunMode.SVRG):
        oracle = problem.objective.smooth
        if not oracle.is_finite_sum:
            raise ConfigError(f"{mode.value} mode needs a finite-sum objective")
        beta = config.beta if config.beta is not None else L0 / 2.0
        if not 2.0 * gamma - beta - L0 > 0:
            raise ConfigError("need 2 gamma - beta - L0 > 0")
        if mode is RunMode.STOCHASTIC:
            batch = config.batch_size or config.K + 1
        else:
            T = config.epoch_length or math.ceil(math.sqrt(oracle.n_components))
            batch = config.batch_size or 8 * T
            if batch < 2 * T:
                raise ConfigError(f"svrg batch {batch} must be at least 2T = {2 * T}")
            if not svrg_lipschitz_margin(L0, gamma, beta, T, batch) > 0:
                raise ConfigError("svrg parameters give a nonpositive descent margin")
    if mode is RunMode.STRONGLY_CONVEX and not problem.mu0 > 0:
        raise ConfigError("strongly convex mode needs mu0 > 0")
    return gamma, rule, batch, T


def _eps_k(config: RunConfig, problem: ConstrainedProblem, delta_k, k: int, schedule) -> float:
    mode = config.mode
    if problem.m == 0:
        return 0.0
    if mode is RunMode.INEXACT:
        return config.eps_scale * float(np.min(delta_k))
    if config.exact_subproblems:
        return 0.0
    gap = float(np.linalg.norm(problem.eta - problem.eta0))
    if mode is RunMode.CONVEX:
        return gap / (2.0 * (k + 1) * (k + 2))
    if mode is RunMode.STRONGLY_CONVEX:
        a, rho = config.strong_convexity_a, schedule.rho
        return a * (1.0 - rho) * rho ** k * gap / 2.0
    return 0.0


@dataclass(frozen=True)
class _Step:
    x: np.ndarray
    lam: np.ndarray
    iters: int
    exact: bool
    eps_used: float


def _solve(sub: MajorizedSubproblem, config: RunConfig, eps_k: float, psi0_x: float, delta_k,
           warm_lam: Optional[np.ndarray] = None) -> _Step:
    if sub.m == 0:
        x = prox(sub.prox0, sub.anchor - sub.G / sub.gamma, sub.gamma)
        return _Step(x, np.zeros(0), 1, True, 0.0)
    if config.subsolver is Subsolver.SCAD:
        step = solve_majorized_scad(sub)
        return _Step(step.x, np.array([step.lam]), step.bisections, True, 0.0)
    if config.subsolver is Subsolver.IPM:
        return _solve_ipm(sub, config, eps_k, warm_lam)
    eps = eps_k if eps_k > 0 else config.ipm_exact_eps
    if config.psi0_lower_bound is not None:
        B = max(dual_bound_Bk(psi0_x, config.psi0_lower_bound, delta_k), 1e-12)
    else:
        B = config.dual_radius
    res = pd_solve(sub.to_prox_subproblem(), B, eps, config.pd_max_iter)
    if res.status is not PdStatus.CERTIFIED:
        raise UncertifiedSolutionError(
            f"first-order subsolver did not certify eps={eps:.1e} in {res.iterations} iterations", res)
    return _Step(res.x, res.lam, res.iterations, False, eps)


def _solve_ipm(sub: MajorizedSubproblem, config: RunConfig, eps_k: float,
               warm_lam: Optional[np.ndarray]) -> _Step:
    q = sub.to_diag_qcqp()
    if eps_k == 0 and warm_lam is not None and warm_lam.size == q.m:
        # the previous multipliers usually carry the right active set
        warm = refine_active_set(q, sub.anchor, warm_lam)
        if warm is not None:
            return _Step(warm.x, warm.lam, warm.iterations, True, 0.0)
    delta = float(np.min(-q.constraint_values(sub.anchor)))
    eps = eps_k if eps_k > 0 else config.ipm_exact_eps
    res = solve_path_following(q, sub.anchor, delta, eps, kappa=config.ipm_kappa,
                               gamma=config.ipm_gamma, tau0=config.ipm_tau0,
                               radius=config.ipm_radius, max_newton=config.ipm_max_newton,
                               residual_rtol=config.dual_residual_tol)
    if eps_k == 0:
        polished = refine_active_set(q, res.x, res.lam)
        if polished is not None:
            return _Step(polished.x, polished.lam, res.stats.newton_steps + polished.iterations, True, 0.0)
        logger.warning("active-set polish rejected; keeping the interior-point solution")
    limit = q.residual_tolerance(res.x, config.dual_residual_tol)
    if not res.stats.residual <= limit:
        raise UncertifiedSolutionError(
            f"interior-point multipliers miss stationarity ({res.stats.residual:.2e} > {limit:.2e})", res)
    return _Step(res.x, res.lam, res.stats.newton_steps, False, eps)


def _check_step(problem, config, sub, step: _Step, k, eta_k, eta_next, psi0_x, psi0_new,
                psi_new, step_norm, eps_k, gamma):
    mode = config.mode
    if problem.m:
        model = sub.constraint_values(step.x)
        if not within_levels(psi_new, model, config.feas_tol):
            raise InvariantViolationError(f"k={k}: constraint exceeds its majorant")
        if not within_levels(model, eta_k, config.feas_tol):
            raise InvariantViolationError(f"k={k}: subproblem solution violates eta^k")
        if not np.all(eta_k < eta_next) or np.any(eta_next > problem.eta):
            raise InvariantViolationError(f"k={k}: level chain eta^k < eta^(k+1) <= eta broken")
    if mode in (RunMode.STOCHASTIC, RunMode.SVRG):
        return
    tol = scaled_tolerance(config.feas_tol, max(abs(psi0_x), abs(psi0_new)))
    if step.exact and eps_k == 0 and gamma >= problem.L0:
        if 0.5 * problem.L0 * step_norm ** 2 > psi0_x - psi0_new + tol:
            raise InvariantViolationError(f"k={k}: sufficient descent violated")
    elif psi0_new > psi0_x + max(eps_k, step.eps_used) + tol:
        raise InvariantViolationError(f"k={k}: near-descent psi0(x+) <= psi0(x) + eps_k violated")


def lcpg_run(problem: ConstrainedProblem, config: RunConfig,
             schedule: Optional[LevelSchedule] = None) -> RunResult:
    gamma, rule, batch, T = _check_config(problem, config)
    schedule = schedule or default_schedule(problem, config)
    oracle = problem.objective.smooth
    m = problem.m
    rng_grad = make_rng(config.seed, 0)
    rng_out = make_rng(config.seed, 1)
    svrg = SvrgState()
    exact_residual = is_separable(problem.objective.prox) and all(
        is_separable(c.prox) for c in problem.constraints)
    drop_curvature = config.subsolver is Subsolver.SCAD

    x = problem.x0.copy()
    psi0_x = evaluate_objective(problem, x)
    psi_x = evaluate_constraints(problem, x)
    trace: List[IterateRecord] = []
    alphas: List[float] = []
    n_full = n_stoch = 0
    warm_lam: Optional[np.ndarray] = None

    def partial(message: str) -> RunResult:
        return RunResult(trace=trace, x_final=x, obj_final=psi0_x, psi_final=psi_x,
                         config=config, alphas=alphas, status="failed", message=message)

    for k in range(config.K):
        started = time.perf_counter()
        try:
            if m:
                eta_k = schedule_levels(schedule, problem.eta0, problem.eta, k)
                eta_next = schedule_levels(schedule, problem.eta0, problem.eta, k + 1)
                delta_k = level_increment(schedule, problem.eta0, problem.eta, k)
            else:
                eta_k = eta_next = delta_k = np.zeros(0)

            if config.mode is RunMode.STOCHASTIC:
                G, cost = lcspg_gradient(oracle, x, batch, rng_grad)
                n_stoch += cost
            elif config.mode is RunMode.SVRG:
                G, cost = lcsvrg_gradient(oracle, svrg, x, k, T, batch, rng_grad)
                n_full += int(k % T == 0)
                n_stoch += cost
            else:
                G, cost = full_gradient(oracle, x)
                n_full += 1
                n_stoch += cost

            eps_k = _eps_k(config, problem, delta_k, k, schedule)
            sub = build_subproblem(problem, x, eta_k, G, gamma, drop_concave_curvature=drop_curvature)
            step = _solve(sub, config, eps_k, psi0_x, delta_k, warm_lam)

            psi0_new = evaluate_objective(problem, step.x)
            psi_new = evaluate_constraints(problem, step.x)
            step_norm = float(np.linalg.norm(step.x - x))
            if config.check_invariants:
                _check_step(problem, config, sub, step, k, eta_k, eta_next, psi0_x, psi0_new,
                            psi_new, step_norm, eps_k, gamma)
        except LcpgError as exc:
            logger.error("run aborted at k=%d: %s", k, exc)
            raise RunAbortedError(f"k={k}: {exc}", partial(str(exc))) from exc

        if config.mode in (RunMode.STOCHASTIC, RunMode.SVRG):
            surrogate = math.sqrt(kkt_residual_surrogate_stochastic(gamma, problem.L0, problem.L,
                                                                    step.lam, step_norm))
        else:
            surrogate = kkt_residual_surrogate(gamma, problem.L, step.lam, step_norm)
        kkt_exact = kkt_residual_exact(problem, step.x, step.lam) if exact_residual else None
        elapsed = round((time.perf_counter() - started) * 1000.0, 3) if config.record_time else None
        trace.append(IterateRecord(
            k=k, x=x, obj=psi0_x, psi=psi_x, eta_k=np.asarray(eta_k, dtype=float),
            step_norm=step_norm, lam=step.lam, subsolver_iters=step.iters,
            grad_evals_full=n_full, grad_evals_stoch=n_stoch, eps_k=eps_k,
            kkt_surrogate=surrogate, kkt_exact=kkt_exact, time_ms=elapsed,
        ))
        alphas.append(alpha_weights(rule, k, T))
        if config.log_every and k % config.log_every == 0:
            logger.info("k=%d obj=%.6e step=%.3e |lam|=%.3e", k, psi0_x, step_norm,
                        float(np.linalg.norm(step.lam)))
        x, psi0_x, psi_x, warm_lam = step.x, psi0_new, psi_new, step.lam

    result = RunResult(trace=trace, x_final=x, obj_final=psi0_x, psi_final=psi_x,
                       config=config, alphas=alphas)
    result.khat = sample_output_index(alphas, rng_out)
    result.kkt = _kkt_report(problem, config, result)
    logger.info("%s run finished: K=%d obj=%.6e max|lam|=%.3e", config.mode.value, config.K,
                result.obj_final, result.max_dual_norm)
    return result


def _point_after(result: RunResult, k: int) -> np.ndarray:
    return result.trace[k + 1].x if k + 1 < len(result.trace) else result.x_final


def _kkt_report(problem: ConstrainedProblem, config: RunConfig, result: RunResult) -> KktReport:
    khat = result.khat
    rec = result.trace[khat]
    x_next = _point_after(result, khat)
    if rec.kkt_exact is not None:
        stationarity, exact = rec.kkt_exact, True
    else:
        stationarity, exact = rec.kkt_surrogate, False
    if problem.m:
        gaps = evaluate_constraints(problem, x_next) - problem.eta
        complementarity = float(rec.lam @ np.abs(gaps))
        feasibility = float(np.sum(np.maximum(gaps, 0.0)))
    else:
        complementarity = feasibility = 0.0
    inexact = any(r.eps_k > 0 for r in result.trace)
    if not inexact:
        return KktReport(KktType.I, khat, stationarity, exact, complementarity, feasibility)
    alphas = np.asarray(result.alphas)
    objs = [r.obj for r in result.trace] + [result.obj_final]
    drops = np.array([objs[k] - objs[k + 1] + result.trace[k].eps_k for k in range(len(result.trace))])
    delta_tilde = float(alphas @ drops)
    bound = 2.0 * delta_tilde / (problem.L0 * float(alphas.sum()))
    return KktReport(KktType.II, khat, stationarity, exact, complementarity, feasibility,
                     distance_bound=bound)
