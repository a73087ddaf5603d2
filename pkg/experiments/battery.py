"""Quick invariant battery behind the ``check`` command.

Every check is deterministic and desk-sized; a check passes when it returns
without raising.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, List, Tuple

import numpy as np

from lcpg.drivers import RunConfig, RunMode, Subsolver, lcpg_run
from lcpg.errors import InvariantViolationError
from lcpg.estimators import SvrgState, lcsvrg_gradient
from lcpg.ipm import refine_active_set, solve_path_following
from lcpg.primal_dual import PdStatus, certificate_check, pd_solve
from lcpg.problem import Composite, ConstrainedProblem, linear_oracle
from lcpg.prox import subdiff_interval
from lcpg.schedules import LevelSchedule, level_increment, make_rng, schedule_levels
from lcpg.smoothing import MaxStructure, sandwich_check, smooth_structure

from experiments.datasets import logistic_oracle, synthetic_classification
from experiments.generators import QcqpRecipe, gen_qcqp, random_diag_qcqp, scad_constraint

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str = ""


def _require(condition, message: str) -> None:
    if not condition:
        raise InvariantViolationError(message)


def _scad_example():
    constraint, eta1 = scad_constraint(beta=1.0, theta=5.0, d=2, sigma=1.5)
    objective = Composite(linear_oracle(np.array([-1.0, 0.0]), 7.0), lipschitz=1.0)
    problem = ConstrainedProblem(objective, (constraint,), eta=[eta1], eta0=[0.5 * eta1],
                                 x0=np.zeros(2))
    return problem, constraint


def check_scad_example() -> str:
    _, constraint = _scad_example()
    at5 = constraint.value(np.array([5.0, 0.0]))
    at3 = constraint.value(np.array([3.0, 0.0]))
    _require(abs(at5 - 3.0) <= 1e-12, f"psi_1(5,0) = {at5}")
    _require(abs(at3 - 2.5) <= 1e-12, f"psi_1(3,0) = {at3}")
    lo, hi = subdiff_interval(constraint.prox, np.array([5.0, 0.0]), 1)
    _require((lo, hi) == (-1.0, 1.0), f"chi subdifferential at x_2 = 0 is [{lo}, {hi}]")
    return "psi_1(5,0)=3, psi_1(3,0)=2.5"


def check_level_schedules() -> str:
    eta0, eta = np.array([-5.0, -1.0]), np.array([0.0, 2.0])
    for schedule in (LevelSchedule.polynomial(), LevelSchedule.geometric(0.9)):
        acc = [math.fsum([eta0[i]] + [float(level_increment(schedule, eta0, eta, j)[i])
                                      for j in range(1000)]) for i in range(2)]
        closed = schedule_levels(schedule, eta0, eta, 1000)
        _require(np.max(np.abs(closed - acc)) <= 1e-12, f"{schedule.kind.value} drifted")
    rho = Fraction(1, 3)
    geo = LevelSchedule.geometric(rho)
    e0, e = Fraction(-7, 2), Fraction(5, 3)
    for k in range(30):
        _require(e - schedule_levels(geo, e0, e, k) == rho ** k * (e - e0),
                 f"k={k}: geometric gap is not rho^k")
    return "closed forms match accumulated increments"


def check_qcqp_descent() -> str:
    cfg = RunConfig(mode=RunMode.EXACT, K=30, subsolver=Subsolver.IPM, check_invariants=True)
    for convexity in ("convex", "dc"):
        for seed in range(2):
            generated = gen_qcqp(QcqpRecipe(n=20, m=3, convexity=convexity, seed=seed))
            lcpg_run(generated.problem, cfg.replace(seed=seed))
    return "4 instances, 30 iterations each"


def check_subsolvers_agree() -> str:
    worst = 0.0
    for seed in range(3):
        inst = random_diag_qcqp(d=10, m=3, seed=seed)
        ipm = solve_path_following(inst.q, inst.x_hat, inst.delta, 1e-8)
        polished = refine_active_set(inst.q, ipm.x, ipm.lam)
        x_ref, lam_ref = (polished.x, polished.lam) if polished else (ipm.x, ipm.lam)
        sub = inst.as_prox_subproblem()
        pd = pd_solve(sub, B=1e4, eps=1e-9)
        _require(pd.status is PdStatus.CERTIFIED, f"seed {seed}: first-order solve uncertified")
        cert = certificate_check(sub, pd.x, lam_ref, 1e-9 + 1e-8)
        _require(cert.passed, f"seed {seed}: certificate fails against the interior-point duals")
        worst = max(worst, float(np.linalg.norm(pd.x - x_ref)))
    _require(worst <= 1e-3, f"subsolvers disagree by {worst:.2e}")
    return f"max |x_pd - x_ipm| = {worst:.2e}"


def check_smoothing_sandwich() -> str:
    rng = make_rng(0, 31)
    for d in (1, 5):
        sc = smooth_structure(MaxStructure.box(np.eye(d), -1.0, 1.0), nu=0.1)
        for _ in range(100):
            res = sandwich_check(sc, rng.normal(scale=3.0, size=d))
            _require(res.passed, f"d={d}: gap {res.gap:.3e} outside [0, {sc.nu:.3e}]")
    return "l1 over box, 200 points"


def check_svrg_epoch_start() -> str:
    data = synthetic_classification(50, 5, seed=0)
    oracle = logistic_oracle(data)
    rng = make_rng(0, 0)
    state = SvrgState()
    x = rng.normal(size=data.d)
    for k in range(0, 9):
        G, _ = lcsvrg_gradient(oracle, state, x, k, T=3, b=4, rng=rng)
        if k % 3 == 0:
            _require(np.array_equal(G, oracle.grad(x)), f"k={k}: epoch start is not the full gradient")
        x = x + 0.1 * rng.normal(size=data.d)
    return "epoch-start estimator error is exactly zero"


def check_determinism() -> str:
    problem = gen_qcqp(QcqpRecipe(n=15, m=3, seed=3)).problem
    cfg = RunConfig(mode=RunMode.INEXACT, K=10, seed=5)
    first, second = lcpg_run(problem, cfg), lcpg_run(problem, cfg)
    _require(first.rows() == second.rows() and first.khat == second.khat, "runs differ")
    return "two runs with one seed give identical traces"


CHECKS: Tuple[Tuple[str, Callable[[], str]], ...] = (
    ("scad-example-values", check_scad_example),
    ("level-schedules", check_level_schedules),
    ("qcqp-descent-feasibility", check_qcqp_descent),
    ("subsolver-agreement", check_subsolvers_agree),
    ("smoothing-sandwich", check_smoothing_sandwich),
    ("svrg-epoch-start", check_svrg_epoch_start),
    ("determinism", check_determinism),
)


def run_check_battery(names=None) -> List[CheckResult]:
    results = []
    for name, check in CHECKS:
        if names and name not in names:
            continue
        try:
            detail = check()
            results.append(CheckResult(name, True, detail))
        except Exception as exc:
            logger.warning("check %s failed: %s", name, exc)
            results.append(CheckResult(name, False, f"{type(exc).__name__}: {exc}"))
    return results
