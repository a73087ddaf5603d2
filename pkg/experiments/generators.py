"""Benchmark instances: the l1-penalised QCQP family and SCAD-constrained logistic regression."""

from __future__ import annotations

import dataclasses
import hashlib
import logging
import math
from dataclasses import dataclass
from typing import Any, Mapping, Optional, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import eigsh

from lcpg.errors import ConfigError
from lcpg.ipm import DiagQcqp
from lcpg.primal_dual import ProxSubproblem
from lcpg.problem import (Composite, ConstrainedProblem, ProblemMode, SmoothOracle,
                          quadratic_oracle, squared_distance_oracle)
from lcpg.prox import L1, ScadParams, Zero, scad_penalty_grad, scad_penalty_value
from lcpg.schedules import make_rng

from experiments.datasets import SparseDataset, logistic_oracle

logger = logging.getLogger(__name__)

CURVATURE_FLOOR = 1e-3


def recipe_from_dict(cls, data: Mapping[str, Any]):
    """Build a recipe dataclass from lower_snake_case keys; unknown keys are rejected."""
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"unknown {cls.__name__} keys: {', '.join(unknown)}")
    return cls(**data)


@dataclass(frozen=True)
class QcqpRecipe:
    n: int = 50
    m: int = 5
    convexity: str = "convex"
    density: float = 0.01
    eig_max: float = 100.0
    b_shift: float = 10.0
    c: float = -10.0
    radius: float = math.sqrt(20.0)
    alpha: float = 1.0
    dc_shift: float = 10.0
    eta0: float = -5.0
    objective_shift: float = 0.0
    lipschitz_inflation: float = 1.01
    seed: int = 0

    def __post_init__(self):
        if self.convexity not in ("convex", "dc"):
            raise ConfigError(f"convexity must be 'convex' or 'dc', got {self.convexity!r}")
        if self.n < 1 or self.m < 1:
            raise ConfigError("need n >= 1 and m >= 1 (the ball is the last constraint)")
        if not 0 < self.density <= 1:
            raise ConfigError("density must lie in (0, 1]")
        if not self.c < self.eta0 < 0:
            raise ConfigError("need c < eta0 < 0 so that x = 0 is strictly feasible")
        if not -0.5 * self.radius ** 2 < self.eta0:
            raise ConfigError("eta0 must exceed the ball constraint value at 0")
        if self.objective_shift < 0:
            raise ConfigError("objective_shift must be nonnegative")

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "QcqpRecipe":
        return recipe_from_dict(cls, data)


@dataclass(frozen=True, eq=False)
class GeneratedQcqp:
    problem: ConstrainedProblem
    Q: Tuple[sp.csr_matrix, ...]
    b: Tuple[np.ndarray, ...]
    L: np.ndarray
    psi0_lower_bound: float
    recipe: QcqpRecipe

    def fingerprint(self) -> str:
        digest = hashlib.sha256()
        for Q in self.Q:
            digest.update(np.ascontiguousarray(Q.toarray()).tobytes())
        for b in self.b:
            digest.update(np.ascontiguousarray(b).tobytes())
        digest.update(np.ascontiguousarray(self.L).tobytes())
        return digest.hexdigest()


def lambda_max(Q) -> float:
    n = Q.shape[0]
    if n <= 1000:
        dense = Q.toarray() if sp.issparse(Q) else np.asarray(Q)
        return float(np.linalg.eigvalsh(dense)[-1])
    return float(eigsh(Q, k=1, which="LA", return_eigenvectors=False)[0])


def _psd_block(recipe: QcqpRecipe, rng: np.random.Generator) -> sp.csr_matrix:
    n = recipe.n
    V = sp.random(n, n, density=recipe.density, format="csr", random_state=rng,
                  data_rvs=lambda k: rng.uniform(0.0, 1.0, k))
    D = sp.diags(rng.uniform(0.0, recipe.eig_max, n))
    P = (V @ D @ V.T).tocsr()
    return ((P + P.T) * 0.5).tocsr()


def _quadratic_term(recipe: QcqpRecipe, rng, shift: float = 0.0):
    P = _psd_block(recipe, rng)
    eye = sp.identity(recipe.n, format="csr")
    top = lambda_max(P) * recipe.lipschitz_inflation
    if recipe.convexity == "dc":
        Q = (P - recipe.dc_shift * eye).tocsr()
        L = top + recipe.dc_shift
    else:
        Q = (P + shift * eye).tocsr() if shift else P
        L = top + shift
    b = recipe.b_shift + rng.standard_normal(recipe.n)
    return Q, b, max(L, CURVATURE_FLOOR)


def gen_qcqp(recipe: QcqpRecipe) -> GeneratedQcqp:
    """min 0.5 x'Q0x + b0'x + alpha ||x||_1  s.t.  0.5 x'Qix + bi'x + c <= 0 (m-1 times), ||x|| <= r.

    The ball enters as the smooth constraint 0.5||x||^2 - r^2/2 <= 0.
    """
    rng = make_rng(recipe.seed, 11)
    Q0, b0, L0 = _quadratic_term(recipe, rng, shift=recipe.objective_shift)
    prox0 = L1(recipe.alpha) if recipe.alpha > 0 else Zero()
    objective = Composite(quadratic_oracle(Q0, b0), prox=prox0, lipschitz=L0)

    Qs, bs, Ls, constraints = [Q0], [b0], [], []
    for _ in range(recipe.m - 1):
        Q, b, L = _quadratic_term(recipe, rng)
        Qs.append(Q)
        bs.append(b)
        Ls.append(L)
        constraints.append(Composite(quadratic_oracle(Q, b, recipe.c), lipschitz=L))
    ball = squared_distance_oracle(1.0, np.zeros(recipe.n), 0.5 * recipe.radius ** 2)
    constraints.append(Composite(ball, lipschitz=1.0))
    Ls.append(1.0)

    if recipe.convexity == "dc":
        mode, mu0 = ProblemMode.NONCONVEX, 0.0
    elif recipe.objective_shift > 0:
        mode, mu0 = ProblemMode.STRONGLY_CONVEX, recipe.objective_shift
    else:
        mode, mu0 = ProblemMode.CONVEX, 0.0
    problem = ConstrainedProblem(
        objective=objective, constraints=tuple(constraints),
        eta=np.zeros(recipe.m), eta0=np.full(recipe.m, recipe.eta0), x0=np.zeros(recipe.n),
        mu0=mu0, mode=mode,
    )
    # psi_0 >= -||b0|| r - (dc_shift/2) r^2 on the ball
    lower = -float(np.linalg.norm(b0)) * recipe.radius
    if recipe.convexity == "dc":
        lower -= 0.5 * recipe.dc_shift * recipe.radius ** 2
    logger.debug("qcqp seed=%d n=%d m=%d L0=%.3e max L=%.3e", recipe.seed, recipe.n, recipe.m,
                 L0, max(Ls))
    return GeneratedQcqp(problem=problem, Q=tuple(Qs), b=tuple(bs), L=np.array(Ls),
                         psi0_lower_bound=lower, recipe=recipe)


@dataclass(frozen=True, eq=False)
class DiagInstance:
    q: DiagQcqp
    x_hat: np.ndarray
    delta: float

    def as_prox_subproblem(self) -> ProxSubproblem:
        """The same problem in the first-order subsolver's anchored form."""
        q, x = self.q, self.x_hat
        prox0 = L1(q.alpha) if q.alpha > 0 else Zero()
        return ProxSubproblem(
            gamma=q.L0, anchor=x, q0=q.L0 * (x - q.a0), prox0=prox0,
            Q=q.L[:, None] * (x[None, :] - q.A), L=q.L, offsets=q.constraint_values(x),
            prox_terms=tuple(Zero() for _ in range(q.m)),
            obj_offset=0.5 * q.L0 * float((x - q.a0) @ (x - q.a0)),
        )


def random_diag_qcqp(d: int = 20, m: int = 5, seed: int = 0, alpha: float = 0.0) -> DiagInstance:
    """Random diagonal QCQP with x = 0 strictly feasible and typically some active balls."""
    rng = make_rng(seed, 21)
    a0 = rng.standard_normal(d) * 2.0
    A = rng.standard_normal((m, d))
    L = rng.uniform(0.5, 2.0, m)
    b = 0.5 * L * np.sum(A ** 2, axis=1) + rng.uniform(0.5, 2.0, m)
    q = DiagQcqp(L0=float(rng.uniform(0.5, 2.0)), a0=a0, L=L, A=A, b=b, alpha=alpha)
    x_hat = np.zeros(d)
    return DiagInstance(q, x_hat, float(np.min(-q.constraint_values(x_hat))))


def scad_constraint(beta: float, theta: float, d: int, sigma: float) -> Tuple[Composite, float]:
    """beta ||x||_1 - sum_j h(x_j) with level sigma * d."""
    params = ScadParams(beta, theta)

    def fn(x):
        return -scad_penalty_value(x, params), -scad_penalty_grad(x, params)

    oracle = SmoothOracle(fn, d, smoothness=params.smoothness)
    return Composite(oracle, prox=L1(beta), lipschitz=params.smoothness, concave=True), sigma * d


@dataclass(frozen=True)
class ScadRecipe:
    beta: float = 2.0
    theta: float = 5.0
    sigma: float = 0.4
    eta0_fraction: float = 0.5

    def __post_init__(self):
        if not 0 < self.eta0_fraction < 1:
            raise ConfigError("eta0_fraction must lie in (0, 1)")
        if not self.sigma > 0:
            raise ConfigError("sigma must be positive")

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ScadRecipe":
        return recipe_from_dict(cls, data)


def build_scad_problem(dataset: SparseDataset, recipe: Optional[ScadRecipe] = None) -> ConstrainedProblem:
    recipe = recipe or ScadRecipe()
    oracle = logistic_oracle(dataset)
    objective = Composite(oracle, lipschitz=max(oracle.smoothness, CURVATURE_FLOOR))
    constraint, eta1 = scad_constraint(recipe.beta, recipe.theta, dataset.d, recipe.sigma)
    return ConstrainedProblem(
        objective=objective, constraints=(constraint,), eta=[eta1],
        eta0=[recipe.eta0_fraction * eta1], x0=np.zeros(dataset.d),
    )
