"""Smoothing of structured nonsmooth terms g(x) = max_{y in Y} <Ax, y> - p(y).

For beta > 0 the smoothed term subtracts (beta/2)||y - y_hat||^2 inside the
max, which makes the maximizer y*(x) unique and g^beta differentiable with
gradient A^T y*(x) and modulus ||A||^2 / beta. Only closed-form maximizers
are supported.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple, Union

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import svds

from .errors import ConfigError, DimensionError, UnsupportedStructureError
from .problem import Composite, ConstrainedProblem, SmoothOracle
from .prox import ProxTerm, Zero, kkt_residual_exact, term_value

logger = logging.getLogger(__name__)


class SetKind(str, enum.Enum):
    BOX = "box"
    BALL = "ball"
    SIMPLEX = "simplex"


class PenaltyKind(str, enum.Enum):
    ZERO = "zero"
    LINEAR = "linear"
    DIAG_QUADRATIC = "diag_quadratic"


def _operator_norm(A) -> float:
    if min(A.shape) == 0:
        return 0.0
    if sp.issparse(A):
        if min(A.shape) < 3:
            return float(np.linalg.norm(A.toarray(), 2))
        return float(svds(A.astype(float), k=1, return_singular_vectors=False)[0])
    return float(np.linalg.norm(A, 2))


def project_simplex(v, total: float = 1.0) -> np.ndarray:
    """Euclidean projection onto {y >= 0, sum(y) = total} by sorting."""
    v = np.asarray(v, dtype=float)
    order = np.argsort(-v, kind="stable")
    u = v[order]
    css = np.cumsum(u) - total
    ks = np.arange(1, v.size + 1)
    rho = int(np.nonzero(u - css / ks > 0)[0][-1])
    theta = css[rho] / (rho + 1)
    return np.maximum(v - theta, 0.0)


@dataclass(frozen=True, eq=False)
class MaxStructure:
    A: np.ndarray
    kind: SetKind
    lower: Optional[np.ndarray] = None
    upper: Optional[np.ndarray] = None
    radius: float = 1.0
    total: float = 1.0
    penalty: PenaltyKind = PenaltyKind.ZERO
    c: Optional[np.ndarray] = None
    q: Optional[np.ndarray] = None
    y_hat: np.ndarray = field(init=False)
    D_Y: float = field(init=False)
    A_norm: float = field(init=False)

    def __post_init__(self):
        A = self.A if sp.issparse(self.A) else np.atleast_2d(np.asarray(self.A, dtype=float))
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "kind", SetKind(self.kind))
        object.__setattr__(self, "penalty", PenaltyKind(self.penalty))
        a = A.shape[0]
        if self.kind is SetKind.BOX:
            lo = np.broadcast_to(np.asarray(self.lower, dtype=float), (a,)).copy()
            hi = np.broadcast_to(np.asarray(self.upper, dtype=float), (a,)).copy()
            if np.any(lo > hi) or not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
                raise ConfigError("box bounds must be finite with lower <= upper")
            object.__setattr__(self, "lower", lo)
            object.__setattr__(self, "upper", hi)
            y_hat = np.clip(0.0, lo, hi)
            D = float(np.linalg.norm(np.maximum(np.abs(lo - y_hat), np.abs(hi - y_hat))))
        elif self.kind is SetKind.BALL:
            if self.radius < 0:
                raise ConfigError("ball radius must be nonnegative")
            y_hat, D = np.zeros(a), float(self.radius)
        else:
            if not self.total > 0:
                raise ConfigError("simplex total must be positive")
            y_hat = np.full(a, self.total / a)
            D = self.total * math.sqrt((a - 1) / a)
        if self.penalty is PenaltyKind.LINEAR:
            object.__setattr__(self, "c", np.broadcast_to(np.asarray(self.c, dtype=float), (a,)).copy())
        if self.penalty is PenaltyKind.DIAG_QUADRATIC:
            q = np.broadcast_to(np.asarray(self.q, dtype=float), (a,)).copy()
            if np.any(q < 0):
                raise ConfigError("diagonal quadratic penalty must be convex")
            if self.kind is not SetKind.BOX and np.ptp(q) > 0:
                raise UnsupportedStructureError(
                    f"{self.kind.value} sets need a uniform quadratic penalty for a closed-form maximizer")
            object.__setattr__(self, "q", q)
        object.__setattr__(self, "y_hat", y_hat)
        object.__setattr__(self, "D_Y", D)
        object.__setattr__(self, "A_norm", _operator_norm(A))

    @classmethod
    def box(cls, A, lower, upper, **penalty) -> "MaxStructure":
        return cls(A, SetKind.BOX, lower=lower, upper=upper, **penalty)

    @classmethod
    def ball(cls, A, radius: float, **penalty) -> "MaxStructure":
        return cls(A, SetKind.BALL, radius=radius, **penalty)

    @classmethod
    def simplex(cls, A, total: float = 1.0, **penalty) -> "MaxStructure":
        return cls(A, SetKind.SIMPLEX, total=total, **penalty)

    @property
    def d(self) -> int:
        return self.A.shape[1]

    def penalty_value(self, y) -> float:
        if self.penalty is PenaltyKind.LINEAR:
            return float(self.c @ y)
        if self.penalty is PenaltyKind.DIAG_QUADRATIC:
            return 0.5 * float(self.q @ (y * y))
        return 0.0

    def project(self, v) -> np.ndarray:
        if self.kind is SetKind.BOX:
            return np.clip(v, self.lower, self.upper)
        if self.kind is SetKind.BALL:
            norm = np.linalg.norm(v)
            return v * (self.radius / norm) if norm > self.radius else v
        return project_simplex(v, self.total)

    def _linear_argmax(self, v) -> np.ndarray:
        if self.kind is SetKind.BOX:
            return np.where(v > 0, self.upper, self.lower)
        if self.kind is SetKind.BALL:
            norm = np.linalg.norm(v)
            return v * (self.radius / norm) if norm > 0 else np.zeros_like(v)
        y = np.zeros_like(v)
        y[int(np.argmax(v))] = self.total
        return y

    def maximizer(self, x, beta: float) -> np.ndarray:
        """argmax_y <Ax, y> - p(y) - (beta/2)||y - y_hat||^2 over Y."""
        if math.isinf(beta):
            return self.y_hat.copy()
        Ax = np.asarray(self.A @ np.asarray(x, dtype=float)).reshape(-1)
        if self.penalty is PenaltyKind.LINEAR:
            Ax = Ax - self.c
        q = self.q if self.penalty is PenaltyKind.DIAG_QUADRATIC else np.zeros_like(Ax)
        curv = q + beta
        v = Ax + beta * self.y_hat
        if np.all(curv > 0):
            return self.project(v / curv)
        if self.kind is SetKind.BOX:
            flat = curv <= 0
            y = np.clip(np.divide(v, curv, out=np.zeros_like(v), where=~flat), self.lower, self.upper)
            y[flat] = self._linear_argmax(v)[flat]
            return y
        return self._linear_argmax(v)

    def value_at(self, x, y, beta: float) -> float:
        Ax = np.asarray(self.A @ np.asarray(x, dtype=float)).reshape(-1)
        value = float(Ax @ y) - self.penalty_value(y)
        if beta > 0 and not math.isinf(beta):
            diff = y - self.y_hat
            value -= 0.5 * beta * float(diff @ diff)
        return value


def choose_beta(nu: float, D_Y: float) -> float:
    """beta = 2 nu / D_Y^2; +inf when Y is a single point (nothing to smooth)."""
    if not nu > 0:
        raise ValueError("nu must be positive")
    if D_Y < 0:
        raise ValueError("D_Y must be nonnegative")
    if D_Y == 0:
        return math.inf
    return 2.0 * nu / (D_Y * D_Y)


def exact_structure_value(structure: MaxStructure, x) -> float:
    y = structure.maximizer(x, 0.0)
    return structure.value_at(x, y, 0.0)


@dataclass(frozen=True, eq=False)
class SmoothedComposite:
    """f^beta = g^beta - h with h convex and L_h-smooth, plus a prox term."""

    structure: MaxStructure
    beta: float
    h: Optional[SmoothOracle] = None
    L_h: float = 0.0
    prox: ProxTerm = field(default_factory=Zero)

    def __post_init__(self):
        if not self.beta > 0:
            raise ConfigError("beta must be positive")
        if self.L_h < 0:
            raise ConfigError("L_h must be nonnegative")
        if self.h is not None and self.h.dimension != self.structure.d:
            raise DimensionError("h and A disagree on the dimension")

    @property
    def L_g(self) -> float:
        return self.structure.A_norm ** 2 / self.beta

    @property
    def L_beta(self) -> float:
        return max(self.L_g, self.L_h)

    @property
    def nu(self) -> float:
        if math.isinf(self.beta):
            return 0.0
        return 0.5 * self.beta * self.structure.D_Y ** 2

    def smoothed_g(self, x) -> Tuple[float, np.ndarray]:
        y = self.structure.maximizer(x, self.beta)
        grad = np.asarray(self.structure.A.T @ y).reshape(-1)
        return self.structure.value_at(x, y, self.beta), grad

    def eval(self, x) -> Tuple[float, np.ndarray]:
        value, grad = self.smoothed_g(x)
        if self.h is not None:
            hv, hg = self.h.eval(x)
            value, grad = value - hv, grad - hg
        return value, grad

    def exact_value(self, x) -> float:
        """Unsmoothed g(x) - h(x), without the prox term."""
        value = exact_structure_value(self.structure, x)
        if self.h is not None:
            value -= self.h.value(x)
        return value

    def as_composite(self, curvature_floor: float = 1e-3) -> Composite:
        oracle = SmoothOracle(fn=self.eval, dimension=self.structure.d, smoothness=self.L_beta)
        return Composite(smooth=oracle, prox=self.prox, lipschitz=max(self.L_beta, curvature_floor))


def smooth_structure(structure: MaxStructure, nu: float, h: Optional[SmoothOracle] = None,
                     L_h: float = 0.0, prox: Optional[ProxTerm] = None) -> SmoothedComposite:
    """Smoothed term whose beta is chosen so that beta D_Y^2 / 2 = nu."""
    return SmoothedComposite(structure, choose_beta(nu, structure.D_Y), h=h, L_h=L_h,
                             prox=prox if prox is not None else Zero())


def smoothed_eval(sc: SmoothedComposite, x) -> Tuple[float, np.ndarray]:
    return sc.eval(x)


@dataclass(frozen=True)
class SandwichResult:
    smoothed: float
    gap: float
    passed: bool


def sandwich_check(sc: SmoothedComposite, x, tol: float = 1e-9) -> SandwichResult:
    smoothed, _ = sc.smoothed_g(x)
    gap = exact_structure_value(sc.structure, x) - smoothed
    return SandwichResult(smoothed, gap, -tol <= gap <= sc.nu + tol)


def nu_subgradient_check(sc: SmoothedComposite, x, probes: Sequence, nu: Optional[float] = None,
                         gradient=None, tol: float = 1e-9) -> bool:
    """Is grad g^beta(x) (or ``gradient``) a nu-subgradient of g at x on every probe?"""
    nu = sc.nu if nu is None else nu
    x = np.asarray(x, dtype=float)
    v = sc.smoothed_g(x)[1] if gradient is None else np.asarray(gradient, dtype=float)
    gx = exact_structure_value(sc.structure, x)
    for z in probes:
        z = np.asarray(z, dtype=float).reshape(x.shape)
        if exact_structure_value(sc.structure, z) < gx + float(v @ (z - x)) - nu - tol:
            return False
    return True


Term = Union[Composite, SmoothedComposite]


@dataclass(frozen=True, eq=False)
class SmoothedProblem:
    problem: ConstrainedProblem
    constraint_terms: Tuple[Term, ...]
    nu: float

    def original_constraints(self, x) -> np.ndarray:
        values = []
        for term in self.constraint_terms:
            if isinstance(term, SmoothedComposite):
                values.append(term.exact_value(x) + term_value(term.prox, x))
            else:
                values.append(term.value(x))
        return np.array(values, dtype=float)


def smoothed_problem(objective: Term, constraints: Sequence[Term], eta, eta0, x0,
                     mu0: float = 0.0) -> SmoothedProblem:
    def lift(term: Term) -> Composite:
        return term.as_composite() if isinstance(term, SmoothedComposite) else term

    nus = [t.nu for t in [objective, *constraints] if isinstance(t, SmoothedComposite)]
    problem = ConstrainedProblem(
        objective=lift(objective), constraints=tuple(lift(c) for c in constraints),
        eta=eta, eta0=eta0, x0=x0, mu0=mu0,
    )
    return SmoothedProblem(problem, tuple(constraints), max(nus, default=0.0))


@dataclass(frozen=True)
class Type3Report:
    stationarity: float
    complementarity: float
    feasibility: float
    nu: float


def type3_kkt_report(smoothed: SmoothedProblem, x, lam, nu: Optional[float] = None) -> Type3Report:
    """Stationarity on the smoothed problem; slackness and feasibility on the original one."""
    lam = np.asarray(lam, dtype=float).reshape(-1)
    if np.any(lam < 0):
        raise ValueError("multipliers must be nonnegative")
    stationarity = kkt_residual_exact(smoothed.problem, x, lam)
    gaps = smoothed.original_constraints(x) - smoothed.problem.eta
    return Type3Report(
        stationarity=stationarity,
        complementarity=float(lam @ np.abs(gaps)),
        feasibility=float(np.sum(np.maximum(gaps, 0.0))),
        nu=smoothed.nu if nu is None else nu,
    )


def type3_epsilon(eps: float, B: float, nu: float, m: int) -> float:
    return max(eps + B * nu, m * nu)
