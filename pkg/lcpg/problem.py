"""Composite constrained problems and smooth-function oracles."""

from __future__ import annotations

import enum
import logging
from dataclasses import InitVar, dataclass, field
from typing import Callable, Optional, Tuple

import numpy as np
import scipy.sparse as sp

from .errors import DimensionError, InfeasibleStartError
from .prox import ProxTerm, Zero, dist_to_interval, subdiff_bounds, term_value
from .schedules import make_rng

logger = logging.getLogger(__name__)

EvalFn = Callable[[np.ndarray], Tuple[float, np.ndarray]]


@dataclass(frozen=True, eq=False)
class SmoothOracle:
    """Value/gradient oracle of a smooth function on R^d.

    Finite sums ``f(x) = mean_i F_i(x)`` also provide ``component_fn`` and
    optionally ``batch_fn(indices, x)`` returning the mean gradient over the
    given (possibly repeated) component indices.
    """

    fn: EvalFn
    dimension: int
    component_fn: Optional[Callable[[int, np.ndarray], Tuple[float, np.ndarray]]] = None
    n_components: int = 0
    batch_fn: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    smoothness: Optional[float] = None

    def eval(self, x) -> Tuple[float, np.ndarray]:
        value, grad = self.fn(np.asarray(x, dtype=float))
        grad = np.asarray(grad, dtype=float).reshape(-1)
        if grad.size != self.dimension:
            raise DimensionError(
                f"oracle returned gradient of length {grad.size}, expected {self.dimension}")
        return float(value), grad

    def value(self, x) -> float:
        return self.eval(x)[0]

    def grad(self, x) -> np.ndarray:
        return self.eval(x)[1]

    @property
    def is_finite_sum(self) -> bool:
        return self.n_components > 0 and self.component_fn is not None

    def component_eval(self, i: int, x) -> Tuple[float, np.ndarray]:
        if not self.is_finite_sum:
            raise DimensionError("oracle is not a finite sum")
        value, grad = self.component_fn(int(i), np.asarray(x, dtype=float))
        return float(value), np.asarray(grad, dtype=float).reshape(-1)

    def batch_gradient(self, indices, x) -> np.ndarray:
        """Mean of component gradients over ``indices`` (repeats counted)."""
        indices = np.asarray(indices, dtype=int)
        if self.batch_fn is not None:
            return np.asarray(self.batch_fn(indices, np.asarray(x, dtype=float)), dtype=float)
        total = np.zeros(self.dimension)
        for i in indices:
            total += self.component_eval(i, x)[1]
        return total / max(len(indices), 1)


def quadratic_oracle(Q, b=None, c: float = 0.0) -> SmoothOracle:
    """``0.5 x'Qx + b'x + c`` for a symmetric dense or sparse ``Q``."""
    d = Q.shape[0]
    b = np.zeros(d) if b is None else np.asarray(b, dtype=float)
    Q = sp.csr_matrix(Q) if sp.issparse(Q) else np.asarray(Q, dtype=float)

    def fn(x):
        Qx = Q @ x
        return 0.5 * float(x @ Qx) + float(b @ x) + c, np.asarray(Qx).reshape(-1) + b

    return SmoothOracle(fn, d)


def squared_distance_oracle(L: float, a, b: float = 0.0) -> SmoothOracle:
    """``(L/2) ||x - a||^2 - b``."""
    a = np.asarray(a, dtype=float)

    def fn(x):
        diff = x - a
        return 0.5 * L * float(diff @ diff) - b, L * diff

    return SmoothOracle(fn, a.size, smoothness=L)


def linear_oracle(g, c: float = 0.0) -> SmoothOracle:
    g = np.asarray(g, dtype=float)
    return SmoothOracle(lambda x: (float(g @ x) + c, g.copy()), g.size, smoothness=0.0)


def zero_oracle(d: int) -> SmoothOracle:
    return SmoothOracle(lambda x: (0.0, np.zeros(d)), d, smoothness=0.0)


def finite_sum_oracle(component_fn, n: int, d: int, batch_fn=None, full_fn=None) -> SmoothOracle:
    """Build ``mean_i F_i`` from its components; ``full_fn`` may vectorise the mean."""
    if full_fn is None:
        def full_fn(x):
            value, grad = 0.0, np.zeros(d)
            for i in range(n):
                v, g = component_fn(i, x)
                value += v
                grad += g
            return value / n, grad / n

    return SmoothOracle(full_fn, d, component_fn=component_fn, n_components=n, batch_fn=batch_fn)


@dataclass(frozen=True, eq=False)
class Composite:
    """psi = f + chi with an L-smooth ``f`` and a catalog prox term ``chi``.

    ``concave`` marks a smooth part whose linearisation already majorises it
    (the SCAD constraint); the drivers may then drop its proximal curvature.
    """

    smooth: SmoothOracle
    prox: ProxTerm = field(default_factory=Zero)
    lipschitz: float = 1.0
    concave: bool = False

    def __post_init__(self):
        if not self.lipschitz > 0:
            raise ValueError(f"Lipschitz modulus must be positive, got {self.lipschitz}")

    def value(self, x) -> float:
        return self.smooth.value(x) + term_value(self.prox, x)


class ProblemMode(str, enum.Enum):
    NONCONVEX = "nonconvex"
    CONVEX = "convex"
    STRONGLY_CONVEX = "strongly_convex"


@dataclass(frozen=True)
class FeasibilityReport:
    margins: np.ndarray
    level_gaps: np.ndarray
    passed: bool


@dataclass(frozen=True, eq=False)
class ConstrainedProblem:
    """min psi_0(x) s.t. psi_i(x) <= eta_i, started from a strictly feasible x0.

    Construction validates strict feasibility ``psi_i(x0) < eta0_i < eta_i``
    with tolerance 0 unless ``validate=False``.
    """

    objective: Composite
    constraints: Tuple[Composite, ...]
    eta: np.ndarray
    eta0: np.ndarray
    x0: np.ndarray
    mu0: float = 0.0
    mode: ProblemMode = ProblemMode.NONCONVEX
    validate: InitVar[bool] = True

    def __post_init__(self, validate):
        object.__setattr__(self, "constraints", tuple(self.constraints))
        object.__setattr__(self, "eta", np.asarray(self.eta, dtype=float).reshape(-1))
        object.__setattr__(self, "eta0", np.asarray(self.eta0, dtype=float).reshape(-1))
        object.__setattr__(self, "x0", np.asarray(self.x0, dtype=float).reshape(-1))
        object.__setattr__(self, "mode", ProblemMode(self.mode))
        if self.mu0 < 0:
            raise ValueError("mu0 must be nonnegative")
        _check_dimensions(self)
        if validate:
            report = validate_strict_feasibility(self)
            if not report.passed:
                worst = float(min(np.min(report.margins, initial=np.inf),
                                  np.min(report.level_gaps, initial=np.inf)))
                raise InfeasibleStartError(
                    f"x0 is not strictly feasible (worst margin {worst:.3e})", worst)

    @property
    def m(self) -> int:
        return len(self.constraints)

    @property
    def d(self) -> int:
        return self.x0.size

    @property
    def L0(self) -> float:
        return self.objective.lipschitz

    @property
    def L(self) -> np.ndarray:
        return np.array([c.lipschitz for c in self.constraints], dtype=float)


def _check_dimensions(problem: ConstrainedProblem) -> None:
    d, m = problem.x0.size, len(problem.constraints)
    if problem.eta.size != m or problem.eta0.size != m:
        raise DimensionError(
            f"levels have length {problem.eta.size}/{problem.eta0.size}, expected {m}")
    for comp in (problem.objective, *problem.constraints):
        if comp.smooth.dimension != d:
            raise DimensionError(f"oracle dimension {comp.smooth.dimension} != {d}")


def evaluate_constraints(problem: ConstrainedProblem, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.size != problem.d:
        raise DimensionError(f"x has length {x.size}, expected {problem.d}")
    return np.array([c.value(x) for c in problem.constraints], dtype=float)


def evaluate_objective(problem: ConstrainedProblem, x) -> float:
    x = np.asarray(x, dtype=float)
    if x.size != problem.d:
        raise DimensionError(f"x has length {x.size}, expected {problem.d}")
    return problem.objective.value(x)


def scaled_tolerance(feas_tol: float, reference):
    """``feas_tol * (1 + |reference|)``, elementwise for arrays."""
    tol = feas_tol * (1.0 + np.abs(np.asarray(reference, dtype=float)))
    return float(tol) if tol.ndim == 0 else tol


def within_levels(values, levels, feas_tol: float) -> bool:
    """Every ``values[i] <= levels[i]`` up to the tolerance at constraint i's own scale."""
    levels = np.asarray(levels, dtype=float)
    return bool(np.all(np.asarray(values, dtype=float) <= levels + scaled_tolerance(feas_tol, levels)))


def validate_strict_feasibility(problem: ConstrainedProblem) -> FeasibilityReport:
    _check_dimensions(problem)
    margins = problem.eta0 - evaluate_constraints(problem, problem.x0)
    level_gaps = problem.eta - problem.eta0
    passed = bool(np.all(margins > 0) and np.all(level_gaps > 0))
    return FeasibilityReport(margins=margins, level_gaps=level_gaps, passed=passed)


@dataclass(frozen=True)
class LipschitzCheck:
    passed: bool
    ratio: float


def check_lipschitz(oracle: SmoothOracle, L: float, n_samples: int = 200,
                    radius: float = 1.0, seed: int = 0, center=None) -> LipschitzCheck:
    """Probabilistic check of ``||grad f(x) - grad f(y)|| <= L ||x - y||``."""
    if not L > 0:
        raise ValueError("L must be positive")
    d = oracle.dimension
    center = np.zeros(d) if center is None else np.asarray(center, dtype=float)
    rng = make_rng(seed, 7)

    def draw():
        direction = rng.standard_normal(d)
        direction /= np.linalg.norm(direction)
        return center + radius * rng.uniform() ** (1.0 / d) * direction

    worst = 0.0
    for _ in range(n_samples):
        x, y = draw(), draw()
        while np.linalg.norm(x - y) < 1e-12:
            y = draw()
        ratio = np.linalg.norm(oracle.grad(x) - oracle.grad(y)) / np.linalg.norm(x - y)
        worst = max(worst, float(ratio))
    return LipschitzCheck(passed=worst <= L * (1 + 1e-6), ratio=worst)


def constraint_subgradient_distance(problem: ConstrainedProblem, x, i: int) -> float:
    """dist(0, d psi_i(x)); the MFCQ margin c(x) for a single active constraint."""
    comp = problem.constraints[i]
    _, g = comp.smooth.eval(x)
    lo, hi = subdiff_bounds(comp.prox, np.asarray(x, dtype=float))
    return float(np.linalg.norm(dist_to_interval(g, lo, hi)))


def strong_feasibility_check(problem: ConstrainedProblem, x_hat, diameter: float) -> FeasibilityReport:
    """Margins of ``psi_i(x_hat) <= eta0_i - 2 L_i D^2``."""
    margins = problem.eta0 - 2.0 * problem.L * diameter ** 2 - evaluate_constraints(problem, x_hat)
    return FeasibilityReport(margins=margins, level_gaps=problem.eta - problem.eta0,
                             passed=bool(np.all(margins >= 0)))


def strong_feasibility_dual_bound(problem: ConstrainedProblem, x_hat, psi0_star: float,
                                  diameter: float) -> float:
    """A priori bound on ||lambda||_1 under strong feasibility (diagnostic)."""
    D2 = diameter ** 2
    return (evaluate_objective(problem, x_hat) - psi0_star + problem.L0 * D2) / (np.min(problem.L) * D2)


def stack_constraint_gradients(problem: ConstrainedProblem, x) -> Tuple[np.ndarray, np.ndarray]:
    """Values and gradients (rows) of the smooth constraint parts at ``x``."""
    values = np.empty(problem.m)
    grads = np.empty((problem.m, problem.d))
    for i, comp in enumerate(problem.constraints):
        values[i], grads[i] = comp.smooth.eval(x)
    return values, grads
