"""The convex majorized subproblem solved at every outer iteration."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .errors import InfeasibleStartError, UnsupportedTermError
from .ipm import DiagQcqp
from .primal_dual import ProxSubproblem
from .problem import ConstrainedProblem, stack_constraint_gradients
from .prox import ProxTerm, Zero, is_separable, l1_total_weight, soft_threshold, term_value

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class MajorizedSubproblem:
    """min <G, x - x^k> + (gamma/2)||x - x^k||^2 + chi_0(x)
    s.t. f_i(x^k) + <grad f_i(x^k), x - x^k> + (c_i/2)||x - x^k||^2 + chi_i(x) <= eta_i^k

    ``curvature`` is L_i, or 0 for constraints whose smooth part is concave.
    """

    anchor: np.ndarray
    G: np.ndarray
    gamma: float
    prox0: ProxTerm
    f_values: np.ndarray
    f_grads: np.ndarray
    curvature: np.ndarray
    prox_terms: Tuple[ProxTerm, ...]
    eta_k: np.ndarray
    f0_value: float = 0.0

    @property
    def m(self) -> int:
        return self.f_values.size

    def objective_value(self, x) -> float:
        """Model value psi_0^k(x), anchored so that psi_0^k(x^k) = f_0(x^k) + chi_0(x^k)."""
        diff = np.asarray(x, dtype=float) - self.anchor
        return (self.f0_value + float(self.G @ diff) + 0.5 * self.gamma * float(diff @ diff)
                + term_value(self.prox0, x))

    def constraint_values(self, x) -> np.ndarray:
        diff = np.asarray(x, dtype=float) - self.anchor
        values = self.f_values + self.f_grads @ diff + 0.5 * self.curvature * float(diff @ diff)
        return values + np.array([term_value(t, x) for t in self.prox_terms])

    def to_diag_qcqp(self) -> DiagQcqp:
        """Completed-square form; needs smooth-only constraints and a separable chi_0."""
        if any(not isinstance(t, Zero) for t in self.prox_terms):
            raise UnsupportedTermError("constraint prox terms have no diagonal-QCQP form")
        if not is_separable(self.prox0):
            raise UnsupportedTermError("objective prox term has no diagonal-QCQP form")
        if np.any(self.curvature <= 0):
            raise UnsupportedTermError("diagonal QCQP needs positive constraint curvature")
        L = self.curvature
        A = self.anchor[None, :] - self.f_grads / L[:, None]
        b = self.eta_k - self.f_values + np.sum(self.f_grads ** 2, axis=1) / (2.0 * L)
        return DiagQcqp(L0=self.gamma, a0=self.anchor - self.G / self.gamma, L=L, A=A, b=b,
                        alpha=l1_total_weight(self.prox0))

    def to_prox_subproblem(self, radius: Optional[float] = None) -> ProxSubproblem:
        return ProxSubproblem(
            gamma=self.gamma, anchor=self.anchor, q0=self.G, prox0=self.prox0,
            Q=self.f_grads, L=self.curvature, offsets=self.f_values - self.eta_k,
            prox_terms=self.prox_terms, radius=radius,
            obj_offset=self.f0_value,
        )


def build_subproblem(problem: ConstrainedProblem, x_k, eta_k, G_k, gamma_k: float,
                     drop_concave_curvature: bool = False) -> MajorizedSubproblem:
    x_k = np.asarray(x_k, dtype=float)
    eta_k = np.asarray(eta_k, dtype=float).reshape(-1)
    if not gamma_k > 0:
        raise ValueError("gamma_k must be positive")
    values, grads = stack_constraint_gradients(problem, x_k)
    curvature = problem.L.copy()
    if drop_concave_curvature:
        concave = np.array([c.concave for c in problem.constraints], dtype=bool)
        curvature[concave] = 0.0
    sub = MajorizedSubproblem(
        anchor=x_k, G=np.asarray(G_k, dtype=float), gamma=float(gamma_k),
        prox0=problem.objective.prox, f_values=values, f_grads=grads.reshape(problem.m, problem.d),
        curvature=curvature, prox_terms=tuple(c.prox for c in problem.constraints),
        eta_k=eta_k, f0_value=problem.objective.smooth.value(x_k),
    )
    margins = eta_k - sub.constraint_values(x_k)
    if problem.m and np.min(margins) <= 0:
        raise InfeasibleStartError(
            f"anchor violates level eta^k (worst margin {np.min(margins):.3e})", float(np.min(margins)))
    return sub


@dataclass(frozen=True)
class ScadStep:
    x: np.ndarray
    lam: float
    bisections: int


def solve_scad_subproblem(w0: float, beta: float, c, r: float, anchor, G, gamma: float,
                          rel_tol: float = 1e-15, residual_tol: float = 1e-10) -> ScadStep:
    """min <G, x> + (gamma/2)||x - x^k||^2 + w0 ||x||_1  s.t.  beta ||x||_1 + <c, x> <= r.

    The multiplier is located by bisection; x(lam) is a soft-threshold.
    """
    c = np.asarray(c, dtype=float)
    anchor = np.asarray(anchor, dtype=float)
    G = np.asarray(G, dtype=float)

    def x_of(lam):
        return soft_threshold(anchor - (G + lam * c) / gamma, (w0 + lam * beta) / gamma)

    def slack(x):
        return beta * float(np.abs(x).sum()) + float(c @ x) - r

    x0 = x_of(0.0)
    if slack(x0) <= 0:
        return ScadStep(x0, 0.0, 0)
    if np.max(np.abs(c), initial=0.0) <= beta and r < 0:
        raise InfeasibleStartError("linearized SCAD level is infeasible", -r)

    lo, hi = 0.0, 1.0
    doublings = 0
    while slack(x_of(hi)) > 0:
        lo, hi = hi, 2.0 * hi
        doublings += 1
        if doublings > 1100:
            raise InfeasibleStartError("linearized SCAD level is infeasible", slack(x_of(hi)))
    steps = 0
    while hi - lo > rel_tol * max(1.0, hi):
        if -slack(x_of(hi)) <= residual_tol * max(1.0, abs(r)):
            break
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if slack(x_of(mid)) > 0:
            lo = mid
        else:
            hi = mid
        steps += 1
    return ScadStep(x_of(hi), hi, steps)


def solve_majorized_scad(sub: MajorizedSubproblem) -> ScadStep:
    """Dispatch a single-constraint subproblem with zero curvature to the bisection solver."""
    if sub.m != 1 or sub.curvature[0] != 0.0:
        raise UnsupportedTermError("scad subsolver needs one constraint with zero curvature")
    beta = 0.0 if isinstance(sub.prox_terms[0], Zero) else l1_total_weight(sub.prox_terms[0])
    w0 = 0.0 if isinstance(sub.prox0, Zero) else l1_total_weight(sub.prox0)
    c = sub.f_grads[0]
    r = float(sub.eta_k[0] - sub.f_values[0] + c @ sub.anchor)
    # <G, x - x^k> and <G, x> differ by a constant
    return solve_scad_subproblem(w0, beta, c, r, sub.anchor, sub.G, sub.gamma)
