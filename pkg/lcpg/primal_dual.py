"""First-order subsolver for the proximal subproblem with a computable certificate.

The subproblem is::

    min  phi_0(x) = c0 + <q0, x - x^k> + (gamma/2)||x - x^k||^2 + chi_0(x)
    s.t. phi_i(x) = c_i + <Q_i, x - x^k> + (L_i/2)||x - x^k||^2 + chi_i(x) <= 0

Its Lagrangian is gamma-strongly convex in x with a catalog prox term, so the
dual function d(lam) and its gradient phi(z(lam)) are available in closed
form. We run accelerated projected ascent on d over ``{lam >= 0, ||lam|| <= B}``
and certify through weak duality.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .errors import DimensionError, InfeasibleStartError
from .prox import BallIndicator, ProxTerm, combine, prox, term_value

logger = logging.getLogger(__name__)

MIN_CURVATURE = 1e-12
MAX_CURVATURE_GROWTH = 1e12
STEP_GROWTH = 1.5


@dataclass(frozen=True, eq=False)
class ProxSubproblem:
    gamma: float
    anchor: np.ndarray
    q0: np.ndarray
    prox0: ProxTerm
    Q: np.ndarray
    L: np.ndarray
    offsets: np.ndarray
    prox_terms: Tuple[ProxTerm, ...]
    radius: Optional[float] = None
    obj_offset: float = 0.0

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        anchor = np.asarray(self.anchor, dtype=float).reshape(-1)
        L = np.asarray(self.L, dtype=float).reshape(-1)
        Q = np.asarray(self.Q, dtype=float).reshape(L.size, anchor.size)
        offsets = np.asarray(self.offsets, dtype=float).reshape(-1)
        if offsets.size != L.size or len(self.prox_terms) != L.size:
            raise DimensionError("constraint data lengths disagree")
        if np.any(L < 0):
            raise ValueError("constraint curvatures must be nonnegative")
        object.__setattr__(self, "anchor", anchor)
        object.__setattr__(self, "q0", np.asarray(self.q0, dtype=float).reshape(-1))
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "L", L)
        object.__setattr__(self, "offsets", offsets)
        object.__setattr__(self, "prox_terms", tuple(self.prox_terms))
        if np.any(self.constraint_values(anchor) >= 0):
            raise InfeasibleStartError("subproblem anchor is not strictly feasible",
                                       float(np.max(self.constraint_values(anchor))))

    @property
    def m(self) -> int:
        return self.L.size

    @property
    def d(self) -> int:
        return self.anchor.size

    def objective_value(self, x) -> float:
        diff = np.asarray(x, dtype=float) - self.anchor
        return (self.obj_offset + float(self.q0 @ diff) + 0.5 * self.gamma * float(diff @ diff)
                + term_value(self.prox0, x))

    def constraint_values(self, x) -> np.ndarray:
        diff = np.asarray(x, dtype=float) - self.anchor
        values = self.offsets + self.Q @ diff + 0.5 * self.L * float(diff @ diff)
        return values + np.array([term_value(t, x) for t in self.prox_terms])

    def lagrangian(self, x, lam) -> float:
        return self.objective_value(x) + float(np.asarray(lam) @ self.constraint_values(x))

    def minimize_lagrangian(self, lam) -> np.ndarray:
        lam = np.asarray(lam, dtype=float)
        Gam = self.gamma + float(lam @ self.L)
        pairs = [(1.0, self.prox0)] + list(zip(lam, self.prox_terms))
        if self.radius is not None:
            pairs.append((1.0, BallIndicator(self.radius)))
        center = self.anchor - (self.q0 + self.Q.T @ lam) / Gam
        return prox(combine(pairs), center, Gam)

    def dual(self, lam) -> Tuple[float, np.ndarray, np.ndarray]:
        """Dual value d(lam), the Lagrangian minimizer z and grad d = phi(z)."""
        z = self.minimize_lagrangian(lam)
        phi = self.constraint_values(z)
        return self.objective_value(z) + float(np.asarray(lam) @ phi), z, phi


@dataclass(frozen=True)
class Certificate:
    eps: float
    objective_gap_bound: float
    feasibility_norm: float
    lagrangian_gap_bound: float

    @property
    def passed(self) -> bool:
        return max(self.objective_gap_bound, self.feasibility_norm,
                   self.lagrangian_gap_bound) <= self.eps

    def at(self, eps: float) -> "Certificate":
        return Certificate(eps, self.objective_gap_bound, self.feasibility_norm,
                           self.lagrangian_gap_bound)


class PdStatus(str, enum.Enum):
    CERTIFIED = "certified"
    UNCERTIFIED = "uncertified"


@dataclass(frozen=True)
class PdResult:
    x: np.ndarray
    lam: np.ndarray
    certificate: Certificate
    status: PdStatus
    iterations: int


def _certify_at(sub: ProxSubproblem, x, lam, dual_value: float, eps: float) -> Certificate:
    phi = sub.constraint_values(x)
    obj = sub.objective_value(x)
    return Certificate(
        eps=eps,
        objective_gap_bound=max(obj - dual_value, 0.0),
        feasibility_norm=float(np.linalg.norm(np.maximum(phi, 0.0))),
        lagrangian_gap_bound=max(obj + float(lam @ phi) - dual_value, 0.0),
    )


def certificate_check(sub: ProxSubproblem, x, lambda_ref, eps: float) -> Certificate:
    lam = np.asarray(lambda_ref, dtype=float).reshape(-1)
    if lam.size != sub.m:
        raise DimensionError(f"expected {sub.m} multipliers, got {lam.size}")
    if np.any(lam < 0):
        raise ValueError("reference multipliers must be nonnegative")
    dual_value, _, _ = sub.dual(lam)
    return _certify_at(sub, np.asarray(x, dtype=float), lam, dual_value, eps)


def restore_feasibility(sub: ProxSubproblem, z) -> np.ndarray:
    """Move z toward the strictly feasible anchor until every constraint holds."""
    phi_z = sub.constraint_values(z)
    if sub.m == 0 or np.all(phi_z <= 0):
        return np.asarray(z, dtype=float)
    phi_a = sub.constraint_values(sub.anchor)
    viol = phi_z > 0
    t = float(np.max(phi_z[viol] / (phi_z[viol] - phi_a[viol])))
    t = min(max(t, 0.0), 1.0)
    return (1.0 - t) * z + t * sub.anchor


def _project(lam, B: float):
    lam = np.maximum(lam, 0.0)
    norm = np.linalg.norm(lam)
    return lam * (B / norm) if norm > B else lam


def pd_solve(sub: ProxSubproblem, B: float, eps: float, max_iter: int = 20000) -> PdResult:
    """Accelerated projected dual ascent with backtracking and adaptive restart.

    Backtracking and restarts look only at dual gradients, which stay
    accurate long after dual values have stopped separating in floating
    point. The curvature estimate relaxes after every accepted step.
    """
    if not B > 0:
        raise ValueError("dual radius B must be positive")
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    m = sub.m
    lam = np.zeros(m)
    d_lam, z_lam, _ = sub.dual(lam)
    x = restore_feasibility(sub, z_lam)
    cert = _certify_at(sub, x, lam, d_lam, eps)
    best = (cert, x, lam)
    if cert.passed or m == 0:
        status = PdStatus.CERTIFIED if cert.passed else PdStatus.UNCERTIFIED
        return PdResult(x, lam, cert, status, 1)

    step_L = max(float(np.sum(sub.Q ** 2)) / sub.gamma, MIN_CURVATURE)
    ceiling = step_L * MAX_CURVATURE_GROWTH
    y, t = lam.copy(), 1.0
    for it in range(1, max_iter + 1):
        _, _, grad_y = sub.dual(y)
        while True:
            cand = _project(y + grad_y / step_L, B)
            d_c, z_c, grad_c = sub.dual(cand)
            diff = cand - y
            if (np.linalg.norm(grad_c - grad_y) <= step_L * np.linalg.norm(diff)
                    or step_L >= ceiling):
                break
            step_L = min(2.0 * step_L, ceiling)
        if float(diff @ (cand - lam)) < 0:
            # gradient restart: momentum points against the ascent step
            y, t_next = cand, 1.0
        else:
            t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
            y = _project(cand + ((t - 1.0) / t_next) * (cand - lam), B)
        lam, d_lam, z_lam, t = cand, d_c, z_c, t_next
        step_L = max(step_L / STEP_GROWTH, MIN_CURVATURE)

        x = restore_feasibility(sub, z_lam)
        cert = _certify_at(sub, x, lam, d_lam, eps)
        if _worst(cert) < _worst(best[0]):
            best = (cert, x, lam)
        if cert.passed:
            logger.debug("pd: certified eps=%.1e after %d iterations", eps, it)
            return PdResult(x, lam, cert, PdStatus.CERTIFIED, it)

    cert, x, lam = best
    logger.debug("pd: budget %d exhausted, best bound %.3e", max_iter, _worst(cert))
    return PdResult(x, lam, cert, PdStatus.UNCERTIFIED, max_iter)


def _worst(cert: Certificate) -> float:
    return max(cert.objective_gap_bound, cert.feasibility_norm, cert.lagrangian_gap_bound)


def dual_bound_Bk(psi0_xk: float, psi0_lower_bound: float, delta_k) -> float:
    """B^k = (psi_0(x^k) - lower bound) / min_i delta_i^k."""
    delta_k = np.asarray(delta_k, dtype=float).reshape(-1)
    if delta_k.size == 0 or np.any(delta_k <= 0):
        raise ValueError("level increments must be strictly positive")
    return max(psi0_xk - psi0_lower_bound, 0.0) / float(np.min(delta_k))
