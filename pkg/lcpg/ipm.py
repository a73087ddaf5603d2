"""Path-following barrier method for diagonal QCQPs.

Problem shape::

    min  (L0/2)||x - a0||^2 + alpha ||x||_1
    s.t. (L_i/2)||x - a_i||^2 - b_i <= 0,   i = 1..m

The objective is moved into an epigraph variable ``eta`` and the iterate
``u = (eta, x)`` is kept inside an artificial ball of radius R. A positive
``alpha`` adds split variables ``-s <= x <= s <= R_s``; their block of the
Newton system is diagonal and is eliminated before the low-rank solve, so
every Newton system keeps the ``N N' + Gamma`` shape.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Protocol, Tuple

import numpy as np
from scipy import linalg as sla

from .errors import (DimensionError, FactorizationError, InfeasibleStartError,
                     InteriorViolationError, IterationBudgetError, NumericalFailureError)
from .prox import L1, dist_to_interval, soft_threshold, subdiff_bounds

logger = logging.getLogger(__name__)

MAX_HALVINGS = 60
SOLVE_RTOL = 1e-9
DECREMENT_RTOL = 1e-10
RECENTER_TOL = 1e-9
DUAL_RESIDUAL_RTOL = 1e-6


@dataclass(frozen=True, eq=False)
class DiagQcqp:
    L0: float
    a0: np.ndarray
    L: np.ndarray
    A: np.ndarray
    b: np.ndarray
    alpha: float = 0.0

    def __post_init__(self):
        a0 = np.asarray(self.a0, dtype=float).reshape(-1)
        L = np.asarray(self.L, dtype=float).reshape(-1)
        b = np.asarray(self.b, dtype=float).reshape(-1)
        A = np.asarray(self.A, dtype=float).reshape(L.size, a0.size)
        if b.size != L.size:
            raise DimensionError(f"{L.size} curvatures but {b.size} offsets")
        if not self.L0 > 0 or np.any(L <= 0):
            raise ValueError("all curvatures must be strictly positive")
        if self.alpha < 0:
            raise ValueError("l1 weight must be nonnegative")
        for name, value in (("a0", a0), ("L", L), ("A", A), ("b", b)):
            object.__setattr__(self, name, value)

    @property
    def d(self) -> int:
        return self.a0.size

    @property
    def m(self) -> int:
        return self.L.size

    def objective_value(self, x) -> float:
        x = np.asarray(x, dtype=float)
        diff = x - self.a0
        return 0.5 * self.L0 * float(diff @ diff) + self.alpha * float(np.abs(x).sum())

    def constraint_values(self, x) -> np.ndarray:
        diff = np.asarray(x, dtype=float)[None, :] - self.A
        return 0.5 * self.L * np.einsum("ij,ij->i", diff, diff) - self.b

    def stationarity_residual(self, x, lam, subgradient=None) -> float:
        """Norm of the Lagrangian gradient at ``(x, lam)``.

        The l1 part uses its closest subgradient at x, or ``subgradient``
        clipped to ``[-alpha, alpha]`` when one is supplied.
        """
        x = np.asarray(x, dtype=float)
        lam = np.asarray(lam, dtype=float).reshape(-1)
        grad = self.L0 * (x - self.a0)
        if self.m:
            grad = grad + ((lam * self.L)[:, None] * (x[None, :] - self.A)).sum(axis=0)
        if self.alpha > 0 and subgradient is None:
            lo, hi = subdiff_bounds(L1(self.alpha), x)
            return float(np.linalg.norm(dist_to_interval(grad, lo, hi)))
        if self.alpha > 0:
            grad = grad + np.clip(subgradient, -self.alpha, self.alpha)
        return float(np.linalg.norm(grad))

    def residual_tolerance(self, x, rtol: float = DUAL_RESIDUAL_RTOL) -> float:
        return rtol * (1.0 + self.L0 * float(np.linalg.norm(np.asarray(x, dtype=float) - self.a0)))


@dataclass(frozen=True, eq=False)
class EpigraphForm:
    qcqp: DiagQcqp
    R: float
    R_s: float
    upsilon: int

    @property
    def split(self) -> bool:
        return self.qcqp.alpha > 0

    @property
    def size(self) -> int:
        d = self.qcqp.d
        return 1 + d + (d if self.split else 0)

    def cost(self) -> np.ndarray:
        """Linear objective of the lifted problem: eta (+ alpha * sum s)."""
        c = np.zeros(self.size)
        c[0] = 1.0
        if self.split:
            c[1 + self.qcqp.d:] = self.qcqp.alpha
        return c

    def unpack(self, v) -> Tuple[float, np.ndarray, Optional[np.ndarray]]:
        d = self.qcqp.d
        return float(v[0]), v[1:1 + d], (v[1 + d:] if self.split else None)


def build_epigraph(q: DiagQcqp, x_hat, delta: float, radius: float = 10.0):
    """Lift ``q`` and return ``(EpigraphForm, u_hat)`` with u_hat interior."""
    x_hat = np.asarray(x_hat, dtype=float).reshape(-1)
    if x_hat.size != q.d:
        raise DimensionError(f"x_hat has length {x_hat.size}, expected {q.d}")
    if not delta > 0:
        raise ValueError("delta must be positive")
    g = q.constraint_values(x_hat)
    if q.m and np.max(g) > -delta:
        raise InfeasibleStartError(
            f"x_hat is not {delta:g}-strictly feasible (max constraint {np.max(g):.3e})",
            float(np.max(g) + delta))

    diff = x_hat - q.a0
    eta_hat = 0.5 * q.L0 * float(diff @ diff) + delta
    u_hat = np.concatenate(([eta_hat], x_hat))
    u_norm = float(np.linalg.norm(u_hat))
    reach = 0.0
    if q.m:
        reach = float(np.max(np.linalg.norm(q.A, axis=1) + np.sqrt(2.0 * np.maximum(q.b, 0.0) / q.L)))
    R = max(radius, 2.0 * u_norm,
            4.0 * (u_norm + q.alpha * float(np.abs(x_hat).sum()) + float(np.linalg.norm(q.a0)) + reach))
    d = q.d
    if q.alpha > 0:
        v_hat = np.concatenate((u_hat, np.abs(x_hat) + 1.0))
        upsilon = q.m + 2 + 3 * d
    else:
        v_hat = u_hat
        upsilon = q.m + 2
    return EpigraphForm(q, R=R, R_s=R + 1.0, upsilon=upsilon), v_hat


@dataclass(frozen=True)
class _Slacks:
    r0: float
    r: np.ndarray
    rb: float
    lower: Optional[np.ndarray] = None
    upper: Optional[np.ndarray] = None
    cap: Optional[np.ndarray] = None

    def interior(self) -> bool:
        ok = self.r0 > 0 and self.rb > 0 and bool(np.all(self.r > 0))
        if ok and self.lower is not None:
            ok = bool(np.all(self.lower > 0) and np.all(self.upper > 0) and np.all(self.cap > 0))
        return ok


def _slacks(e: EpigraphForm, v) -> _Slacks:
    q = e.qcqp
    eta, x, s = e.unpack(v)
    diff0 = x - q.a0
    r0 = eta - 0.5 * q.L0 * float(diff0 @ diff0)
    r = -q.constraint_values(x)
    u_sq = eta * eta + float(x @ x)
    rb = 0.5 * (e.R ** 2 - u_sq)
    if s is None:
        return _Slacks(r0, r, rb)
    return _Slacks(r0, r, rb, lower=s - x, upper=s + x, cap=e.R_s - s)


def is_interior(e: EpigraphForm, v) -> bool:
    return _slacks(e, v).interior()


def barrier_value(e: EpigraphForm, v) -> float:
    sl = _slacks(e, v)
    if not sl.interior():
        return math.inf
    value = -math.log(sl.r0) - float(np.sum(np.log(sl.r))) - math.log(sl.rb)
    if sl.lower is not None:
        value -= float(np.sum(np.log(sl.lower)) + np.sum(np.log(sl.upper)) + np.sum(np.log(sl.cap)))
    return value


def _backward_error(apply, y, rhs, h_norm: float) -> float:
    """Normwise backward error ``||H y - rhs|| / (||H|| ||y|| + ||rhs||)``."""
    denom = h_norm * float(np.linalg.norm(y)) + float(np.linalg.norm(rhs))
    if denom == 0.0:
        return 0.0
    return float(np.linalg.norm(apply(y) - rhs)) / denom


def _dense_solve(H, rhs) -> np.ndarray:
    """Cholesky solve after symmetric scaling to a unit diagonal."""
    scale = 1.0 / np.sqrt(np.diag(H))
    factor = sla.cho_factor(H * scale[:, None] * scale[None, :], lower=True, check_finite=True)
    return scale * sla.cho_solve(factor, scale * rhs)


def smw_solve(N, gamma, rhs) -> np.ndarray:
    """Solve ``(N N' + diag(gamma)) y = rhs``.

    Fewer columns than rows goes through Sherman-Morrison-Woodbury on the
    ``Gamma^{-1/2}``-scaled factor with one refinement step. That answer is
    kept only when its backward error is at rounding level; otherwise, and
    whenever there are at least as many columns as rows, the full matrix is
    factored.
    """
    gamma = np.asarray(gamma, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    N = np.asarray(N, dtype=float).reshape(gamma.size, -1)
    if np.any(gamma <= 0) or not np.all(np.isfinite(gamma)):
        raise FactorizationError("diagonal part must be positive and finite")
    k = N.shape[1]
    if k == 0:
        return rhs / gamma

    def apply(y):
        return N @ (N.T @ y) + gamma * y

    h_norm = float(np.sum(N * N)) + float(np.max(gamma))
    try:
        if k < gamma.size:
            root = np.sqrt(gamma)
            M = N / root[:, None]
            factor = sla.cho_factor(np.eye(k) + M.T @ M, lower=True, check_finite=True)

            def woodbury(r):
                z = r / root
                return (z - M @ sla.cho_solve(factor, M.T @ z)) / root

            y = woodbury(rhs)
            y = y + woodbury(rhs - apply(y))
            if _backward_error(apply, y, rhs, h_norm) <= SOLVE_RTOL:
                return y
            logger.debug("woodbury solve lost accuracy; factoring the full matrix")
        y = _dense_solve(N @ N.T + np.diag(gamma), rhs)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise FactorizationError(f"Newton system factorization failed: {exc}") from exc
    err = _backward_error(apply, y, rhs, h_norm)
    if not np.all(np.isfinite(y)) or err > SOLVE_RTOL:
        raise FactorizationError(f"Newton system solve is inaccurate (backward error {err:.2e})")
    return y


class BarrierHessian:
    """Hessian handle: ``N N' + Gamma`` on u, plus the diagonal split block."""

    def __init__(self, N, gamma, d: int, p_xx=None, p_xs=None, p_ss=None):
        self.N = N
        self.gamma = gamma
        self.d = d
        self.p_xx = p_xx
        self.p_xs = p_xs
        self.p_ss = p_ss
        if p_xx is not None:
            reduced = gamma.copy()
            reduced[1:] += p_xx - p_xs ** 2 / p_ss
            self.reduced_gamma = reduced
        else:
            self.reduced_gamma = gamma

    def matvec(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        n_u = 1 + self.d
        vu = v[:n_u]
        out_u = self.N @ (self.N.T @ vu) + self.gamma * vu
        if self.p_ss is None:
            return out_u
        vx, vs = vu[1:], v[n_u:]
        out_u[1:] += self.p_xx * vx + self.p_xs * vs
        return np.concatenate((out_u, self.p_xs * vx + self.p_ss * vs))

    def norm_bound(self) -> float:
        bound = float(np.sum(self.N * self.N)) + float(np.max(self.gamma))
        if self.p_ss is not None:
            bound += float(np.max(self.p_xx + np.abs(self.p_xs) + self.p_ss))
        return bound

    def solve(self, rhs) -> np.ndarray:
        rhs = np.asarray(rhs, dtype=float)
        n_u = 1 + self.d
        if self.p_ss is None:
            return smw_solve(self.N, self.gamma, rhs)
        ru, rs = rhs[:n_u].copy(), rhs[n_u:]
        ru[1:] -= self.p_xs * rs / self.p_ss
        du = smw_solve(self.N, self.reduced_gamma, ru)
        ds = (rs - self.p_xs * du[1:]) / self.p_ss
        y = np.concatenate((du, ds))
        h_norm = self.norm_bound()
        if _backward_error(self.matvec, y, rhs, h_norm) <= SOLVE_RTOL:
            return y
        logger.debug("split-block elimination lost accuracy; factoring the full matrix")
        try:
            y = _dense_solve(self.dense(), rhs)
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise FactorizationError(f"Newton system factorization failed: {exc}") from exc
        err = _backward_error(self.matvec, y, rhs, h_norm)
        if not np.all(np.isfinite(y)) or err > SOLVE_RTOL:
            raise FactorizationError(f"Newton system solve is inaccurate (backward error {err:.2e})")
        return y

    def dense(self) -> np.ndarray:
        H_u = self.N @ self.N.T + np.diag(self.gamma)
        if self.p_ss is None:
            return H_u
        d = self.d
        n = 1 + 2 * d
        H = np.zeros((n, n))
        H[:1 + d, :1 + d] = H_u
        H[1:1 + d, 1:1 + d] += np.diag(self.p_xx)
        H[1:1 + d, 1 + d:] = np.diag(self.p_xs)
        H[1 + d:, 1:1 + d] = np.diag(self.p_xs)
        H[1 + d:, 1 + d:] = np.diag(self.p_ss)
        return H


def _barrier_parts(e: EpigraphForm, v):
    q = e.qcqp
    sl = _slacks(e, v)
    if not sl.interior():
        raise InteriorViolationError("point is on or outside the barrier domain")
    eta, x, s = e.unpack(v)
    d = q.d
    theta0, theta, theta_b = 1.0 / sl.r0, 1.0 / sl.r, 1.0 / sl.rb

    # columns theta_i * grad g~_i for g~_0, g~_1..m, ball
    N = np.zeros((1 + d, q.m + 2))
    N[0, 0] = -theta0
    N[1:, 0] = theta0 * q.L0 * (x - q.a0)
    if q.m:
        N[1:, 1:q.m + 1] = (theta * q.L)[None, :] * (x[:, None] - q.A.T)
    N[0, -1] = theta_b * eta
    N[1:, -1] = theta_b * x
    grad_u = N.sum(axis=1)

    gamma = np.empty(1 + d)
    gamma[0] = theta_b
    gamma[1:] = theta0 * q.L0 + float(theta @ q.L) + theta_b

    if s is None:
        return grad_u, BarrierHessian(N, gamma, d), theta0, theta, theta_b
    p, qq, r = 1.0 / sl.lower, 1.0 / sl.upper, 1.0 / sl.cap
    grad = np.concatenate((grad_u, -p - qq + r))
    grad[1:1 + d] += p - qq
    p2, q2 = p * p, qq * qq
    H = BarrierHessian(N, gamma, d, p_xx=p2 + q2, p_xs=q2 - p2, p_ss=p2 + q2 + r * r)
    return grad, H, theta0, theta, theta_b


def barrier_gradient(e: EpigraphForm, v) -> np.ndarray:
    return _barrier_parts(e, v)[0]


def barrier_oracle(e: EpigraphForm, u, tau: float):
    """Gradient of ``tau * cost'u + phi(u)`` and the factored Hessian handle."""
    grad, H, *_ = _barrier_parts(e, np.asarray(u, dtype=float))
    return tau * e.cost() + grad, H


class CenteringObjective(Protocol):
    def newton_step(self, v: np.ndarray) -> Tuple[np.ndarray, float]:
        """Return ``(H^{-1} grad, decrement)`` at v."""

    def contains(self, v: np.ndarray) -> bool:
        ...


class PathPoint:
    """``lin' v + phi(v)`` for a fixed linear term; the object Newton centers."""

    def __init__(self, e: EpigraphForm, lin):
        self.e = e
        self.lin = np.asarray(lin, dtype=float)

    def newton_step(self, v):
        grad, H, *_ = _barrier_parts(self.e, v)
        g = self.lin + grad
        step = H.solve(g)
        dec_sq = float(g @ step)
        if dec_sq < -DECREMENT_RTOL * float(np.linalg.norm(g) * np.linalg.norm(step)):
            raise FactorizationError(f"negative Newton decrement squared {dec_sq:.3e}")
        return step, math.sqrt(max(dec_sq, 0.0))

    def contains(self, v) -> bool:
        return is_interior(self.e, v)


def centering(e: EpigraphForm, tau: float) -> PathPoint:
    return PathPoint(e, tau * e.cost())


def newton_decrement(f, v, tau: Optional[float] = None) -> float:
    if isinstance(f, EpigraphForm):
        f = centering(f, 0.0 if tau is None else tau)
    return f.newton_step(np.asarray(v, dtype=float))[1]


@dataclass(frozen=True)
class NewtonResult:
    v: np.ndarray
    steps: int
    decrement: float


def damped_newton(f: CenteringObjective, v0, kappa: float, *, tau: Optional[float] = None,
                  max_steps: int = 200) -> NewtonResult:
    """Damped Newton iterations ``v - H^{-1} g / (1 + n)`` until ``n <= kappa``."""
    if not 0 < kappa < 1:
        raise ValueError(f"kappa must lie in (0, 1), got {kappa}")
    if isinstance(f, EpigraphForm):
        f = centering(f, tau)
    v = np.array(v0, dtype=float)
    if not f.contains(v):
        raise InteriorViolationError("Newton start point is not interior")
    steps = 0
    while True:
        direction, dec = f.newton_step(v)
        if dec <= kappa:
            return NewtonResult(v, steps, dec)
        if steps >= max_steps:
            raise IterationBudgetError(
                f"Newton did not reach decrement {kappa} in {max_steps} steps (at {dec:.3e})")
        t = 1.0 / (1.0 + dec)
        for _ in range(MAX_HALVINGS + 1):
            candidate = v - t * direction
            if f.contains(candidate):
                break
            t *= 0.5
        else:
            raise NumericalFailureError("damped Newton step could not stay interior")
        v = candidate
        steps += 1


def recenter(f: CenteringObjective, v0, tol: float = RECENTER_TOL, max_steps: int = 30) -> NewtonResult:
    """Newton steps from a centered point until the decrement is below ``tol``.

    Stops early once the decrement no longer drops, which happens at the
    rounding floor of the Newton system.
    """
    v = np.array(v0, dtype=float)
    direction, dec = f.newton_step(v)
    steps = 0
    while dec > tol and steps < max_steps:
        t = 1.0 if dec < 0.5 else 1.0 / (1.0 + dec)
        candidate = v - t * direction
        if not f.contains(candidate):
            break
        next_direction, next_dec = f.newton_step(candidate)
        if next_dec >= dec:
            break
        v, direction, dec = candidate, next_direction, next_dec
        steps += 1
    return NewtonResult(v, steps, dec)


@dataclass(frozen=True)
class DualEstimate:
    lam: np.ndarray
    raw: np.ndarray
    ball_multiplier: float
    residual: float


def recover_duals(e: EpigraphForm, v, tau: float) -> DualEstimate:
    """Multipliers from the barrier: raw theta_i / tau, normalized by theta_0.

    The residual is the stationarity of the original problem at ``(x, lam)``.
    With an l1 term the split barrier supplies the subgradient, since an
    interior x has no exact zeros.
    """
    q = e.qcqp
    v = np.asarray(v, dtype=float)
    _, _, theta0, theta, theta_b = _barrier_parts(e, v)
    lam = theta / theta0
    _, x, _ = e.unpack(v)
    subgradient = None
    if e.split:
        sl = _slacks(e, v)
        subgradient = (1.0 / sl.lower - 1.0 / sl.upper) / theta0
    residual = q.stationarity_residual(x, lam, subgradient)
    return DualEstimate(lam=lam, raw=theta / tau, ball_multiplier=theta_b / theta0, residual=residual)


@dataclass
class IpmStats:
    newton_steps_phase0: int = 0
    newton_steps_phase1: int = 0
    tau_phase0: List[float] = field(default_factory=list)
    tau_phase1: List[float] = field(default_factory=list)
    gap_bound: float = math.inf
    upsilon: int = 0
    radius: float = 0.0
    ball_multiplier: float = 0.0
    residual: float = math.inf

    @property
    def newton_steps(self) -> int:
        return self.newton_steps_phase0 + self.newton_steps_phase1


@dataclass(frozen=True)
class IpmResult:
    x: np.ndarray
    eta: float
    lam: np.ndarray
    stats: IpmStats


def _phase_one_entry(e: EpigraphForm, v, kappa: float) -> float:
    """Largest tau with n(phi_tau, v) <= kappa; n^2 is quadratic in tau."""
    grad, H, *_ = _barrier_parts(e, v)
    c = e.cost()
    Hc, Hg = H.solve(c), H.solve(grad)
    a, b, cc = float(c @ Hc), float(c @ Hg), float(grad @ Hg)
    disc = b * b - a * (cc - kappa * kappa)
    if a <= 0 or disc < 0:
        raise NumericalFailureError("phase-one entry parameter has no real root")
    tau = (-b + math.sqrt(disc)) / a
    if tau <= 0:
        raise NumericalFailureError("phase zero ended too far from the analytic center")
    return tau


def solve_path_following(q: DiagQcqp, x_hat, delta: float, eps: float, *,
                         kappa: float = 0.25, gamma: float = 0.25, tau0: float = 1.0,
                         radius: float = 10.0, max_newton: int = 200,
                         max_path_steps: int = 100000,
                         residual_rtol: float = DUAL_RESIDUAL_RTOL) -> IpmResult:
    """Two-phase path following to a point with duality gap at most ``eps``.

    The final point is recentered tightly before the multipliers are read
    off; a stationarity residual above ``residual_rtol`` (relative to the
    objective gradient) raises :class:`NumericalFailureError`.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    e, v = build_epigraph(q, x_hat, delta, radius)
    ups = e.upsilon
    ratio = 1.0 + gamma / math.sqrt(ups)
    stats = IpmStats(upsilon=ups, radius=e.R)

    # phase zero: reverse path following towards the analytic center
    w = -barrier_gradient(e, v)
    tau = tau0
    analytic = centering(e, 0.0)
    while newton_decrement(analytic, v) > 0.75 * kappa:
        if len(stats.tau_phase0) >= max_path_steps:
            raise IterationBudgetError("phase zero did not reach the analytic center")
        tau /= ratio
        res = damped_newton(PathPoint(e, tau * w), v, kappa / 2, max_steps=max_newton)
        v = res.v
        stats.newton_steps_phase0 += res.steps
        stats.tau_phase0.append(tau)

    # phase one: follow the central path of tau * cost'u + phi(u)
    tau = _phase_one_entry(e, v, kappa)
    s = max(math.ceil(math.sqrt(ups) / gamma * math.log(2.0 * ups / (tau * eps))) - 1, 0)
    i = 0
    while i <= s or ups / tau > eps:
        if i > s + max_path_steps:
            raise IterationBudgetError("phase one did not certify the requested gap")
        tau *= ratio
        res = damped_newton(centering(e, tau), v, kappa, max_steps=max_newton)
        v = res.v
        stats.newton_steps_phase1 += res.steps
        stats.tau_phase1.append(tau)
        i += 1

    final = recenter(centering(e, tau), v)
    v = final.v
    stats.newton_steps_phase1 += final.steps
    duals = recover_duals(e, v, tau)
    stats.gap_bound = ups / tau
    stats.ball_multiplier = duals.ball_multiplier
    stats.residual = duals.residual
    if duals.ball_multiplier > 1e-6:
        logger.warning("artificial ball carries multiplier %.3e (R=%.3e)", duals.ball_multiplier, e.R)
    eta, x, _ = e.unpack(v)
    limit = q.residual_tolerance(x, residual_rtol)
    if duals.residual > limit:
        raise NumericalFailureError(
            f"recovered multipliers miss stationarity: residual {duals.residual:.3e} > {limit:.3e} "
            f"(final decrement {final.decrement:.2e})")
    logger.debug("ipm: d=%d m=%d newton=%d+%d gap<=%.2e", q.d, q.m,
                 stats.newton_steps_phase0, stats.newton_steps_phase1, stats.gap_bound)
    return IpmResult(x=x.copy(), eta=eta, lam=duals.lam, stats=stats)


def _x_of_lambda(q: DiagQcqp, lam):
    Gam = q.L0 + float(lam @ q.L)
    c = (q.L0 * q.a0 + (lam * q.L) @ q.A) / Gam
    return soft_threshold(c, q.alpha / Gam), Gam


@dataclass(frozen=True)
class ActiveSetSolution:
    x: np.ndarray
    lam: np.ndarray
    iterations: int


def refine_active_set(q: DiagQcqp, x, lam, tol: Optional[float] = None,
                      max_newton: int = 50) -> Optional[ActiveSetSolution]:
    """Polish an interior-point pair into an exact KKT pair.

    Newton's method on ``g_A(x(lam)) = 0`` over a working set A, where
    ``x(lam)`` minimizes the Lagrangian in closed form. Returns None when no
    working set certifies within the budget.
    """
    x = np.asarray(x, dtype=float)
    lam = np.maximum(np.asarray(lam, dtype=float).reshape(-1), 0.0)
    m = q.m
    if tol is None:
        tol = 1e-12 * (1.0 + float(np.max(np.abs(q.b), initial=0.0)))
    g = q.constraint_values(x)
    scale = max(1.0, float(np.max(lam, initial=0.0)))
    active = sorted(i for i in range(m) if lam[i] > 1e-8 * scale or g[i] >= -1e-7 * (1 + abs(q.b[i])))
    total = 0

    for _ in range(2 * m + 2):
        lam_w = np.zeros(m)
        lam_w[active] = lam[active]
        if active:
            for _ in range(max_newton):
                xl, Gam = _x_of_lambda(q, lam_w)
                if Gam <= 0:
                    return None
                res = q.constraint_values(xl)[active]
                if np.max(np.abs(res)) <= tol:
                    break
                support = xl != 0 if q.alpha > 0 else np.ones(q.d, dtype=bool)
                A_act = q.A[active]
                L_act = q.L[active]
                dx = support[None, :] * (L_act[:, None] * (A_act - xl[None, :])) / Gam
                J = L_act[:, None] * ((xl[None, :] - A_act) @ dx.T)
                try:
                    step = np.linalg.solve(J, res)
                except np.linalg.LinAlgError:
                    return None
                lam_w[active] -= step
                total += 1
            else:
                return None
        if active and np.min(lam_w[active]) < -tol:
            worst = active[int(np.argmin(lam_w[active]))]
            active.remove(worst)
            lam[worst] = 0.0
            continue
        lam_w = np.maximum(lam_w, 0.0)
        xl, _ = _x_of_lambda(q, lam_w)
        g = q.constraint_values(xl)
        inactive = [i for i in range(m) if i not in active]
        if inactive and np.max(g[inactive]) > tol:
            worst = inactive[int(np.argmax(g[inactive]))]
            active = sorted(active + [worst])
            lam = lam_w.copy()
            continue
        return ActiveSetSolution(x=xl, lam=lam_w, iterations=total)
    return None
