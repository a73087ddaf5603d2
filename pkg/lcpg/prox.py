"""Simple convex terms, their proximal maps and coordinate subdifferentials.

The catalog is deliberately small: the zero function, a weighted l1 norm,
the indicator of a Euclidean ball and nonnegative combinations of those.
The SCAD building block h(beta, theta) lives here too because the sparse
learning constraint splits into ``beta * ||x||_1`` (a catalog term) and the
smooth concave part ``-sum_j h(x_j)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Tuple, Union

import numpy as np

from .errors import DimensionError, UnsupportedTermError


@dataclass(frozen=True)
class Zero:
    pass


@dataclass(frozen=True)
class L1:
    weight: float = 1.0

    def __post_init__(self):
        if not self.weight > 0:
            raise ValueError(f"L1 weight must be positive, got {self.weight}")


@dataclass(frozen=True, eq=False)
class BallIndicator:
    radius: float
    center: np.ndarray | None = None

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"ball radius must be positive, got {self.radius}")
        if self.center is not None:
            object.__setattr__(self, "center", np.asarray(self.center, dtype=float))

    @property
    def centered_at_origin(self) -> bool:
        return self.center is None or not np.any(self.center)


@dataclass(frozen=True)
class WeightedSum:
    terms: Tuple[Tuple[float, "ProxTerm"], ...] = field(default_factory=tuple)

    def __post_init__(self):
        terms = tuple((float(c), t) for c, t in self.terms)
        for coef, _ in terms:
            if coef < 0:
                raise ValueError("weighted-sum coefficients must be nonnegative")
        object.__setattr__(self, "terms", terms)


ProxTerm = Union[Zero, L1, BallIndicator, WeightedSum]


def combine(pairs: Sequence[Tuple[float, ProxTerm]]) -> ProxTerm:
    """Nonnegative combination ``sum_i c_i * term_i`` with zero terms dropped."""
    kept = tuple((float(c), t) for c, t in pairs if c > 0 and not isinstance(t, Zero))
    if not kept:
        return Zero()
    if len(kept) == 1 and kept[0][0] == 1.0:
        return kept[0][1]
    return WeightedSum(kept)


def _flatten(term: ProxTerm, scale: float = 1.0):
    """Reduce a term to (total l1 weight, list of ball indicators)."""
    if isinstance(term, Zero):
        return 0.0, []
    if isinstance(term, L1):
        return scale * term.weight, []
    if isinstance(term, BallIndicator):
        return 0.0, ([term] if scale > 0 else [])
    if isinstance(term, WeightedSum):
        weight, balls = 0.0, []
        for coef, sub in term.terms:
            w, b = _flatten(sub, scale * coef)
            weight += w
            balls.extend(b)
        return weight, balls
    raise UnsupportedTermError(f"unknown prox term {term!r}")


def is_separable(term: ProxTerm) -> bool:
    _, balls = _flatten(term)
    return not balls


def l1_total_weight(term: ProxTerm) -> float:
    """Total l1 weight of a separable term; raises for ball indicators."""
    weight, balls = _flatten(term)
    if balls:
        raise UnsupportedTermError("ball indicator is not coordinatewise separable")
    return weight


def soft_threshold(v, t):
    v = np.asarray(v, dtype=float)
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def _project_ball(v: np.ndarray, ball: BallIndicator) -> np.ndarray:
    center = np.zeros_like(v) if ball.center is None else ball.center
    diff = v - center
    norm = np.linalg.norm(diff)
    if norm <= ball.radius:
        return v.copy()
    return center + diff * (ball.radius / norm)


def term_value(term: ProxTerm, x) -> float:
    x = np.asarray(x, dtype=float)
    weight, balls = _flatten(term)
    for ball in balls:
        center = 0.0 if ball.center is None else ball.center
        if np.linalg.norm(x - center) > ball.radius * (1.0 + 1e-12) + 1e-15:
            return math.inf
    return weight * float(np.abs(x).sum()) if weight else 0.0


def prox(term: ProxTerm, center, gamma: float) -> np.ndarray:
    """Exact minimizer of ``term(x) + (gamma/2) * ||x - center||^2``."""
    if not gamma > 0:
        raise ValueError(f"prox parameter must be positive, got {gamma}")
    center = np.asarray(center, dtype=float)
    weight, balls = _flatten(term)
    if not balls:
        return soft_threshold(center, weight / gamma) if weight else center.copy()
    if len(balls) > 1:
        raise UnsupportedTermError("no closed-form prox for an intersection of balls")
    ball = balls[0]
    if weight == 0.0:
        return _project_ball(center, ball)
    if not ball.centered_at_origin:
        raise UnsupportedTermError("no closed-form prox for l1 plus an off-center ball")
    # soft-threshold then project is exact for origin-centred balls
    return _project_ball(soft_threshold(center, weight / gamma), ball)


def subdiff_bounds(term: ProxTerm, x) -> Tuple[np.ndarray, np.ndarray]:
    """Coordinatewise subdifferential intervals of a separable term."""
    x = np.asarray(x, dtype=float)
    weight = l1_total_weight(term)
    lo = np.where(x > 0, weight, -weight)
    hi = np.where(x < 0, -weight, weight)
    return lo, hi


def subdiff_interval(term: ProxTerm, x, j: int) -> Tuple[float, float]:
    x = np.asarray(x, dtype=float)
    if not 0 <= j < x.size:
        raise DimensionError(f"coordinate {j} out of range for dimension {x.size}")
    lo, hi = subdiff_bounds(term, x[j:j + 1])
    return float(lo[0]), float(hi[0])


def dist_to_interval(g, lo, hi):
    """dist(0, g + [lo, hi]) elementwise."""
    g = np.asarray(g, dtype=float)
    return np.maximum(0.0, np.maximum(g + lo, -(g + hi)))


@dataclass(frozen=True)
class ScadParams:
    beta: float
    theta: float

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError(f"SCAD beta must be positive, got {self.beta}")
        if not self.theta > 1:
            raise ValueError(f"SCAD theta must exceed 1, got {self.theta}")

    @property
    def smoothness(self) -> float:
        return 1.0 / (self.theta - 1.0)


def _scalar_or_array(out, u):
    return float(out) if np.ndim(u) == 0 else out


def scad_value(u, p: ScadParams):
    a = np.abs(np.asarray(u, dtype=float))
    mid = (a - p.beta) ** 2 / (2.0 * (p.theta - 1.0))
    outer = p.beta * a - (p.theta + 1.0) * p.beta ** 2 / 2.0
    out = np.where(a <= p.beta, 0.0, np.where(a <= p.beta * p.theta, mid, outer))
    return _scalar_or_array(out, u)


def scad_grad(u, p: ScadParams):
    u_arr = np.asarray(u, dtype=float)
    a = np.abs(u_arr)
    s = np.sign(u_arr)
    mid = s * (a - p.beta) / (p.theta - 1.0)
    out = np.where(a <= p.beta, 0.0, np.where(a <= p.beta * p.theta, mid, s * p.beta))
    return _scalar_or_array(out, u)


def scad_penalty_value(x, p: ScadParams) -> float:
    return float(np.sum(scad_value(np.asarray(x, dtype=float), p)))


def scad_penalty_grad(x, p: ScadParams) -> np.ndarray:
    return np.asarray(scad_grad(np.asarray(x, dtype=float), p))


def kkt_residual_exact(problem, x, lam) -> float:
    """dist(0, d_x L(x, lam)) for problems whose prox terms are separable."""
    x = np.asarray(x, dtype=float)
    lam = np.asarray(lam, dtype=float).reshape(-1)
    if lam.size != len(problem.constraints):
        raise DimensionError(f"expected {len(problem.constraints)} multipliers, got {lam.size}")
    if np.any(lam < 0):
        raise ValueError("multipliers must be nonnegative")

    _, g = problem.objective.smooth.eval(x)
    g = np.array(g, dtype=float)
    lo, hi = subdiff_bounds(problem.objective.prox, x)
    for lam_i, comp in zip(lam, problem.constraints):
        if lam_i == 0.0:
            continue
        _, gi = comp.smooth.eval(x)
        g += lam_i * gi
        l_i, h_i = subdiff_bounds(comp.prox, x)
        lo = lo + lam_i * l_i
        hi = hi + lam_i * h_i
    return float(np.linalg.norm(dist_to_interval(g, lo, hi)))
