"""Gradient estimators for finite-sum objectives.

Mini-batches are drawn uniformly with replacement. Every estimator returns
the number of component gradients it evaluated so drivers can count
effective passes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .errors import ConfigError
from .problem import SmoothOracle


def _require_finite_sum(oracle: SmoothOracle) -> int:
    if not oracle.is_finite_sum:
        raise ConfigError("stochastic gradients need a finite-sum objective oracle")
    return oracle.n_components


def full_gradient(oracle: SmoothOracle, x) -> Tuple[np.ndarray, int]:
    """Exact gradient plus its cost in component evaluations (n, or 0 if monolithic)."""
    grad = oracle.grad(x)
    return grad, oracle.n_components if oracle.is_finite_sum else 0


def lcspg_gradient(oracle: SmoothOracle, x, b_k: int, rng: np.random.Generator) -> Tuple[np.ndarray, int]:
    """Mean of ``b_k`` component gradients drawn uniformly with replacement."""
    n = _require_finite_sum(oracle)
    if b_k < 1:
        raise ConfigError(f"batch size must be at least 1, got {b_k}")
    idx = rng.integers(0, n, size=int(b_k))
    return oracle.batch_gradient(idx, x), int(b_k)


@dataclass
class SvrgState:
    G_prev: Optional[np.ndarray] = None
    x_prev: Optional[np.ndarray] = None


def lcsvrg_gradient(oracle: SmoothOracle, state: SvrgState, x, k: int, T: int, b: int,
                    rng: np.random.Generator) -> Tuple[np.ndarray, int]:
    """Recursive variance-reduced estimator; full gradient at every epoch start.

    Updates ``state`` in place so the next call sees (G^k, x^k).
    """
    n = _require_finite_sum(oracle)
    if T < 1 or b < 1:
        raise ConfigError("epoch length and batch size must be positive")
    x = np.asarray(x, dtype=float)
    if k % T == 0 or state.G_prev is None:
        G = oracle.grad(x)
        cost = n
    else:
        idx = rng.integers(0, n, size=int(b))
        G = oracle.batch_gradient(idx, x) - oracle.batch_gradient(idx, state.x_prev) + state.G_prev
        cost = 2 * int(b)
    state.G_prev = G
    state.x_prev = x.copy()
    return G, cost


def svrg_lipschitz_margin(L0: float, gamma: float, beta: float, T: int, b: int) -> float:
    """(2 gamma - beta - L0)/2 - L0^2 (T - 1) / (2 beta b); must stay positive."""
    return (2.0 * gamma - beta - L0) / 2.0 - L0 ** 2 * (T - 1) / (2.0 * beta * b)
