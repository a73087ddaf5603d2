"""Level schedules, averaging weights, output-index sampling and RNG streams."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from .errors import ConfigError


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Counter-based generator for ``(seed, stream...)``.

    Distinct stream keys give independent Philox streams, so concurrent runs
    never share generator state.
    """
    seq = np.random.SeedSequence(int(seed), spawn_key=tuple(int(s) for s in stream))
    return np.random.Generator(np.random.Philox(seq))


class ScheduleKind(str, enum.Enum):
    POLYNOMIAL = "polynomial"
    GEOMETRIC = "geometric"
    CUSTOM = "custom"


@dataclass(frozen=True)
class LevelSchedule:
    kind: ScheduleKind = ScheduleKind.POLYNOMIAL
    rho: Optional[float] = None
    fractions: Tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "kind", ScheduleKind(self.kind))
        if self.kind is ScheduleKind.GEOMETRIC:
            if self.rho is None or not 0 < self.rho < 1:
                raise ConfigError(f"geometric schedule needs rho in (0, 1), got {self.rho}")
        if self.kind is ScheduleKind.CUSTOM:
            fractions = tuple(self.fractions)
            if not fractions or any(f <= 0 for f in fractions):
                raise ConfigError("custom schedule needs positive increments")
            if sum(fractions) >= 1:
                raise ConfigError("custom increments must sum to less than 1")
            object.__setattr__(self, "fractions", fractions)

    @classmethod
    def polynomial(cls) -> "LevelSchedule":
        return cls(ScheduleKind.POLYNOMIAL)

    @classmethod
    def geometric(cls, rho) -> "LevelSchedule":
        return cls(ScheduleKind.GEOMETRIC, rho=rho)

    @classmethod
    def custom(cls, fractions) -> "LevelSchedule":
        return cls(ScheduleKind.CUSTOM, fractions=tuple(fractions))


def _levels(v):
    return np.asarray(v) if isinstance(v, (list, tuple)) else v


def schedule_levels(schedule: LevelSchedule, eta0, eta, k: int):
    """Closed-form eta^k.

    Works on floats, numpy arrays and ``fractions.Fraction`` values alike, so
    exact-arithmetic checks go through the same code as the drivers.
    """
    if k < 0:
        raise ValueError("k must be nonnegative")
    eta0, eta = _levels(eta0), _levels(eta)
    if schedule.kind is ScheduleKind.POLYNOMIAL:
        return (k * eta + eta0) / (k + 1)
    if schedule.kind is ScheduleKind.GEOMETRIC:
        return eta - schedule.rho ** k * (eta - eta0)
    if k > len(schedule.fractions):
        raise ConfigError(f"custom schedule defines only {len(schedule.fractions)} increments")
    return eta0 + sum(schedule.fractions[:k]) * (eta - eta0)


def level_increment(schedule: LevelSchedule, eta0, eta, k: int):
    """delta^k = eta^{k+1} - eta^k in closed form."""
    if k < 0:
        raise ValueError("k must be nonnegative")
    eta0, eta = _levels(eta0), _levels(eta)
    if schedule.kind is ScheduleKind.POLYNOMIAL:
        return (eta - eta0) / ((k + 1) * (k + 2))
    if schedule.kind is ScheduleKind.GEOMETRIC:
        rho = schedule.rho
        return rho ** k * (1 - rho) * (eta - eta0)
    if k >= len(schedule.fractions):
        raise ConfigError(f"custom schedule defines only {len(schedule.fractions)} increments")
    return schedule.fractions[k] * (eta - eta0)


class AlphaRule(str, enum.Enum):
    K_PLUS_1 = "k_plus_1"
    EPOCH_FLOOR = "epoch_floor"
    UNIFORM = "uniform"


def alpha_weights(rule, k: int, T: int = 1) -> float:
    rule = AlphaRule(rule)
    if k < 0:
        raise ValueError("k must be nonnegative")
    if rule is AlphaRule.K_PLUS_1:
        return float(k + 1)
    if rule is AlphaRule.EPOCH_FLOOR:
        if T < 1:
            raise ValueError("epoch length must be positive")
        return float(T * (k // T) + 1)
    return 1.0


def sample_output_index(alphas, rng: np.random.Generator) -> int:
    alphas = np.asarray(alphas, dtype=float)
    if alphas.size == 0:
        raise ValueError("no weights to sample from")
    if np.any(alphas <= 0) or not np.all(np.isfinite(alphas)):
        raise ValueError("weights must be positive and finite")
    if alphas.size == 1:
        return 0
    return int(rng.choice(alphas.size, p=alphas / alphas.sum()))


def strongly_convex_rho(L0: float, mu0: float, a: float) -> float:
    """Geometric ratio (L0 - mu0) / (2 (L0 - a mu0)) of the strongly convex schedule."""
    if not 0 < a < 1:
        raise ConfigError(f"a must lie in (0, 1), got {a}")
    if not 0 < mu0 <= L0:
        raise ConfigError(f"need 0 < mu0 <= L0, got mu0={mu0}, L0={L0}")
    rho = (L0 - mu0) / (2.0 * (L0 - a * mu0))
    if rho <= 0:
        # mu0 == L0: any small ratio keeps the schedule well defined
        rho = math.ulp(1.0)
    return rho
