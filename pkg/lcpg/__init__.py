"""Level-constrained proximal gradient methods for composite constrained problems."""

from .drivers import RunConfig, RunMode, RunResult, Subsolver, lcpg_run
from .errors import LcpgError
from .problem import Composite, ConstrainedProblem, SmoothOracle
from .schedules import LevelSchedule

__all__ = [
    "Composite",
    "ConstrainedProblem",
    "LcpgError",
    "LevelSchedule",
    "RunConfig",
    "RunMode",
    "RunResult",
    "SmoothOracle",
    "Subsolver",
    "lcpg_run",
]
