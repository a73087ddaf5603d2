import os

import numpy as np
import pytest
from hypothesis import settings

from lcpg.problem import Composite, ConstrainedProblem, linear_oracle
from lcpg.schedules import make_rng

os.environ.setdefault("LCPG_ENV", "testing")

settings.register_profile("ci", max_examples=200, deadline=None)
settings.register_profile("fast", max_examples=30, deadline=None)
settings.register_profile("debugger", max_examples=10, deadline=None, report_multiple_bugs=False)
settings.load_profile(os.getenv("HYPOTHESIS_PROFILE", "fast"))


@pytest.fixture
def rng():
    return make_rng(1234, 99)


@pytest.fixture
def testing_config():
    from config import TestingConfig
    return TestingConfig


@pytest.fixture
def scad_example():
    """Two-dimensional SCAD example: beta=1, theta=5, level 3, objective 7 - x_1."""
    from experiments.generators import scad_constraint

    constraint, eta1 = scad_constraint(beta=1.0, theta=5.0, d=2, sigma=1.5)
    objective = Composite(linear_oracle(np.array([-1.0, 0.0]), 7.0), lipschitz=1.0)
    return ConstrainedProblem(objective, (constraint,), eta=[eta1], eta0=[0.5 * eta1], x0=np.zeros(2))
