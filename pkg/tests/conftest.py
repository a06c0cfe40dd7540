import numpy as np
import pytest

from dcboost.inner_solver import InnerConfig
from dcboost.nu_strategies import NuSpec
from dcboost.problems import get_card
from dcboost.solvers import SolverConfig


@pytest.fixture
def p62():
    return get_card("p6_2").problem


@pytest.fixture
def smooth_quad():
    return get_card("smooth_quad").problem


@pytest.fixture
def example_config():
    """Head-to-head setup on the l1 problem: rho 0.1, lambda 1, omega 0.01, exact subproblems."""
    return SolverConfig(
        lambda_init=1.0,
        rho=0.1,
        zeta=0.5,
        nu_strategy=NuSpec("power_decay", {"omega": 0.01}),
        inner=InnerConfig(method="exact"),
        step_restart="initial",
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)
