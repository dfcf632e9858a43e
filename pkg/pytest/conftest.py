from pathlib import Path
import sys

import numpy as np
import pytest

curr_path = Path(__file__).resolve().parent
hw_path: str = str(curr_path.parent.joinpath("src"))

sys.path.append(hw_path)

from models.networks import init_dynamics, init_growth
from schemas.solver import SolverConfig
from schemas.training import RunConfig
from services.datagen import gen_arch, gen_cycle


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run training-heavy acceptance tests")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)


@pytest.fixture()
def small_net():
    return init_dynamics(2, seed=0, hidden=(16, 16))


@pytest.fixture()
def small_growth():
    return init_growth(2, seed=1, hidden=(8,))


@pytest.fixture()
def rk4():
    return SolverConfig(method="rk4", step_size=0.1)


@pytest.fixture(scope="module")
def arch():
    return gen_arch(300, seed=0)


@pytest.fixture(scope="module")
def cycle():
    return gen_cycle(300, seed=0)


@pytest.fixture()
def tiny_run_config():
    """A run config small enough for a few seconds of training."""
    return RunConfig(
        iterations=3,
        batch_size=16,
        solver={"method": "rk4", "step_size": 0.25},
        eval_solver={"method": "rk4", "step_size": 0.25},
        eval={"n_eval": 50, "n_traj": 20, "seeds": (0,), "ot_subsample": 50},
        growth={"iterations": 5, "batch_size": 16, "ot_points": 50},
    )


@pytest.fixture(scope="session")
def golden():
    return curr_path.parent.joinpath("docs", "golden")
