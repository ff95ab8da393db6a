import numpy as np
import pytest

from fedsim.adversary import AttackerConfig, Unconstrained
from fedsim.data import BackdoorSpec, build_backdoor_task, generate_synthetic
from fedsim.nn import ModelArch, TrainHyper


def pytest_addoption(parser):
    parser.addoption(
        "--runslow", action="store_true", default=False, help="run end-to-end trend tests"
    )


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(scope="session")
def tiny_fed():
    """12 clients x 20 examples of 8x8 images; every client holds two 7s."""
    return generate_synthetic(1, 12, 20, 10, 8)


@pytest.fixture(scope="session")
def tiny_arch():
    return ModelArch.mlp_small(10, (8, 8), hidden=16)


@pytest.fixture(scope="session")
def tiny_task(tiny_fed):
    spec = BackdoorSpec(tiny_fed.client_ids[:2])
    return build_backdoor_task(tiny_fed, spec, 0.2, 20, np.random.default_rng(3))


@pytest.fixture(scope="session")
def tiny_attacker(tiny_task):
    return AttackerConfig(tiny_task, Unconstrained(), TrainHyper(2, 10, 0.1))
