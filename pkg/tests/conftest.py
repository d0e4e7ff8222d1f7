import numpy as np
import pytest

from seesaw.params import paper_device, reduced_stiffness_device


@pytest.fixture(scope="session")
def paper():
    return paper_device()


@pytest.fixture(scope="session")
def reduced():
    return reduced_stiffness_device()


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)


def pytest_addoption(parser):
    parser.addoption(
        "--skip-slow", action="store_true", default=False,
        help="skip the multi-minute full-ODE cross-validation tests",
    )


def pytest_collection_modifyitems(config, items):
    if not config.getoption("--skip-slow"):
        return
    marker = pytest.mark.skip(reason="--skip-slow given")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(marker)


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: multi-minute full-ODE runs")
