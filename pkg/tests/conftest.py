import numpy as np
import pytest

from ginzburg_lod.assembly.potential import default_potential, zero_potential
from ginzburg_lod.mesh.hierarchy import build_hierarchy


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run desk-scale acceptance tests")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: desk-scale run, only with --runslow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def small_hierarchy():
    """Coarse h = 1/2, fine h = 1/8."""
    return build_hierarchy(1, 3)


@pytest.fixture
def medium_hierarchy():
    """Coarse h = 1/4, fine h = 1/16."""
    return build_hierarchy(2, 4)


@pytest.fixture
def trig():
    return default_potential()


@pytest.fixture
def zero():
    return zero_potential()


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)
