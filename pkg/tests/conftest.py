import pytest

from app.core.config import clear_settings_cache
from app.models.schemas import EnsembleSpec, PointBeta, PointN0, UniformBeta


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run slow acceptance tests")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(autouse=True)
def fresh_settings(monkeypatch):
    monkeypatch.delenv("SCAN_THREADS", raising=False)
    clear_settings_cache()
    yield
    clear_settings_cache()


@pytest.fixture
def uniform_ensemble():
    return EnsembleSpec(beta_law=UniformBeta(), n0_law=PointN0(value=0), atom_count=400, seed=7)


@pytest.fixture
def resonant_atom():
    return EnsembleSpec(beta_law=PointBeta(value=0.5), n0_law=PointN0(value=0), atom_count=1, seed=1)
