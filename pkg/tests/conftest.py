import numpy as np
import pytest

from src.model.params import DEFAULT_DELTA, ModelParams
from src.model.trajectory import Trajectory
from src.series.composition import ReturnSeries


@pytest.fixture
def params():
    return ModelParams()


@pytest.fixture
def in_tmp(tmp_path, monkeypatch):
    """Runs the test from an empty directory (no config.yaml, logs go to ./logs there)."""
    monkeypatch.chdir(tmp_path)
    return tmp_path


def make_series(values, delta=1.0, t0=0.0):
    return ReturnSeries(delta=delta, values=np.asarray(values, dtype=float), composition=None, seed=0, t0=t0)


def make_trajectory(y, xi=None, grid_step=DEFAULT_DELTA, source="agent"):
    y = np.asarray(y, dtype=float)
    xi = np.zeros_like(y) if xi is None else np.asarray(xi, dtype=float)
    return Trajectory(grid_step=grid_step, n_f=1.0 / (1.0 + y), xi=xi, y=y, seed=7, source=source)


@pytest.fixture
def synthetic_trajectory():
    """Random y and ξ on the δ grid, no integration involved."""
    rng = np.random.default_rng(11)
    n = 20000
    return make_trajectory(rng.uniform(0.0, 3.0, n), rng.uniform(-1.0, 1.0, n))


def pytest_addoption(parser):
    parser.addoption("--run-acceptance", action="store_true", default=False,
                     help="run the long model-level experiments")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--run-acceptance"):
        return
    skip = pytest.mark.skip(reason="needs --run-acceptance")
    for item in items:
        if "acceptance" in item.keywords:
            item.add_marker(skip)
