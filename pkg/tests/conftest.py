import numpy as np
import pytest

from ipcwk.common import Common
from ipcwk.estimators import GSpec
from ipcwk.survival import Dataset, StepFunction


@pytest.fixture(autouse=True)
def config_dir(tmp_path, monkeypatch):
    """
    Every test runs against its own configuration directory and log stash.
    """
    directory = tmp_path / "ipcwk-config"
    monkeypatch.setenv("IPCWK_CONFIG_DIR", str(directory))
    monkeypatch.delenv("IPCWK_THREADS", raising=False)
    Common.reset()
    Common.quiet = True
    yield directory
    Common.reset()
    Common.quiet = False


@pytest.fixture
def no_censoring():
    return GSpec.known(StepFunction.constant(0.0))


@pytest.fixture
def km_toy():
    return Dataset([1.0, 2.0, 3.0], [1, 0, 1], [0.0, 0.0, 0.0])


@pytest.fixture
def band_toy():
    """
    Four observations, one censored, used by the hand computed band oracle.
    """
    return Dataset([0.5, 1.0, 1.5, 2.0], [1, 1, 0, 1], [-0.4, -0.1, 0.2, 0.6])


def random_dataset(rng, n, censored=True, dim=1, ties=False):
    if ties:
        z = rng.integers(1, 6, n).astype(float)
    else:
        z = rng.exponential(1.0, n)
    delta = rng.integers(0, 2, n) if censored else np.ones(n, dtype=int)
    x = rng.uniform(-1.0, 1.0, (n, dim))
    return Dataset(z, delta, x)


@pytest.fixture
def write_file(tmp_path):
    def write(name, text):
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return path

    return write


@pytest.fixture
def make_dataset():
    return random_dataset
