import numpy as np
import pytest

from intcens.data import Sample2


@pytest.fixture(autouse=True, scope="session")
def _chernoff_cache(tmp_path_factory):
    # keep the on-disk Var(Z) cache inside the test session
    mp = pytest.MonkeyPatch()
    mp.setenv("INTCENS_CACHE_DIR", str(tmp_path_factory.mktemp("cache")))
    yield
    mp.undo()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def one(u, v, d0, d1):
    return Sample2([u], [v], [d0], [d1])


def uniform_sample(rng, n, M=2.0):
    """Uniform event times and inspection pairs on [0, M]."""
    uv = np.sort(rng.uniform(0, M, size=(n, 2)), axis=1)
    return Sample2.from_latent(uv[:, 0], uv[:, 1], rng.uniform(0, M, size=n), M=M)
