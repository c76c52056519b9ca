import numpy as np
import pytest

from trunclab import lattice


@pytest.fixture(scope="session")
def builtin_z():
    return lattice.load_builtin_vector()


@pytest.fixture(scope="session")
def small_rule(builtin_z):
    """1024-node rule with the vendored vector and a fixed shift."""
    return lattice.lattice_rule(2 ** 10, builtin_z, seed=1)


@pytest.fixture()
def rng():
    return np.random.default_rng(20240811)
