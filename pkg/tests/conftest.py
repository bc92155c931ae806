import numpy as np
import pytest

from fheact.activations import square
from fheact.netgraph import builtin_lenet5
from fheact.params import SchemeParams
from fheact.weights import gen_fixtures, load_weights_csv


@pytest.fixture
def small_params():
    """Tiny ring so unit tests stay fast."""
    return SchemeParams(ring_dimension=64, slot_count=32, depth_after_bootstrap=10)


@pytest.fixture(scope="session")
def lenet_weight_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("lenet_fixtures")
    gen_fixtures(42, builtin_lenet5(square()), out)
    return out


@pytest.fixture(scope="session")
def lenet_weights(lenet_weight_dir):
    return load_weights_csv(lenet_weight_dir, builtin_lenet5(square()))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
