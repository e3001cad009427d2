import pytest

from mkgc import lwe
from mkgc.gates import ClearBackend, TorusLweBackend
from mkgc.torus import NoiseSampler

#: fast parameters for unit tests; acceptance tests pin the real set
SMALL = lwe.LweParams(n=32, alpha=1e-7)
TABLE7 = lwe.LweParams()  # n=560, alpha=3.05e-5


@pytest.fixture
def small_params():
    return SMALL


@pytest.fixture
def two_party(small_params):
    """(keys, oracle, backend, enc_sampler) for a fast two-party setup."""
    smp = NoiseSampler(small_params.alpha, seed=11)
    keys = [lwe.keygen(small_params, pid, smp) for pid in (0, 1)]
    oracle = lwe.RefreshOracle(keys, small_params, seed=13)
    backend = TorusLweBackend(small_params, (0, 1), oracle)
    enc = NoiseSampler(small_params.alpha, seed=17)
    return keys, oracle, backend, enc


@pytest.fixture
def clear_backend():
    return ClearBackend()
