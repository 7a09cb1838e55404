import pytest

from biomatch import ec_elgamal as eg
from biomatch.rng import SeededRng


@pytest.fixture(scope="session")
def params256():
    return eg.get_params("secp256k1")


@pytest.fixture(scope="session")
def params112():
    return eg.get_params("secp112r1")


@pytest.fixture(scope="session")
def keys256(params256):
    km = eg.keygen(params256, SeededRng(0xC0FFEE))
    params256.precompute_base(km.h)
    return km


@pytest.fixture(scope="session")
def keys112(params112):
    km = eg.keygen(params112, SeededRng(0xBEEF))
    params112.precompute_base(km.h)
    return km


@pytest.fixture()
def rng():
    return SeededRng(1234)
