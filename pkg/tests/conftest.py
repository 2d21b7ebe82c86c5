import numpy as np
import pytest

from reecont.sets import ConvexSetSpec
from reecont.states import BipartiteDims, bell_state, maximally_mixed


def random_hermitian(n, rng):
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return (a + a.conj().T) / 2


@pytest.fixture
def rng():
    return np.random.default_rng(20261019)


@pytest.fixture
def qubits():
    return BipartiteDims(2, 2)


@pytest.fixture
def bell():
    return bell_state()


@pytest.fixture
def tau(qubits):
    return maximally_mixed(qubits)


@pytest.fixture
def sep(qubits):
    return ConvexSetSpec("SEP", qubits)


@pytest.fixture
def ppt(qubits):
    return ConvexSetSpec("PPT", qubits)
