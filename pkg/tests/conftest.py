import numpy as np
import pytest

from mcqm.hilbert import HermitianOperator
from mcqm.models import random_problem, two_level
from mcqm.perturbation import build_problem


def random_hermitian(rng, n, scale=1.0):
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return HermitianOperator(scale * (a + a.conj().T) / 2)


@pytest.fixture
def rng():
    return np.random.Generator(np.random.PCG64(20240611))


@pytest.fixture
def two_level_problem():
    return build_problem(*two_level())


@pytest.fixture(params=[1, 2, 3])
def random6(request):
    return build_problem(*random_problem(6, request.param))
