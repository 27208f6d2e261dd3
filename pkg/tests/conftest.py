import numpy as np
import pytest

from qpgen.potential import TrigPolynomial


def cos_cos():
    return TrigPolynomial.from_terms(2, 1, 0.0, cos={(1, 0): 1.0, (0, 1): 1.0})


def cos1(k=1, n=None, amp=1.0):
    return TrigPolynomial.from_terms(1, n or k, 0.0, cos={(k,): amp})


def degenerate_1d():
    # 2 cos(2 pi x) - cos(4 pi x) / 2 : V''(0) = 0
    return TrigPolynomial.from_terms(1, 2, 0.0, cos={(1,): 2.0, (2,): -0.5})


@pytest.fixture
def rng():
    return np.random.default_rng(20261014)
