import numpy as np
import pytest

from equiauction.distributions import Beta, TruncatedExponential, TruncatedNormal, Uniform
from equiauction.valuation import Market

SHIPPED = {
    "uniform": Uniform(),
    "truncated-exponential": TruncatedExponential(),
    "truncated-normal": TruncatedNormal(),
    "beta22": Beta(2.0, 2.0),
    "beta-half": Beta(0.5, 0.5),
}
LOG_CONCAVE = ("uniform", "truncated-exponential", "truncated-normal")


@pytest.fixture(params=list(SHIPPED))
def dist(request):
    return SHIPPED[request.param]


@pytest.fixture
def uniform32():
    return lambda c: Market(3, 2, c, Uniform())


def interior_signals(dist, m=101, lo=0.01, hi=0.99):
    return np.asarray(dist.quantile(np.linspace(lo, hi, m)))
