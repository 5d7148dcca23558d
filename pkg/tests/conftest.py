import numpy as np
import pytest

from pollinet.network import ConstantGraphon, HarvestSpec, sample_community
from pollinet.rates import Kernel, RateParams

# bistable single-pair parameter set (two positive equilibria when c = k = h = 1)
BISTABLE = dict(alphaP=9.0, betaP=1.0, gammaP=1.0, dP=1.0, deltaP=3.0,
                alphaA=25.0, betaA=1.0, gammaA=1.0, dA=2.0)
# parameter set for the trait-continuum collapse runs
COLLAPSE = dict(alphaP=25.0, betaP=1.0, gammaP=1.0, dP=1.0, deltaP=3.0,
                alphaA=3.0, betaA=1.0, gammaA=0.3, dA=3.0)
# moderate rates with a unique stable coexistence state for small communities
MODERATE = dict(alphaP=9.0, betaP=1.0, gammaP=1.0, dP=1.0, deltaP=0.5,
                alphaA=5.0, betaA=1.0, gammaA=1.0, dA=1.0)


@pytest.fixture
def bistable():
    return RateParams(**BISTABLE)


@pytest.fixture
def moderate():
    return RateParams(**MODERATE)


@pytest.fixture
def collapse_rates():
    return RateParams(**COLLAPSE)


@pytest.fixture
def small_community():
    return sample_community(3, 3, ConstantGraphon(1.0), HarvestSpec("constant", c0=2.0, noise_half_width=0.2),
                            seed=7)


@pytest.fixture
def random_community():
    com = sample_community(4, 5, ConstantGraphon(0.6), HarvestSpec("constant", c0=3.0, noise_half_width=0.5),
                           seed=11)
    assert 0 < com.G.sum() < 20
    return com


@pytest.fixture
def tab_kernels():
    g = np.array([[1.0, 0.5, 0.2], [0.5, 1.5, 0.4], [0.2, 0.4, 0.8]])
    return Kernel(grid=g), Kernel(grid=g.T * 0.7)
