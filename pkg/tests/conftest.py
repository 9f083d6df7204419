import numpy as np
import pytest

from bcclsm.binomial import BsSetup, binomial_put
from bcclsm.engine import BccParams, GridSpec, simulate

# Flat 20% volatility, flat 6% rate: the lattice benchmark setup expressed
# as a degenerate stochastic model.  Session-scoped because several suites
# price against the same grid and simulation is the expensive part.
BENCHMARK_MODEL = BccParams(kappa_v=0.0, theta_v=0.04, sigma_v=0.0, rho=0.0,
                            v0=0.04, lam=0.0, mu_j=0.0, delta=0.0,
                            kappa_r=0.0, theta_r=0.06, sigma_r=0.0, r0=0.06)
BENCHMARK_GRID_SPEC = GridSpec(s0=36.0, horizon=1.0, steps=20, paths=25000,
                               seed=42, antithetic=True, moment_match=True)


@pytest.fixture(scope="session")
def benchmark_grid():
    return simulate(BENCHMARK_MODEL, BENCHMARK_GRID_SPEC)


@pytest.fixture(scope="session")
def binomial_reference():
    return binomial_put(BsSetup(s0=36.0, strike=40.0, maturity=1.0, rate=0.06,
                                sigma=0.2, steps=500))


@pytest.fixture
def rng():
    return np.random.default_rng(20170905)
