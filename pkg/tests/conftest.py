import numpy as np
import pytest

from corridor_cov import (
    ChannelParams,
    CorridorGeometry,
    FixedHeight,
    bpp_model,
    hppp_model,
)

# Default operating point used throughout: N=10 UAVs, worst-case fading m=1,
# shadowing shape q=2 with unit mean, alpha=2.2, h=100 m, R=500 m.
DEFAULT_N = 10
DEFAULT_LAMBDA = 10.0 / 1000.0
THETA_GRID_DB = np.arange(-10.0, 11.0)


@pytest.fixture(scope="session")
def geom():
    return CorridorGeometry(500.0, FixedHeight(100.0))


@pytest.fixture(scope="session")
def channel():
    return ChannelParams(alpha=2.2, q=2.0, m=1.0)


@pytest.fixture(scope="session")
def channel_m3():
    return ChannelParams(alpha=2.2, q=2.0, m=3.0)


@pytest.fixture(scope="session")
def model10(geom, channel):
    return bpp_model(DEFAULT_N, geom, channel)


@pytest.fixture(scope="session")
def model3(geom, channel):
    return bpp_model(3, geom, channel)


@pytest.fixture(scope="session")
def hmodel(geom, channel):
    return hppp_model(DEFAULT_LAMBDA, geom, channel)


def ks_statistic(samples, cdf):
    """Kolmogorov-Smirnov distance between a sample and a CDF callable."""
    samples = np.sort(np.asarray(samples))
    n = len(samples)
    grid = cdf(samples)
    upper = np.abs(np.arange(1, n + 1) / n - grid)
    lower = np.abs(grid - np.arange(0, n) / n)
    return float(max(upper.max(), lower.max()))
