"""Domain types and channel building blocks for the UAV corridor model.

The corridor is a line segment at height h spanning [-R, R] above a ground
receiver at the origin.  Links combine power-law path loss, inverse-gamma
shadowing (heavy-tailed, shape q, scale gamma) and Nakagami-m small-scale
fading whose power gain is Gamma(m, 1/m) with unit mean.

All types are immutable; samplers take an explicit numpy Generator owned by
the caller, so everything here is safe to use from concurrent workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Protocol, Union, runtime_checkable

import numpy as np
from scipy import special

__all__ = [
    "SPEED_OF_LIGHT",
    "ParameterError",
    "FixedHeight",
    "UniformHeight",
    "NormalHeight",
    "HeightModel",
    "CorridorGeometry",
    "ChannelParams",
    "BPP",
    "FiniteHPPP",
    "Disc2D",
    "SpatialModel",
    "DistributionHandle",
    "db_to_linear",
    "linear_to_db",
    "carrier_factor_from_frequency",
    "path_loss",
    "link_distance_pdf",
    "link_distance_cdf",
    "pathloss_value_pdf",
    "pathloss_value_cdf",
    "LinkDistanceDistribution",
    "InverseGammaShadowing",
    "NakagamiFadingPower",
    "shadowing_distribution",
    "fading_distribution",
]

SPEED_OF_LIGHT = 299_792_458.0


class ParameterError(ValueError):
    """A parameter violates its documented domain."""


def db_to_linear(value_db):
    return 10.0 ** (np.asarray(value_db, dtype=float) / 10.0)


def linear_to_db(value):
    return 10.0 * np.log10(np.asarray(value, dtype=float))


# ---------------------------------------------------------------------------
# Height models
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FixedHeight:
    h: float

    def __post_init__(self):
        if self.h <= 0:
            raise ParameterError("fixed height must be positive")

    def mean(self):
        return self.h

    def sample(self, rng, size=None):
        return np.full(size, self.h) if size is not None else self.h


@dataclass(frozen=True)
class UniformHeight:
    low: float
    high: float

    def __post_init__(self):
        if not (0 < self.low <= self.high):
            raise ParameterError("uniform height needs 0 < low <= high")

    def mean(self):
        return 0.5 * (self.low + self.high)

    def sample(self, rng, size=None):
        if self.high == self.low:
            return np.full(size, self.low) if size is not None else self.low
        return rng.uniform(self.low, self.high, size)


@dataclass(frozen=True)
class NormalHeight:
    """Normal height, truncated to h > 0 by rejection (the removed mass is
    negligible whenever sigma << mu)."""

    mu: float
    sigma: float

    def __post_init__(self):
        if self.mu <= 0 or self.sigma <= 0:
            raise ParameterError("normal height needs mu > 0 and sigma > 0")

    def mean(self):
        return self.mu

    def sample(self, rng, size=None):
        scalar = size is None
        n = 1 if scalar else int(np.prod(size))
        out = rng.normal(self.mu, self.sigma, n)
        bad = out <= 0
        while bad.any():
            out[bad] = rng.normal(self.mu, self.sigma, bad.sum())
            bad = out <= 0
        if scalar:
            return float(out[0])
        return out.reshape(size)


HeightModel = Union[FixedHeight, UniformHeight, NormalHeight]


# ---------------------------------------------------------------------------
# Geometry, channel, spatial models
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CorridorGeometry:
    """Corridor of half-length R (the segment spans [-R, R]) above the
    receiver at the origin."""

    R: float
    height_model: HeightModel

    def __post_init__(self):
        if self.R <= 0:
            raise ParameterError("corridor half-length R must be positive")

    @property
    def length(self):
        return 2.0 * self.R

    @property
    def fixed_height(self):
        """Height h for fixed-height analysis; rejects variable-height models."""
        if not isinstance(self.height_model, FixedHeight):
            raise ParameterError(
                "this operation requires a fixed-height corridor; got "
                f"{type(self.height_model).__name__}"
            )
        return self.height_model.h

    def max_link_distance(self, h=None):
        h = self.fixed_height if h is None else h
        return math.hypot(h, self.R)


@dataclass(frozen=True)
class ChannelParams:
    """Path-loss exponent alpha, optional carrier factor K, shadowing shape q
    and scale gamma, fading shape m.

    gamma=None resolves to q - 1, which normalizes the shadowing mean to 1 so
    that path loss is the only deterministic driver of mean power.  The SIR
    is invariant to gamma (a common scale on all links cancels), so this
    choice only matters for absolute-power outputs.
    """

    alpha: float
    q: float
    gamma: float | None = None
    m: float = 1.0
    carrier_factor: float | None = None

    def __post_init__(self):
        if self.alpha <= 0:
            raise ParameterError("path-loss exponent alpha must be positive")
        if self.q <= 1:
            raise ParameterError("shadowing shape q must exceed 1 (finite mean)")
        if self.gamma is None:
            object.__setattr__(self, "gamma", float(self.q - 1.0))
        if self.gamma <= 0:
            raise ParameterError("shadowing scale gamma must be positive")
        if self.m <= 0:
            raise ParameterError("fading shape m must be positive")
        if self.carrier_factor is not None and self.carrier_factor <= 0:
            raise ParameterError("carrier factor must be positive when set")

    @property
    def k_factor(self):
        """Multiplicative path-loss constant; 1.0 when the carrier factor is off."""
        return 1.0 if self.carrier_factor is None else self.carrier_factor

    def require_integer_m(self):
        m = int(round(self.m))
        if abs(self.m - m) > 1e-12 or m < 1:
            raise ParameterError(
                f"the exact coverage engine needs integer m >= 1, got m={self.m}"
            )
        return m


def carrier_factor_from_frequency(f_c_hz):
    """K = (c / (4 pi f_c))^2, the free-space carrier-frequency factor."""
    if f_c_hz <= 0:
        raise ParameterError("carrier frequency must be positive")
    return (SPEED_OF_LIGHT / (4.0 * math.pi * f_c_hz)) ** 2


@dataclass(frozen=True)
class BPP:
    """Fixed count of UAVs placed independently and uniformly on the corridor."""

    n: int

    def __post_init__(self):
        if self.n < 1:
            raise ParameterError("BPP needs at least one UAV")


@dataclass(frozen=True)
class FiniteHPPP:
    """Homogeneous Poisson process on the corridor, `intensity` UAVs per meter."""

    intensity: float

    def __post_init__(self):
        if self.intensity <= 0:
            raise ParameterError("HPPP intensity must be positive")

    def mean_count(self, geom):
        return self.intensity * geom.length


@dataclass(frozen=True)
class Disc2D:
    """Baseline: UAVs uniform in a 2D disc of the given radius above the
    receiver (ground distance density 2r/radius^2)."""

    n: int
    radius: float

    def __post_init__(self):
        if self.n < 1:
            raise ParameterError("Disc2D needs at least one UAV")
        if self.radius <= 0:
            raise ParameterError("disc radius must be positive")


SpatialModel = Union[BPP, FiniteHPPP, Disc2D]


# ---------------------------------------------------------------------------
# Distribution contract
# ---------------------------------------------------------------------------


@runtime_checkable
class DistributionHandle(Protocol):
    """Minimal probability-distribution contract used throughout the package."""

    def pdf(self, x): ...

    def cdf(self, x): ...

    def sample(self, rng, size=None): ...

    def mean(self): ...


# ---------------------------------------------------------------------------
# Path loss
# ---------------------------------------------------------------------------


def path_loss(d, params: ChannelParams):
    """Power gain K * d^(-alpha); K defaults to 1 when the carrier factor is off."""
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise ParameterError("path loss needs a positive distance")
    out = params.k_factor * d ** (-params.alpha)
    return float(out) if out.ndim == 0 else out


def link_distance_pdf(d, h, R):
    """Density of the receiver-UAV distance d = sqrt(u^2 + h^2), u ~ U(-R, R):
    f(d) = d / (R sqrt(d^2 - h^2)) on [h, sqrt(h^2 + R^2)]."""
    if h <= 0 or R <= 0:
        raise ParameterError("need h > 0 and R > 0")
    d = np.asarray(d, dtype=float)
    d_max = math.hypot(h, R)
    inside = (d > h) & (d < d_max)
    out = np.zeros_like(d)
    dd = d[inside]
    out[inside] = dd / (R * np.sqrt(dd * dd - h * h))
    return float(out) if out.ndim == 0 else out


def link_distance_cdf(d, h, R):
    """CDF sqrt(d^2 - h^2) / R, clamped to [0, 1] outside the support."""
    if h <= 0 or R <= 0:
        raise ParameterError("need h > 0 and R > 0")
    d = np.asarray(d, dtype=float)
    val = np.sqrt(np.clip(d * d - h * h, 0.0, None)) / R
    out = np.clip(val, 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


class LinkDistanceDistribution:
    """Distance between the receiver and one uniformly placed corridor UAV."""

    def __init__(self, h, R):
        if h <= 0 or R <= 0:
            raise ParameterError("need h > 0 and R > 0")
        self.h = float(h)
        self.R = float(R)
        self.d_max = math.hypot(h, R)

    def pdf(self, x):
        return link_distance_pdf(x, self.h, self.R)

    def cdf(self, x):
        return link_distance_cdf(x, self.h, self.R)

    def sample(self, rng, size=None):
        u = rng.uniform(-self.R, self.R, size)
        return np.hypot(u, self.h)

    def mean(self):
        # (1/R) * int_0^R sqrt(u^2 + h^2) du, closed form.
        h, R = self.h, self.R
        return 0.5 * (self.d_max + h * h * math.asinh(R / h) / R)


def pathloss_value_pdf(x, h, R, alpha):
    """Density of the path-loss value l(d) = d^(-alpha):

        f(x) = x^(-(alpha+2)/alpha) / (alpha R sqrt(x^(-2/alpha) - h^2))

    supported on [(h^2+R^2)^(-alpha/2), h^(-alpha)].  The upper endpoint has
    an integrable inverse-square-root singularity.
    """
    if h <= 0 or R <= 0 or alpha <= 0:
        raise ParameterError("need h > 0, R > 0, alpha > 0")
    x = np.asarray(x, dtype=float)
    lo = (h * h + R * R) ** (-alpha / 2.0)
    hi = h ** (-alpha)
    inside = (x > lo) & (x < hi)
    out = np.zeros_like(x)
    xs = x[inside]
    out[inside] = xs ** (-(alpha + 2.0) / alpha) / (
        alpha * R * np.sqrt(xs ** (-2.0 / alpha) - h * h)
    )
    return float(out) if out.ndim == 0 else out


def pathloss_value_cdf(x, h, R, alpha):
    """P[l(d) <= x] = 1 - sqrt(x^(-2/alpha) - h^2) / R on the support."""
    if h <= 0 or R <= 0 or alpha <= 0:
        raise ParameterError("need h > 0, R > 0, alpha > 0")
    x = np.asarray(x, dtype=float)
    lo = (h * h + R * R) ** (-alpha / 2.0)
    hi = h ** (-alpha)
    out = np.where(x >= hi, 1.0, 0.0)
    inside = (x > lo) & (x < hi)
    xs = x[inside]
    out[inside] = 1.0 - np.sqrt(xs ** (-2.0 / alpha) - h * h) / R
    out = np.clip(out, 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# Shadowing and fading
# ---------------------------------------------------------------------------


class InverseGammaShadowing:
    """Inverse-gamma shadowing gain: pdf gamma^q / (Gamma(q) x^(q+1)) exp(-gamma/x).

    Sampling uses the reciprocal of a Gamma(q, 1/gamma) draw, which is exact.
    The mean gamma/(q-1) exists only for q > 1 (enforced); the variance is
    infinite for q <= 2, so sample means converge slowly there.
    """

    def __init__(self, q, gamma):
        if q <= 1:
            raise ParameterError("inverse-gamma shape q must exceed 1")
        if gamma <= 0:
            raise ParameterError("inverse-gamma scale must be positive")
        self.q = float(q)
        self.gamma = float(gamma)
        self._log_norm = self.q * math.log(self.gamma) - math.lgamma(self.q)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        pos = x > 0
        xp = x[pos]
        out[pos] = np.exp(self._log_norm - (self.q + 1.0) * np.log(xp) - self.gamma / xp)
        return float(out) if out.ndim == 0 else out

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        pos = x > 0
        out[pos] = special.gammaincc(self.q, self.gamma / x[pos])
        return float(out) if out.ndim == 0 else out

    def sample(self, rng, size=None):
        return 1.0 / rng.gamma(self.q, 1.0 / self.gamma, size)

    def mean(self):
        return self.gamma / (self.q - 1.0)

    def mode(self):
        return self.gamma / (self.q + 1.0)

    def median(self):
        return self.gamma / special.gammainccinv(self.q, 0.5)

    def ppf(self, p):
        p = np.asarray(p, dtype=float)
        out = self.gamma / special.gammainccinv(self.q, p)
        return float(out) if out.ndim == 0 else out


class NakagamiFadingPower:
    """Nakagami-m fading power gain: Gamma(m, 1/m), unit mean; m=1 is Exp(1)."""

    def __init__(self, m):
        if m <= 0:
            raise ParameterError("fading shape m must be positive")
        self.m = float(m)
        self._log_norm = self.m * math.log(self.m) - math.lgamma(self.m)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        pos = x > 0
        xp = x[pos]
        out[pos] = np.exp(self._log_norm + (self.m - 1.0) * np.log(xp) - self.m * xp)
        return float(out) if out.ndim == 0 else out

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        out = special.gammainc(self.m, self.m * np.clip(x, 0.0, None))
        return float(out) if out.ndim == 0 else out

    def sf(self, x):
        """Survival function Gamma(m, m x)/Gamma(m) (upper incomplete, regularized)."""
        x = np.asarray(x, dtype=float)
        out = special.gammaincc(self.m, self.m * np.clip(x, 0.0, None))
        return float(out) if out.ndim == 0 else out

    def sample(self, rng, size=None):
        return rng.gamma(self.m, 1.0 / self.m, size)

    def mean(self):
        return 1.0


def shadowing_distribution(q, gamma) -> InverseGammaShadowing:
    return InverseGammaShadowing(q, gamma)


def fading_distribution(m) -> NakagamiFadingPower:
    return NakagamiFadingPower(m)
