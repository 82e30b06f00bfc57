"""Independent Monte Carlo engine for the corridor network.

Everything analytic in this package has a simulation twin here: network
realizations under BPP / finite-HPPP / 2D-disc spatial models, max-power and
min-distance association, SIR sampling, empirical coverage curves, variable
height studies, KL model comparison, and measurement-trace replay.

Reproducibility: trials are processed in fixed-size batches; batch b draws
from the counter-based substream Philox(key=seed).jumped(b), so the same
master seed gives bit-identical results regardless of worker parallelism.
Within a batch the draw order is fixed: counts (HPPP only), positions,
heights, shadowing, then fading.  Shadowing is applied at realization time
(association measures S * l(d), agnostic to fast fading); fading is drawn at
SIR time.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import (
    BPP,
    CorridorGeometry,
    Disc2D,
    FiniteHPPP,
    FixedHeight,
    HeightModel,
    ParameterError,
    db_to_linear,
    linear_to_db,
)

__all__ = [
    "DEFAULT_BATCH_SIZE",
    "EmptyNetworkError",
    "GridMismatchError",
    "TraceFormatError",
    "MappingError",
    "NetworkRealization",
    "SirSample",
    "CoverageCurve",
    "EmpiricalDistribution",
    "HeightStudyResult",
    "ReplayResult",
    "Trace",
    "sample_network",
    "associate",
    "sir_sample",
    "simulate_sir",
    "simulate_sir_paired",
    "empirical_coverage",
    "coverage_from_sirs",
    "variable_height_study",
    "height_model_kl_study",
    "HeightKlResult",
    "kl_divergence",
    "fit_normal_height",
    "fit_uniform_height",
    "sir_distribution",
    "synthesize_trace",
    "trace_replay",
]

DEFAULT_BATCH_SIZE = 1 << 16

MAX_POWER = "max_power"
MIN_DISTANCE = "min_distance"
_POLICIES = (MAX_POWER, MIN_DISTANCE)


class EmptyNetworkError(ValueError):
    """Raised when an operation needs at least one UAV in the realization."""


class GridMismatchError(ValueError):
    """Raised when two empirical distributions do not share a bin grid."""


class TraceFormatError(ValueError):
    def __init__(self, message, line_no=None):
        self.line_no = line_no
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)


class MappingError(ValueError):
    """A simulated position cannot be mapped onto the trace."""


def _substream(seed, batch_index):
    return np.random.Generator(np.random.Philox(key=seed).jumped(batch_index))


def _check_policy(policy):
    if policy not in _POLICIES:
        raise ParameterError(f"unknown association policy {policy!r}")


# ---------------------------------------------------------------------------
# Single realizations (object API; the batch engine below is the hot path)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NetworkRealization:
    """One network draw.  `positions` are corridor coordinates in [-R, R]
    (ground radii for the 2D-disc baseline); `rx_powers` = S * l(d) exclude
    fast fading, which is drawn at SIR time."""

    positions: np.ndarray
    heights: np.ndarray
    shadowing: np.ndarray
    rx_powers: np.ndarray
    fading: Optional[np.ndarray] = None

    @property
    def n(self):
        return len(self.positions)

    def distances(self):
        return np.hypot(self.positions, self.heights)


@dataclass(frozen=True)
class SirSample:
    serving_index: int
    sir: float  # linear; inf for single-UAV realizations
    n_uavs: int


def _draw_positions(spatial, geom, rng, size):
    """(positions, counts) for `size` trials; positions padded to the max count."""
    if isinstance(spatial, BPP):
        counts = np.full(size, spatial.n)
        pos = rng.uniform(-geom.R, geom.R, (size, spatial.n))
    elif isinstance(spatial, FiniteHPPP):
        counts = rng.poisson(spatial.intensity * geom.length, size)
        k = max(int(counts.max()), 1)
        pos = rng.uniform(-geom.R, geom.R, (size, k))
    elif isinstance(spatial, Disc2D):
        counts = np.full(size, spatial.n)
        # Uniform in the disc: ground radius density 2r/radius^2.
        pos = spatial.radius * np.sqrt(rng.uniform(0.0, 1.0, (size, spatial.n)))
    else:
        raise ParameterError(f"unsupported spatial model {spatial!r}")
    return pos, counts


def _realize_batch(spatial, geom, channel, size, rng):
    """Vectorized batch of realizations.

    Returns (powers, distances, mask, counts); masked-out padding slots have
    zero power and infinite distance so they never win an association.
    """
    pos, counts = _draw_positions(spatial, geom, rng, size)
    k = pos.shape[1]
    heights = geom.height_model.sample(rng, (size, k))
    shadowing = 1.0 / rng.gamma(channel.q, 1.0 / channel.gamma, (size, k))
    dist = np.hypot(pos, heights)
    powers = shadowing * channel.k_factor * dist ** (-channel.alpha)
    mask = np.arange(k)[None, :] < counts[:, None]
    powers = np.where(mask, powers, 0.0)
    dist = np.where(mask, dist, np.inf)
    return powers, dist, mask, counts


def sample_network(spatial, geom, channel, rng) -> NetworkRealization:
    """Draw one realization: positions, heights, shadowing, received powers."""
    pos, counts = _draw_positions(spatial, geom, rng, 1)
    n = int(counts[0])
    pos = pos[0, :n]
    heights = np.atleast_1d(geom.height_model.sample(rng, (1, len(pos))))[0] if n else np.empty(0)
    shadowing = 1.0 / rng.gamma(channel.q, 1.0 / channel.gamma, n) if n else np.empty(0)
    dist = np.hypot(pos, heights)
    powers = shadowing * channel.k_factor * dist ** (-channel.alpha)
    return NetworkRealization(pos, heights, shadowing, powers)


def associate(realization: NetworkRealization, policy) -> int:
    """Serving index under the policy; ties break to the lowest index."""
    _check_policy(policy)
    if realization.n == 0:
        raise EmptyNetworkError("cannot associate in an empty network")
    if policy == MAX_POWER:
        return int(np.argmax(realization.rx_powers))
    return int(np.argmin(realization.distances()))


def sir_sample(realization: NetworkRealization, policy, channel, rng) -> SirSample:
    """Draw independent per-UAV fading and form the SIR for one realization."""
    if realization.n == 0:
        raise EmptyNetworkError("cannot form an SIR in an empty network")
    serving = associate(realization, policy)
    fading = rng.gamma(channel.m, 1.0 / channel.m, (1, realization.n))[0]
    faded = fading * realization.rx_powers
    interference = faded.sum() - faded[serving]
    sir = math.inf if realization.n == 1 else float(faded[serving] / interference)
    return SirSample(serving_index=serving, sir=sir, n_uavs=realization.n)


# ---------------------------------------------------------------------------
# Batch SIR engine
# ---------------------------------------------------------------------------


def _sir_of_batch(powers, dist, mask, counts, channel, rng, policy):
    fading = rng.gamma(channel.m, 1.0 / channel.m, powers.shape)
    return _combine_sir(powers, dist, mask, counts, fading, policy)


def _combine_sir(powers, dist, mask, counts, fading, policy):
    keep = counts > 0
    if policy == MAX_POWER:
        serving = np.argmax(powers, axis=1)
    else:
        serving = np.argmin(dist, axis=1)
    faded = np.where(mask, fading * powers, 0.0)
    total = faded.sum(axis=1)
    rows = np.arange(powers.shape[0])
    signal = faded[rows, serving]
    interference = np.maximum(total - signal, 0.0)
    sir = np.divide(
        signal,
        interference,
        out=np.full_like(signal, np.inf),
        where=interference > 0,
    )
    return sir[keep]


def _batch_plan(trials, batch_size):
    n_batches = (trials + batch_size - 1) // batch_size
    return [(b, min(batch_size, trials - b * batch_size)) for b in range(n_batches)]


def simulate_sir(
    spatial,
    geom,
    channel,
    trials,
    seed,
    policy=MAX_POWER,
    batch_size=DEFAULT_BATCH_SIZE,
    workers=1,
):
    """Linear SIR samples over `trials` network draws.

    Empty HPPP realizations are excluded (the analytic side conditions on a
    non-empty corridor); single-UAV realizations yield SIR = inf.  Returns
    (sirs, n_excluded).
    """
    _check_policy(policy)
    if trials < 1:
        raise ParameterError("trials must be >= 1")
    plan = _batch_plan(trials, batch_size)

    def run(item):
        b, size = item
        rng = _substream(seed, b)
        powers, dist, mask, counts = _realize_batch(spatial, geom, channel, size, rng)
        return _sir_of_batch(powers, dist, mask, counts, channel, rng, policy), size - (
            counts > 0
        ).sum()

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, plan))
    else:
        results = [run(item) for item in plan]
    sirs = np.concatenate([r[0] for r in results]) if results else np.empty(0)
    n_excluded = int(sum(r[1] for r in results))
    return sirs, n_excluded


def simulate_sir_paired(
    spatial,
    geom,
    channel,
    trials,
    seed,
    batch_size=DEFAULT_BATCH_SIZE,
    workers=1,
):
    """SIRs under both association policies on the SAME realizations (common
    random numbers).  Returns (sir_max_power, sir_min_distance,
    disagreement_fraction)."""
    if trials < 1:
        raise ParameterError("trials must be >= 1")
    plan = _batch_plan(trials, batch_size)

    def run(item):
        b, size = item
        rng = _substream(seed, b)
        powers, dist, mask, counts = _realize_batch(spatial, geom, channel, size, rng)
        fading = rng.gamma(channel.m, 1.0 / channel.m, powers.shape)
        keep = counts > 0
        sir_mp = _combine_sir(powers, dist, mask, counts, fading, MAX_POWER)
        sir_md = _combine_sir(powers, dist, mask, counts, fading, MIN_DISTANCE)
        disagree = (np.argmax(powers, axis=1) != np.argmin(dist, axis=1))[keep]
        return sir_mp, sir_md, disagree

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, plan))
    else:
        results = [run(item) for item in plan]
    sir_mp = np.concatenate([r[0] for r in results])
    sir_md = np.concatenate([r[1] for r in results])
    disagree = np.concatenate([r[2] for r in results])
    return sir_mp, sir_md, float(disagree.mean())


# ---------------------------------------------------------------------------
# Coverage curves
# ---------------------------------------------------------------------------


@dataclass
class CoverageCurve:
    """Coverage values over a theta grid (dB), plus provenance metadata."""

    theta_db: np.ndarray
    coverage: np.ndarray
    provenance: str  # analytic | simulated | replayed
    n_trials: int = 0
    stderr: Optional[np.ndarray] = None

    def max_gap(self, other: "CoverageCurve"):
        if not np.array_equal(self.theta_db, other.theta_db):
            raise GridMismatchError("coverage curves use different theta grids")
        return float(np.max(np.abs(self.coverage - other.coverage)))


def coverage_from_sirs(sirs, theta_db, provenance="simulated"):
    """Empirical survival function of the SIR samples on a dB grid."""
    theta_db = np.atleast_1d(np.asarray(theta_db, dtype=float))
    thetas = db_to_linear(theta_db)
    n = len(sirs)
    if n == 0:
        raise ParameterError("no SIR samples (all realizations empty?)")
    cov = np.array([(sirs > th).mean() for th in thetas])
    stderr = np.sqrt(cov * (1.0 - cov) / n)
    return CoverageCurve(theta_db, cov, provenance, n_trials=n, stderr=stderr)


def empirical_coverage(
    spatial,
    geom,
    channel,
    theta_db,
    trials,
    seed,
    policy=MAX_POWER,
    batch_size=DEFAULT_BATCH_SIZE,
    workers=1,
):
    """Monte Carlo coverage curve: fraction of SIR samples above each
    threshold.  Empty HPPP realizations are excluded from the denominator;
    single-UAV realizations count as covered (infinite SIR)."""
    sirs, _ = simulate_sir(
        spatial, geom, channel, trials, seed, policy=policy, batch_size=batch_size, workers=workers
    )
    return coverage_from_sirs(sirs, theta_db)


# ---------------------------------------------------------------------------
# Variable-height studies
# ---------------------------------------------------------------------------


@dataclass
class HeightStudyResult:
    fixed: CoverageCurve
    variable: CoverageCurve
    max_gap: float


def variable_height_study(
    spatial,
    R,
    fixed_h,
    height_model: HeightModel,
    channel,
    theta_db,
    trials,
    seed,
    policy=MAX_POWER,
    workers=1,
):
    """Coverage under a fixed height vs a variable-height model.

    The two runs use the same master seed but are statistically independent
    (height sampling consumes different amounts of the stream), so the
    reported max_gap carries Monte Carlo noise from both curves.
    """
    geom_fixed = CorridorGeometry(R, FixedHeight(fixed_h))
    geom_var = CorridorGeometry(R, height_model)
    fixed = empirical_coverage(
        spatial, geom_fixed, channel, theta_db, trials, seed, policy=policy, workers=workers
    )
    var = empirical_coverage(
        spatial, geom_var, channel, theta_db, trials, seed, policy=policy, workers=workers
    )
    return HeightStudyResult(fixed=fixed, variable=var, max_gap=fixed.max_gap(var))


def fit_normal_height(samples):
    """Moment fit of a Normal height model: (mu, sigma)."""
    samples = np.asarray(samples, dtype=float)
    return float(samples.mean()), float(samples.std(ddof=1))


@dataclass
class HeightKlResult:
    mu: float
    sigma: float
    uniform_low: float
    uniform_high: float
    kl_normal: float
    kl_uniform: float
    sir_true: "EmpiricalDistribution"
    sir_normal: "EmpiricalDistribution"
    sir_uniform: "EmpiricalDistribution"


def height_model_kl_study(
    spatial,
    R,
    data_heights,
    channel,
    trials,
    seed,
    edges_db=None,
    batch_size=DEFAULT_BATCH_SIZE,
):
    """KL comparison of fitted Normal vs Uniform height models.

    Simulates the SIR distribution three times with identical positions,
    shadowing and fading; only the per-UAV heights differ, all derived from
    the same underlying uniforms through the inverse CDF of (a) the data's
    empirical distribution, (b) the moment-fitted Normal, (c) the
    moment-fitted Uniform.  The coupling removes the shared Monte Carlo
    noise, so the reported KL values isolate the height-model mismatch.
    """
    from scipy.special import ndtri

    data = np.sort(np.asarray(data_heights, dtype=float))
    mu, sigma = fit_normal_height(data)
    lo, hi = fit_uniform_height(data)
    if edges_db is None:
        edges_db = np.arange(-30.0, 30.5, 1.0)
    edges_db = np.asarray(edges_db, dtype=float)
    data_probs = np.linspace(0.0, 1.0, len(data))

    def transforms(u):
        h_true = np.interp(u, data_probs, data)
        h_norm = np.maximum(mu + sigma * ndtri(u), 1e-9)
        h_unif = lo + (hi - lo) * u
        return {"true": h_true, "normal": h_norm, "uniform": np.maximum(h_unif, 1e-9)}

    geom = CorridorGeometry(R, FixedHeight(max(mu, 1e-9)))
    counts_hist = {k: np.zeros(len(edges_db) - 1, dtype=np.int64) for k in ("true", "normal", "uniform")}
    n_kept = {k: 0 for k in counts_hist}

    for b, size in _batch_plan(trials, batch_size):
        rng = _substream(seed, b)
        pos, counts = _draw_positions(spatial, geom, rng, size)
        shape = pos.shape
        u_h = rng.uniform(0.0, 1.0, shape)
        shadowing = 1.0 / rng.gamma(channel.q, 1.0 / channel.gamma, shape)
        fading = rng.gamma(channel.m, 1.0 / channel.m, shape)
        mask = np.arange(shape[1])[None, :] < counts[:, None]
        for key, heights in transforms(u_h).items():
            dist = np.hypot(pos, heights)
            powers = shadowing * channel.k_factor * dist ** (-channel.alpha)
            powers = np.where(mask, powers, 0.0)
            dist = np.where(mask, dist, np.inf)
            sir = _combine_sir(powers, dist, mask, counts, fading, MAX_POWER)
            sir_db = linear_to_db(sir[np.isfinite(sir) & (sir > 0)])
            inside = sir_db[(sir_db >= edges_db[0]) & (sir_db <= edges_db[-1])]
            counts_hist[key] += np.histogram(inside, bins=edges_db)[0]
            n_kept[key] += len(inside)

    dists = {}
    widths = np.diff(edges_db)
    for key, counts_k in counts_hist.items():
        if counts_k.sum() == 0:
            raise ParameterError("no SIR samples fell inside the histogram grid")
        dists[key] = EmpiricalDistribution(
            edges=edges_db, density=counts_k / (counts_k.sum() * widths), n_samples=n_kept[key]
        )

    return HeightKlResult(
        mu=mu,
        sigma=sigma,
        uniform_low=lo,
        uniform_high=hi,
        kl_normal=kl_divergence(dists["true"], dists["normal"]),
        kl_uniform=kl_divergence(dists["true"], dists["uniform"]),
        sir_true=dists["true"],
        sir_normal=dists["normal"],
        sir_uniform=dists["uniform"],
    )


def fit_uniform_height(samples):
    """Moment fit of a Uniform height model: mean +- sqrt(3) * std."""
    samples = np.asarray(samples, dtype=float)
    mu = samples.mean()
    half = math.sqrt(3.0) * samples.std(ddof=1)
    return float(mu - half), float(mu + half)


# ---------------------------------------------------------------------------
# Empirical distributions and KL divergence
# ---------------------------------------------------------------------------


@dataclass
class EmpiricalDistribution:
    """Histogram density on a fixed bin grid; integrates to 1."""

    edges: np.ndarray
    density: np.ndarray
    n_samples: int = 0

    @classmethod
    def from_samples(cls, samples, edges):
        samples = np.asarray(samples, dtype=float)
        edges = np.asarray(edges, dtype=float)
        finite = samples[np.isfinite(samples)]
        inside = finite[(finite >= edges[0]) & (finite <= edges[-1])]
        if len(inside) == 0:
            raise ParameterError("no samples fall inside the histogram grid")
        counts, _ = np.histogram(inside, bins=edges)
        widths = np.diff(edges)
        density = counts / (counts.sum() * widths)
        return cls(edges=edges, density=density, n_samples=len(inside))

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        idx = np.clip(np.searchsorted(self.edges, x, side="right") - 1, 0, len(self.density) - 1)
        out = np.where((x >= self.edges[0]) & (x <= self.edges[-1]), self.density[idx], 0.0)
        return float(out) if out.ndim == 0 else out

    def cdf(self, x):
        widths = np.diff(self.edges)
        cum = np.concatenate([[0.0], np.cumsum(self.density * widths)])
        x = np.asarray(x, dtype=float)
        out = np.interp(x, self.edges, cum)
        return float(out) if out.ndim == 0 else out


def kl_divergence(p: EmpiricalDistribution, q: EmpiricalDistribution, epsilon=1e-12):
    """KL(p || q) in nats on a shared grid.

    q-bins that are empty where p has mass get an additive epsilon so the
    sum stays finite; bins are otherwise untouched, which keeps KL(p, p)
    exactly zero and preserves the Gibbs bound KL >= 0.
    """
    if p.edges.shape != q.edges.shape or not np.allclose(p.edges, q.edges):
        raise GridMismatchError("KL divergence needs a shared bin grid")
    widths = np.diff(p.edges)
    mask = p.density > 0
    qd = np.maximum(q.density[mask], epsilon)
    return float(np.sum(p.density[mask] * np.log(p.density[mask] / qd) * widths[mask]))


def sir_distribution(sirs, edges_db):
    """Empirical SIR pdf in dB from linear SIR samples (infinite SIRs are
    outside any finite grid and are dropped)."""
    sirs = np.asarray(sirs, dtype=float)
    finite = sirs[np.isfinite(sirs) & (sirs > 0)]
    return EmpiricalDistribution.from_samples(linear_to_db(finite), np.asarray(edges_db, float))


# ---------------------------------------------------------------------------
# Measurement traces and replay
# ---------------------------------------------------------------------------

_TRACE_HEADER = ["position_m", "height_m", "rx_power_dbm"]


@dataclass(frozen=True)
class Trace:
    """A power-versus-position record along the corridor.

    Positions are strictly increasing; nearest-sample mapping error is half
    the sample spacing, which must not exceed the declared accuracy.
    """

    position_m: np.ndarray
    height_m: np.ndarray
    rx_power_dbm: np.ndarray
    mapping_accuracy_m: float = 5e-4

    def __post_init__(self):
        for name in ("position_m", "height_m", "rx_power_dbm"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        pos = self.position_m
        if len(pos) < 2:
            raise TraceFormatError("a trace needs at least two samples")
        if not (len(pos) == len(self.height_m) == len(self.rx_power_dbm)):
            raise TraceFormatError("trace columns have different lengths")
        gaps = np.diff(pos)
        if np.any(gaps <= 0):
            bad = int(np.argmax(gaps <= 0))
            raise TraceFormatError(
                f"positions must be strictly increasing (violated after sample {bad})"
            )
        if gaps.max() / 2.0 > self.mapping_accuracy_m * (1 + 1e-9):
            raise TraceFormatError(
                f"sample spacing {gaps.max():.6g} m cannot honor the declared "
                f"mapping accuracy {self.mapping_accuracy_m:.6g} m"
            )

    @property
    def n_samples(self):
        return len(self.position_m)

    @property
    def spacing(self):
        return float(np.median(np.diff(self.position_m)))

    @classmethod
    def from_csv(cls, path, mapping_accuracy_m=None):
        positions, heights, powers = [], [], []
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or [c.strip() for c in header] != _TRACE_HEADER:
                raise TraceFormatError(
                    f"expected header {','.join(_TRACE_HEADER)!r}", line_no=1
                )
            for line_no, row in enumerate(reader, start=2):
                if not row:
                    continue
                if len(row) != 3:
                    raise TraceFormatError(f"expected 3 fields, got {len(row)}", line_no=line_no)
                try:
                    p, h, z = (float(v) for v in row)
                except ValueError as exc:
                    raise TraceFormatError(str(exc), line_no=line_no) from None
                positions.append(p)
                heights.append(h)
                powers.append(z)
        pos = np.array(positions)
        if len(pos) >= 2 and np.any(np.diff(pos) <= 0):
            bad = int(np.argmax(np.diff(pos) <= 0)) + 3  # header + 1-based + next row
            raise TraceFormatError("positions must be strictly increasing", line_no=bad)
        if mapping_accuracy_m is None:
            mapping_accuracy_m = float(np.diff(pos).max() / 2.0) if len(pos) >= 2 else 5e-4
        return cls(pos, np.array(heights), np.array(powers), mapping_accuracy_m)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(_TRACE_HEADER)
            for p, h, z in zip(self.position_m, self.height_m, self.rx_power_dbm):
                writer.writerow([repr(float(p)), repr(float(h)), repr(float(z))])

    def nearest_index(self, positions):
        """Index of the nearest trace sample per position; raises
        MappingError if any position lies outside the trace extent."""
        positions = np.asarray(positions, dtype=float)
        lo, hi = self.position_m[0], self.position_m[-1]
        bad = (positions < lo) | (positions > hi)
        if bad.any():
            offending = float(positions[bad].ravel()[0])
            raise MappingError(
                f"position {offending:.6g} m outside trace extent [{lo:.6g}, {hi:.6g}] m"
            )
        right = np.searchsorted(self.position_m, positions).clip(1, self.n_samples - 1)
        left = right - 1
        pick_right = (self.position_m[right] - positions) <= (positions - self.position_m[left])
        return np.where(pick_right, right, left)


def synthesize_trace(geom, channel, spacing, seed, include_fading=False):
    """Model-generated trace: one shadowing (and optionally fading) draw per
    recorded position, powers from the channel model, heights from the
    geometry's height model.  Used for replay closure tests."""
    rng = _substream(seed, 0)
    n = int(round(geom.length / spacing)) + 1
    pos = np.linspace(-geom.R, geom.R, n)
    heights = np.asarray(geom.height_model.sample(rng, n), dtype=float)
    shadowing = 1.0 / rng.gamma(channel.q, 1.0 / channel.gamma, n)
    powers = shadowing * channel.k_factor * np.hypot(pos, heights) ** (-channel.alpha)
    if include_fading:
        powers = powers * rng.gamma(channel.m, 1.0 / channel.m, n)
    actual_spacing = pos[1] - pos[0]
    return Trace(pos, heights, np.asarray(linear_to_db(powers)), mapping_accuracy_m=actual_spacing / 2)


@dataclass
class ReplayResult:
    coverage: CoverageCurve
    sir: EmpiricalDistribution
    n_trials: int


def trace_replay(
    trace: Trace,
    spatial,
    geom,
    trials,
    theta_db,
    seed,
    policy=MAX_POWER,
    fading_mode="redraw",
    m=1.0,
    sir_edges_db=None,
    batch_size=DEFAULT_BATCH_SIZE,
):
    """Emulate a multi-UAV network from a recorded trace.

    Per trial: draw spatial positions, map each to the nearest trace sample,
    take that sample's power (dBm -> linear); the strongest mapped power
    serves and the rest interfere.  fading_mode="redraw" draws fresh
    Nakagami-m fading per mapped UAV (matching the simulator's SIR
    convention); "fromtrace" uses the recorded powers as-is, i.e. whatever
    fast fading the trace embeds.
    """
    _check_policy(policy)
    if fading_mode not in ("redraw", "fromtrace"):
        raise ParameterError(f"unknown fading mode {fading_mode!r}")
    if trace.position_m[0] > -geom.R or trace.position_m[-1] < geom.R:
        raise MappingError(
            f"trace extent [{trace.position_m[0]:.6g}, {trace.position_m[-1]:.6g}] m "
            f"does not cover the corridor [-{geom.R:.6g}, {geom.R:.6g}] m"
        )
    if sir_edges_db is None:
        sir_edges_db = np.arange(-40.0, 40.5, 0.5)

    trace_power = np.asarray(db_to_linear(trace.rx_power_dbm))
    trace_dist = np.hypot(trace.position_m, trace.height_m)

    all_sirs = []
    for b, size in _batch_plan(trials, batch_size):
        rng = _substream(seed, b)
        pos, counts = _draw_positions(spatial, geom, rng, size)
        idx = trace.nearest_index(pos)
        powers = trace_power[idx]
        dist = trace_dist[idx]
        k = pos.shape[1]
        mask = np.arange(k)[None, :] < counts[:, None]
        powers = np.where(mask, powers, 0.0)
        dist = np.where(mask, dist, np.inf)
        if fading_mode == "redraw":
            fading = rng.gamma(m, 1.0 / m, powers.shape)
        else:
            fading = np.ones_like(powers)
        all_sirs.append(_combine_sir(powers, dist, mask, counts, fading, policy))

    sirs = np.concatenate(all_sirs)
    curve = coverage_from_sirs(sirs, theta_db, provenance="replayed")
    dist_est = sir_distribution(sirs, sir_edges_db)
    return ReplayResult(coverage=curve, sir=dist_est, n_trials=len(sirs))
