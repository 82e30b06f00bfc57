"""Built-in oracle suite: quick analytic-versus-simulation cross checks.

Each check prints one PASS/FAIL line.  This is a smoke-level subset of the
full test suite, runnable from the CLI on an installed package.
"""

from __future__ import annotations

import math

import numpy as np

from . import analytic
from .core import (
    BPP,
    ChannelParams,
    CorridorGeometry,
    FiniteHPPP,
    FixedHeight,
    InverseGammaShadowing,
    NakagamiFadingPower,
    link_distance_cdf,
)
from .quadrature import integrate
from .simulator import simulate_sir


def _ks_statistic(samples, cdf):
    samples = np.sort(samples)
    n = len(samples)
    grid = cdf(samples)
    upper = np.abs(np.arange(1, n + 1) / n - grid)
    lower = np.abs(grid - np.arange(0, n) / n)
    return float(max(upper.max(), lower.max()))


def run(trials=200_000, seed=20250811):
    geom = CorridorGeometry(500.0, FixedHeight(100.0))
    channel = ChannelParams(alpha=2.2, q=2.0, m=1.0)
    rng = np.random.default_rng(seed)
    checks = []

    # quadrature corpus
    r = integrate(lambda x: x * x, 0.0, 1.0)
    checks.append(("quadrature polynomial", abs(r.value - 1.0 / 3.0) < 1e-10))
    r = integrate(lambda x: np.exp(-x), 0.0, math.inf)
    checks.append(("quadrature semi-infinite", abs(r.value - 1.0) < 1e-8))
    r = integrate(lambda x: 1.0 / np.sqrt(x), 0.0, 1.0)
    checks.append(("quadrature endpoint singularity", abs(r.value - 2.0) < 1e-6))

    # channel blocks
    shadow = InverseGammaShadowing(channel.q, channel.gamma)
    s = shadow.sample(rng, 10**5)
    checks.append(("shadowing sampler KS", _ks_statistic(s, shadow.cdf) < 1.63 / math.sqrt(10**5)))
    fading = NakagamiFadingPower(3.0)
    f = fading.sample(rng, 10**5)
    checks.append(("fading sampler KS", _ks_statistic(f, fading.cdf) < 1.63 / math.sqrt(10**5)))
    u = rng.uniform(-geom.R, geom.R, 10**5)
    d = np.hypot(u, 100.0)
    checks.append(
        (
            "link distance CDF",
            _ks_statistic(d, lambda x: link_distance_cdf(x, 100.0, 500.0)) < 1.63 / math.sqrt(10**5),
        )
    )

    # received power pdf normalization
    dist = analytic.ReceivedPowerDistribution(geom, channel)
    checks.append(("received power pdf normalizes", abs(dist.normalization() - 1.0) < 1e-6))

    # Laplace transforms at the origin and against finite differences
    bpp = analytic.bpp_model(10, geom, channel)
    checks.append(("BPP Laplace at s=0", bpp.laplace.evaluate(0.0, 3e-6) == 1.0))
    ch3 = ChannelParams(alpha=2.2, q=2.0, m=3.0)
    bpp3 = analytic.bpp_model(10, geom, ch3)
    x0 = 3e-6
    sarg = 2.0 / x0
    d1 = bpp3.laplace.derivative(1, sarg, x0)
    h_fd = 1e-3 * sarg
    fd = (bpp3.laplace.evaluate(sarg + h_fd, x0) - bpp3.laplace.evaluate(sarg - h_fd, x0)) / (2 * h_fd)
    checks.append(("BPP Laplace derivative vs FD", abs(d1 - fd) <= 1e-5 * abs(fd)))

    lam = 10.0 / geom.length
    hppp = analytic.hppp_model(lam, geom, channel)
    checks.append(("HPPP Laplace at s=0", hppp.laplace.evaluate(0.0, 3e-6) == 1.0))

    # analytic vs Monte Carlo coverage at the default operating point
    theta = 10 ** (-3.0 / 10.0)
    sirs, _ = simulate_sir(BPP(10), geom, channel, trials, seed=seed + 1)
    mc = float((sirs > theta).mean())
    exact = bpp.coverage(theta)
    tol = 0.005 + 4.0 / math.sqrt(trials)
    checks.append((f"exact BPP coverage vs MC ({exact:.4f} vs {mc:.4f})", abs(exact - mc) <= tol))

    sirs, _ = simulate_sir(FiniteHPPP(lam), geom, channel, trials, seed=seed + 2)
    mc = float((sirs > theta).mean())
    exact = hppp.coverage(theta)
    checks.append((f"exact HPPP coverage vs MC ({exact:.4f} vs {mc:.4f})", abs(exact - mc) <= tol))

    # determinism
    a, _ = simulate_sir(BPP(10), geom, channel, 20_000, seed=123)
    b, _ = simulate_sir(BPP(10), geom, channel, 20_000, seed=123)
    checks.append(("deterministic reseeded rerun", bool(np.array_equal(a, b))))

    failures = 0
    for name, ok in checks:
        print(f"{'PASS' if ok else 'FAIL'}  {name}")
        failures += 0 if ok else 1
    print(f"{len(checks) - failures}/{len(checks)} checks passed")
    return failures
