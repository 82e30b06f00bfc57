"""Command-line front end: coverage experiments, trace replay, height studies.

Configuration is an INI file (key-value with sections, see README for the
schema) plus flag overrides; flags win.  Thresholds are accepted in dB at
every interface and converted once; all internal math is linear.

Exit codes: 0 ok, 2 configuration, 3 numerical failure, 4 I/O, 5 data
insufficiency.  Set CORRIDOR_COV_LOG=debug|info|warning for verbosity.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import logging
import math
import os
import sys
import time
from datetime import datetime, timezone

import numpy as np

from . import analytic, simulator
from .core import (
    BPP,
    ChannelParams,
    CorridorGeometry,
    Disc2D,
    FiniteHPPP,
    FixedHeight,
    NormalHeight,
    ParameterError,
    UniformHeight,
    carrier_factor_from_frequency,
    db_to_linear,
)
from .quadrature import QuadratureError
from .simulator import MappingError, Trace, TraceFormatError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_IO = 4
EXIT_DATA = 5

log = logging.getLogger("corridor_cov")

CSV_COLUMNS = ["sweep_value", "method", "coverage", "stderr", "seed", "config_hash"]

_METHOD_ALIASES = {
    "exact": "exact",
    "dominant": "dominant",
    "single-dominant": "single_dominant",
    "single_dominant": "single_dominant",
    "mc": "mc",
    "montecarlo": "mc",
}


class ConfigError(ValueError):
    pass


class DataInsufficiencyError(ValueError):
    pass


DEFAULTS = {
    "geometry": {
        "r": "500.0",
        "height_model": "fixed",  # fixed | uniform | normal
        "height": "100.0",
        "height_low": "160.0",
        "height_high": "240.0",
        "height_mu": "200.0",
        "height_sigma": "15.0",
    },
    "channel": {
        "alpha": "2.2",
        "q": "2.0",
        "gamma": "",  # blank -> q - 1 (unit-mean shadowing)
        "m": "1.0",
        "carrier_frequency_hz": "",  # blank -> carrier factor off
    },
    "spatial": {
        "model": "bpp",  # bpp | hppp | disc
        "n": "10",
        "intensity": "",  # blank -> n / (2 R)
        "disc_radius": "",  # blank -> geometry r
    },
    "run": {
        "theta_db": "-3.0",
        "trials": "10000",
        "seed": "1",
        "workers": "1",
        "batch_size": "65536",
    },
    "sweep": {
        "axis": "theta",
        "start": "-10",
        "stop": "10",
        "step": "1",
        "values": "",
        "methods": "exact,mc",
    },
    "replay": {
        "fading": "redraw",
    },
    "height_study": {
        "source": "synthetic",  # synthetic | trace
        "dist": "normal",
        "mean": "200.0",
        "sigma": "15.0",
        "low": "160.0",
        "high": "240.0",
        "count": "100000",
        "r": "200.0",
        "kl_trials": "50000",
        "curve_trials": "50000",
    },
}


def _load_config(path):
    cfg = {section: dict(values) for section, values in DEFAULTS.items()}
    if path is not None:
        if not os.path.exists(path):
            raise ConfigError(f"config file not found: {path}")
        parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
        try:
            parser.read(path)
        except configparser.Error as exc:
            raise ConfigError(f"cannot parse config file {path}: {exc}") from exc
        for section in parser.sections():
            if section not in cfg:
                raise ConfigError(f"unknown config section [{section}]")
            for key, value in parser.items(section):
                if key not in cfg[section]:
                    raise ConfigError(f"unknown config key {key!r} in section [{section}]")
                cfg[section][key] = value
    return cfg


def _apply_overrides(cfg, args):
    pairs = [
        ("run", "seed", "seed"),
        ("run", "trials", "trials"),
        ("run", "workers", "workers"),
        ("run", "theta_db", "theta_db"),
        ("sweep", "axis", "sweep"),
        ("sweep", "start", "start"),
        ("sweep", "stop", "stop"),
        ("sweep", "step", "step"),
        ("sweep", "values", "values"),
        ("sweep", "methods", "methods"),
        ("replay", "fading", "fading"),
    ]
    for section, key, attr in pairs:
        value = getattr(args, attr, None)
        if value is not None:
            cfg[section][key] = str(value)
    return cfg


def _get_float(cfg, section, key, allow_blank=False):
    raw = cfg[section][key].strip()
    if raw == "":
        if allow_blank:
            return None
        raise ConfigError(f"[{section}] {key} must be set")
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key}={raw!r} is not a number") from None


def _get_int(cfg, section, key):
    value = _get_float(cfg, section, key)
    if value != int(value):
        raise ConfigError(f"[{section}] {key} must be an integer")
    return int(value)


def build_geometry(cfg):
    r = _get_float(cfg, "geometry", "r")
    kind = cfg["geometry"]["height_model"].strip().lower()
    if kind == "fixed":
        model = FixedHeight(_get_float(cfg, "geometry", "height"))
    elif kind == "uniform":
        model = UniformHeight(
            _get_float(cfg, "geometry", "height_low"), _get_float(cfg, "geometry", "height_high")
        )
    elif kind == "normal":
        model = NormalHeight(
            _get_float(cfg, "geometry", "height_mu"), _get_float(cfg, "geometry", "height_sigma")
        )
    else:
        raise ConfigError(f"unknown height model {kind!r}")
    return CorridorGeometry(r, model)


def build_channel(cfg):
    f_c = _get_float(cfg, "channel", "carrier_frequency_hz", allow_blank=True)
    return ChannelParams(
        alpha=_get_float(cfg, "channel", "alpha"),
        q=_get_float(cfg, "channel", "q"),
        gamma=_get_float(cfg, "channel", "gamma", allow_blank=True),
        m=_get_float(cfg, "channel", "m"),
        carrier_factor=None if f_c is None else carrier_factor_from_frequency(f_c),
    )


def build_spatial(cfg, geom):
    kind = cfg["spatial"]["model"].strip().lower()
    if kind == "bpp":
        return BPP(_get_int(cfg, "spatial", "n"))
    if kind == "hppp":
        intensity = _get_float(cfg, "spatial", "intensity", allow_blank=True)
        if intensity is None:
            intensity = _get_int(cfg, "spatial", "n") / geom.length
        return FiniteHPPP(intensity)
    if kind == "disc":
        radius = _get_float(cfg, "spatial", "disc_radius", allow_blank=True)
        return Disc2D(_get_int(cfg, "spatial", "n"), geom.R if radius is None else radius)
    raise ConfigError(f"unknown spatial model {kind!r}")


def config_hash(cfg):
    canonical = json.dumps(cfg, sort_keys=True)
    return hashlib.sha256(canonical.encode()).hexdigest()[:12]


# ---------------------------------------------------------------------------
# Output writers
# ---------------------------------------------------------------------------


def _format_value(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def render_csv(rows):
    lines = [",".join(CSV_COLUMNS)]
    for row in rows:
        lines.append(",".join(_format_value(row[c]) for c in CSV_COLUMNS))
    return "\n".join(lines) + "\n"


def render_json(rows, metadata):
    payload = {
        "metadata": dict(metadata, generated_at=datetime.now(timezone.utc).isoformat()),
        "rows": rows,
    }
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def write_output(text, out):
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w") as fh:
            fh.write(text)


# ---------------------------------------------------------------------------
# coverage subcommand
# ---------------------------------------------------------------------------


def _sweep_values(cfg):
    raw = cfg["sweep"]["values"].strip()
    if raw:
        try:
            values = [float(v) for v in raw.split(",") if v.strip() != ""]
        except ValueError:
            raise ConfigError(f"bad sweep values {raw!r}") from None
    else:
        start = _get_float(cfg, "sweep", "start")
        stop = _get_float(cfg, "sweep", "stop")
        step = _get_float(cfg, "sweep", "step")
        if step <= 0:
            raise ConfigError("sweep step must be positive")
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        values = [start + i * step for i in range(n)]
    if not values:
        raise ConfigError("sweep range is empty")
    return values


def _parse_methods(cfg):
    methods = []
    for token in cfg["sweep"]["methods"].split(","):
        token = token.strip().lower()
        if not token:
            continue
        if token not in _METHOD_ALIASES:
            raise ConfigError(f"unknown method {token!r}")
        methods.append(_METHOD_ALIASES[token])
    if not methods:
        raise ConfigError("no methods requested")
    return methods


def _analytic_coverage(method, theta_linear, spatial, geom, channel):
    if isinstance(spatial, Disc2D):
        raise ConfigError("the 2D disc baseline has no analytic engine; use method=mc")
    try:
        if isinstance(spatial, FiniteHPPP):
            if method != "exact":
                raise ConfigError("dominant-interferer methods apply to the BPP model only")
            return analytic.coverage_hppp(theta_linear, spatial.intensity, geom, channel)
        model = analytic.bpp_model(spatial.n, geom, channel)
        if method == "exact":
            return model.coverage(theta_linear)
        if method == "dominant":
            return model.coverage_dominant(theta_linear)
        return model.coverage_single_dominant(theta_linear)
    except QuadratureError as exc:
        raise QuadratureError(
            f"coverage method {method!r} failed at theta={theta_linear!r}: {exc}",
            best_estimate=exc.best_estimate,
            error_estimate=exc.error_estimate,
            level=exc.level,
        ) from exc


def _with_sweep_value(cfg, axis, value):
    """Geometry/spatial/channel rebuilt with one sweep axis overridden."""
    cfg = {s: dict(v) for s, v in cfg.items()}
    if axis == "lambda":
        cfg["spatial"]["model"] = "hppp"
        cfg["spatial"]["intensity"] = repr(value)
    elif axis == "R":
        cfg["geometry"]["r"] = repr(value)
    elif axis == "h":
        cfg["geometry"]["height_model"] = "fixed"
        cfg["geometry"]["height"] = repr(value)
    elif axis == "N":
        if value != int(value) or value < 1:
            raise ConfigError("sweep over N needs positive integers")
        cfg["spatial"]["n"] = str(int(value))
    else:
        raise ConfigError(f"unknown sweep axis {axis!r}")
    geom = build_geometry(cfg)
    return build_spatial(cfg, geom), geom, build_channel(cfg)


def cmd_coverage(args):
    cfg = _apply_overrides(_load_config(args.config), args)
    axis = cfg["sweep"]["axis"].strip()
    values = _sweep_values(cfg)
    methods = _parse_methods(cfg)
    seed = _get_int(cfg, "run", "seed")
    trials = _get_int(cfg, "run", "trials")
    workers = _get_int(cfg, "run", "workers")
    batch_size = _get_int(cfg, "run", "batch_size")
    theta_db = _get_float(cfg, "run", "theta_db")
    chash = config_hash(cfg)
    t0 = time.time()

    rows = []
    if axis == "theta":
        spatial, geom, channel = (lambda g: (build_spatial(cfg, g), g, build_channel(cfg)))(
            build_geometry(cfg)
        )
        theta_lin = db_to_linear(np.array(values))
        for method in methods:
            if method == "mc":
                curve = simulator.empirical_coverage(
                    spatial, geom, channel, values, trials, seed,
                    batch_size=batch_size, workers=workers,
                )
                for v, c, se in zip(values, curve.coverage, curve.stderr):
                    rows.append(_row(v, "mc", c, se, seed, chash))
            else:
                for v, th in zip(values, theta_lin):
                    cov = _analytic_coverage(method, float(th), spatial, geom, channel)
                    rows.append(_row(v, method, cov, None, seed, chash))
    else:
        theta_lin = float(db_to_linear(theta_db))
        for value in values:
            spatial, geom, channel = _with_sweep_value(cfg, axis, value)
            for method in methods:
                if method == "mc":
                    curve = simulator.empirical_coverage(
                        spatial, geom, channel, [theta_db], trials, seed,
                        batch_size=batch_size, workers=workers,
                    )
                    rows.append(
                        _row(value, "mc", float(curve.coverage[0]), float(curve.stderr[0]), seed, chash)
                    )
                else:
                    cov = _analytic_coverage(method, theta_lin, spatial, geom, channel)
                    rows.append(_row(value, method, cov, None, seed, chash))

    metadata = {
        "command": "coverage",
        "config": cfg,
        "config_hash": chash,
        "seed": seed,
        "runtime_s": round(time.time() - t0, 3),
    }
    _emit(rows, metadata, args)
    return EXIT_OK


def _row(sweep_value, method, coverage, stderr, seed, chash):
    return {
        "sweep_value": float(sweep_value),
        "method": method,
        "coverage": float(coverage),
        "stderr": None if stderr is None else float(stderr),
        "seed": seed,
        "config_hash": chash,
    }


def _emit(rows, metadata, args):
    fmt = args.format
    text = render_csv(rows) if fmt == "csv" else render_json(rows, metadata)
    write_output(text, args.out)


# ---------------------------------------------------------------------------
# replay subcommand
# ---------------------------------------------------------------------------


def cmd_replay(args):
    cfg = _apply_overrides(_load_config(args.config), args)
    geom = build_geometry(cfg)
    spatial = build_spatial(cfg, geom)
    if isinstance(spatial, Disc2D):
        raise ConfigError("trace replay is defined for corridor models (bpp or hppp)")
    seed = _get_int(cfg, "run", "seed")
    trials = _get_int(cfg, "run", "trials")
    channel = build_channel(cfg)
    fading_mode = cfg["replay"]["fading"].strip().lower()
    values = _sweep_values(cfg)
    chash = config_hash(cfg)
    trace = Trace.from_csv(args.trace)
    t0 = time.time()

    rows = []
    sir_tables = {}
    for policy in (simulator.MAX_POWER, simulator.MIN_DISTANCE):
        result = simulator.trace_replay(
            trace, spatial, geom, trials, values, seed,
            policy=policy, fading_mode=fading_mode, m=channel.m,
        )
        method = f"replay_{policy}"
        for v, c, se in zip(values, result.coverage.coverage, result.coverage.stderr):
            rows.append(_row(v, method, c, se, seed, chash))
        sir_tables[policy] = result.sir

    metadata = {
        "command": "replay",
        "trace": args.trace,
        "n_trace_samples": trace.n_samples,
        "config": cfg,
        "config_hash": chash,
        "seed": seed,
        "runtime_s": round(time.time() - t0, 3),
    }
    _emit(rows, metadata, args)

    if args.out is not None:
        stem, _ = os.path.splitext(args.out)
        sir_path = stem + "_sir_pdf.csv"
        edges = sir_tables[simulator.MAX_POWER].edges
        with open(sir_path, "w") as fh:
            fh.write("bin_left_db,bin_right_db,density_max_power,density_min_distance\n")
            dmax = sir_tables[simulator.MAX_POWER].density
            dmin = sir_tables[simulator.MIN_DISTANCE].density
            for i in range(len(dmax)):
                fh.write(
                    f"{_format_value(float(edges[i]))},{_format_value(float(edges[i + 1]))},"
                    f"{_format_value(float(dmax[i]))},{_format_value(float(dmin[i]))}\n"
                )
    return EXIT_OK


# ---------------------------------------------------------------------------
# height-study subcommand
# ---------------------------------------------------------------------------


def _height_samples(cfg, args):
    if args.trace is not None:
        trace = Trace.from_csv(args.trace)
        return np.asarray(trace.height_m, dtype=float), f"trace:{args.trace}"
    dist = cfg["height_study"]["dist"].strip().lower()
    count = _get_int(cfg, "height_study", "count")
    rng = np.random.Generator(np.random.Philox(key=_get_int(cfg, "run", "seed")))
    if dist == "normal":
        mu = _get_float(cfg, "height_study", "mean")
        sigma = _get_float(cfg, "height_study", "sigma")
        samples = NormalHeight(mu, max(sigma, 1e-12)).sample(rng, count) if sigma > 0 else np.full(count, mu)
    elif dist == "uniform":
        lo = _get_float(cfg, "height_study", "low")
        hi = _get_float(cfg, "height_study", "high")
        samples = UniformHeight(lo, hi).sample(rng, count)
    else:
        raise ConfigError(f"unknown synthetic height distribution {dist!r}")
    return np.asarray(samples, dtype=float), f"synthetic:{dist}"


def cmd_height_study(args):
    cfg = _apply_overrides(_load_config(args.config), args)
    heights, source = _height_samples(cfg, args)
    if len(heights) < 30:
        raise DataInsufficiencyError(
            f"need at least 30 height samples to fit a model, got {len(heights)}"
        )
    seed = _get_int(cfg, "run", "seed")
    channel = build_channel(cfg)
    radius = _get_float(cfg, "height_study", "r")
    curve_trials = _get_int(cfg, "height_study", "curve_trials")
    kl_trials = _get_int(cfg, "height_study", "kl_trials")
    values = _sweep_values(cfg)
    chash = config_hash(cfg)
    t0 = time.time()

    mu, sigma = simulator.fit_normal_height(heights)
    lo, hi = simulator.fit_uniform_height(heights)
    cfg_geom = {s: dict(v) for s, v in cfg.items()}
    cfg_geom["geometry"]["r"] = repr(radius)
    spatial = build_spatial(cfg_geom, build_geometry(cfg_geom))
    if isinstance(spatial, Disc2D):
        raise ConfigError("height studies are defined for corridor models (bpp or hppp)")

    rows = []
    fits = {}
    degenerate = sigma < 1e-9
    model_list = [("fixed", FixedHeight(mu))]
    if not degenerate:
        model_list += [
            ("variable_normal", NormalHeight(mu, sigma)),
            ("variable_uniform", UniformHeight(lo, hi)),
        ]
    for name, hm in model_list:
        curve = simulator.empirical_coverage(
            spatial, CorridorGeometry(radius, hm), channel, values, curve_trials, seed
        )
        for v, c, se in zip(values, curve.coverage, curve.stderr):
            rows.append(_row(v, name, c, se, seed, chash))
        fits[name] = curve

    gaps = {
        name: fits[name].max_gap(fits["fixed"]) for name in fits if name != "fixed"
    }

    if degenerate:
        kl_normal = kl_uniform = 0.0
    else:
        kl = simulator.height_model_kl_study(spatial, radius, heights, channel, kl_trials, seed)
        kl_normal, kl_uniform = kl.kl_normal, kl.kl_uniform

    report = {
        "source": source,
        "n_samples": int(len(heights)),
        "fitted_normal": {"mu": mu, "sigma": sigma},
        "fitted_uniform": {"low": lo, "high": hi},
        "max_gap_vs_fixed": gaps,
        "kl_normal": kl_normal,
        "kl_uniform": kl_uniform,
        "normal_preferred": bool(kl_normal <= kl_uniform),
        "config_hash": chash,
        "runtime_s": round(time.time() - t0, 3),
    }

    metadata = {"command": "height-study", "config": cfg, "config_hash": chash, "seed": seed}
    metadata["report"] = report
    _emit(rows, metadata, args)
    if args.out is not None:
        stem, _ = os.path.splitext(args.out)
        with open(stem + "_report.json", "w") as fh:
            json.dump(report, fh, sort_keys=True, indent=2)
            fh.write("\n")
    else:
        sys.stdout.write(json.dumps(report, sort_keys=True, indent=2) + "\n")
    return EXIT_OK


# ---------------------------------------------------------------------------
# selftest subcommand
# ---------------------------------------------------------------------------


def cmd_selftest(args):
    from . import selftest

    failures = selftest.run(trials=args.trials)
    return EXIT_OK if failures == 0 else EXIT_NUMERIC


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(
        prog="corridor-cov",
        description="Coverage probability of UAV corridor-assisted networks: "
        "analytic engine plus Monte Carlo validation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="INI configuration file")
        p.add_argument("--seed", type=int, help="master RNG seed")
        p.add_argument("--trials", type=int, help="Monte Carlo trials")
        p.add_argument("--workers", type=int, help="parallel simulation workers")
        p.add_argument("--out", help="output path (stdout when omitted)")
        p.add_argument("--format", choices=("csv", "json"), default="csv")

    p_cov = sub.add_parser("coverage", help="coverage-probability sweeps")
    common(p_cov)
    p_cov.add_argument("--sweep", choices=("theta", "lambda", "R", "h", "N"))
    p_cov.add_argument("--from", dest="start", type=float, help="sweep start")
    p_cov.add_argument("--to", dest="stop", type=float, help="sweep end (inclusive)")
    p_cov.add_argument("--step", type=float, help="sweep step")
    p_cov.add_argument("--values", help="explicit comma-separated sweep values")
    p_cov.add_argument("--methods", help="comma list: exact,dominant,single-dominant,mc")
    p_cov.add_argument("--theta-db", dest="theta_db", type=float, help="fixed theta for non-theta sweeps")

    p_rep = sub.add_parser("replay", help="measurement-trace replay")
    common(p_rep)
    p_rep.add_argument("--trace", required=True, help="trace CSV (position_m,height_m,rx_power_dbm)")
    p_rep.add_argument("--fading", choices=("redraw", "fromtrace"), help="fading mode")
    p_rep.add_argument("--from", dest="start", type=float, help="theta grid start (dB)")
    p_rep.add_argument("--to", dest="stop", type=float, help="theta grid end (dB)")
    p_rep.add_argument("--step", type=float, help="theta grid step (dB)")

    p_h = sub.add_parser("height-study", help="variable-height model fitting and comparison")
    common(p_h)
    p_h.add_argument("--trace", help="take height samples from this trace CSV")
    p_h.add_argument("--from", dest="start", type=float, help="theta grid start (dB)")
    p_h.add_argument("--to", dest="stop", type=float, help="theta grid end (dB)")
    p_h.add_argument("--step", type=float, help="theta grid step (dB)")

    p_st = sub.add_parser("selftest", help="run the built-in oracle suite")
    p_st.add_argument("--trials", type=int, default=200_000, help="Monte Carlo trials per check")

    return parser


def main(argv=None):
    level = os.environ.get("CORRIDOR_COV_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "coverage": cmd_coverage,
        "replay": cmd_replay,
        "height-study": cmd_height_study,
        "selftest": cmd_selftest,
    }
    try:
        return handlers[args.command](args)
    except (ConfigError, ParameterError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except QuadratureError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (TraceFormatError, MappingError) as exc:
        print(f"trace error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except DataInsufficiencyError as exc:
        print(f"insufficient data: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
