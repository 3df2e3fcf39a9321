"""Command-line front end emitting plot-ready CSV tables.

Subcommands: il-curve, itm, time-itm, optimal-width, replay, metrics,
pool-stats. Each run is fully determined by (inputs, flags, seed); every
emitted CSV carries a comment line recording version, command, and flags.
Exit codes: 0 success, 1 data error (a JSON report goes to stderr), 2 usage
error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .amm import Pool
from .analytics import default_ratio_grid, il_curve
from .gbm import (
    GbmParams,
    WidthSpec,
    default_alpha_grid,
    expected_time_itm,
    fee_proxy_surface,
    itm_probability,
    p_itm,
    simulate_paths,
)
from .replay import (
    EventParseError,
    ReplayExecutionError,
    load_ledgers,
    parse_events,
    pool_stats,
    position_risk_rows,
    replay,
    write_replay_outputs,
)
from .tables import write_csv

_RISK_HEADER = [
    "position_id",
    "mean_daily",
    "vol_daily",
    "cvar05",
    "lifetime_days",
    "time_itm_fraction",
    "width_bps",
]
_STATS_HEADER = [
    "day",
    "unix_time",
    "active_positions",
    "mean_size",
    "median_size",
    "mean_lifetime_days",
    "mean_itm_fraction",
    "median_width_bps",
    "window_mean_daily_volume",
    "window_realized_vol",
]


class UsageError(Exception):
    pass


def _apply_config_overrides(args: argparse.Namespace) -> None:
    """Apply --config JSON values on top of the parsed flags.

    Keys are flag names with dashes as underscores (e.g. {"sigma": 1.4,
    "alpha": "2,8"}); config values take precedence over flags.
    """
    if not getattr(args, "config", None):
        return
    with open(args.config) as fh:
        overrides = json.load(fh)
    if not isinstance(overrides, dict):
        raise UsageError(f"--config {args.config}: must be a JSON object")
    valid = {k for k in vars(args) if k not in ("func", "command", "config")}
    for key, value in overrides.items():
        dest = key.replace("-", "_")
        if dest not in valid:
            raise UsageError(f"--config {args.config}: unknown key {key!r}")
        setattr(args, dest, value)


def _comment(cmd: str, args: argparse.Namespace) -> str:
    # out_dir is where the file lands, not an input: keeping it out of the
    # comment makes identical runs byte-identical wherever they are written
    skip = ("func", "command", "out_dir")
    flags = " ".join(
        f"{k}={v}" for k, v in sorted(vars(args).items()) if k not in skip and not callable(v)
    )
    return f"clamm v{__version__} | cmd={cmd} | {flags}"


def _parse_float_list(text, flag: str) -> list[float]:
    if isinstance(text, (list, tuple)):  # JSON config form
        items = list(text)
    else:
        items = [part.strip() for part in text.split(",") if part.strip()]
    if not items:
        raise UsageError(f"{flag}: list must not be empty")
    try:
        return [float(v) for v in items]
    except (TypeError, ValueError):
        raise UsageError(f"{flag}: cannot parse {text!r} as numbers") from None


def _alpha_tag(alpha: float) -> str:
    return f"{alpha:g}".replace(".", "_")


def _gbm_params(args: argparse.Namespace, horizon: int | None = None) -> GbmParams:
    if args.sigma <= 0:
        raise UsageError(f"--sigma must be positive, got {args.sigma}")
    if args.paths < 1:
        raise UsageError(f"--paths must be >= 1, got {args.paths}")
    return GbmParams(
        mu=args.mu,
        sigma=args.sigma,
        horizon_days=horizon if horizon is not None else args.days,
        n_paths=args.paths,
        seed=args.seed,
    )


def cmd_il_curve(args: argparse.Namespace) -> int:
    alphas = _parse_float_list(args.alpha, "--alpha")
    for a in alphas:
        if a <= 1.0:
            raise UsageError(f"--alpha values must be > 1, got {a}")
    ratios = default_ratio_grid(args.ratio_min, args.ratio_max, args.ratio_points)
    comment = _comment("il-curve", args)
    written = []
    for a in alphas:
        rows = il_curve(a, ratios, entry=args.entry)
        path = os.path.join(args.out_dir, f"il_alpha_{_alpha_tag(a)}.csv")
        written.append(
            write_csv(path, f"{comment} | range=[s0/{a:g}, {a:g}*s0] entry={args.entry}",
                      ["price_ratio", "il"], rows)
        )
    rows = il_curve(None, ratios)
    written.append(
        write_csv(os.path.join(args.out_dir, "il_v2.csv"),
                  f"{comment} | range=full", ["price_ratio", "il"], rows)
    )
    for path in written:
        print(path)
    return 0


def cmd_itm(args: argparse.Namespace) -> int:
    alphas = _parse_float_list(args.alpha, "--alpha")
    for a in alphas:
        if a <= 1.0:
            raise UsageError(f"--alpha values must be > 1, got {a}")
    params = _gbm_params(args)
    paths = simulate_paths(params)
    comment = _comment("itm", args)
    for a in alphas:
        pairs = p_itm(paths, WidthSpec(a), first_passage=args.first_passage)
        if args.first_passage:
            header = ["t_days", "p_itm"]
            rows = pairs
        else:
            header = ["t_days", "p_itm", "p_itm_exact"]
            rows = [
                (t, p, itm_probability(a, t, params.sigma, params.mu)) for t, p in pairs
            ]
        path = os.path.join(args.out_dir, f"p_itm_alpha_{_alpha_tag(a)}.csv")
        print(write_csv(path, f"{comment} | alpha={a:g}", header, rows))
    return 0


def cmd_time_itm(args: argparse.Namespace) -> int:
    alphas = _parse_float_list(args.alpha, "--alpha")
    for a in alphas:
        if a <= 1.0:
            raise UsageError(f"--alpha values must be > 1, got {a}")
    params = _gbm_params(args)
    paths = simulate_paths(params)
    comment = _comment("time-itm", args)
    for a in alphas:
        pairs = expected_time_itm(paths, WidthSpec(a), first_passage=args.first_passage)
        path = os.path.join(args.out_dir, f"time_itm_alpha_{_alpha_tag(a)}.csv")
        print(write_csv(path, f"{comment} | alpha={a:g}", ["t_days", "fraction"], pairs))
    return 0


def cmd_optimal_width(args: argparse.Namespace) -> int:
    horizons = _parse_float_list(args.horizons, "--horizons")
    for t in horizons:
        if t <= 0:
            raise UsageError(f"--horizons must be positive, got {t}")
    if args.alpha_points < 2 or args.alpha_min <= 1.0 or args.alpha_max <= args.alpha_min:
        raise UsageError("need --alpha-min > 1, --alpha-max > --alpha-min, --alpha-points >= 2")
    horizon = int(max(horizons))
    params = _gbm_params(args, horizon=max(horizon, args.days))
    alphas = default_alpha_grid(args.alpha_min, args.alpha_max, args.alpha_points)
    paths = simulate_paths(params)
    curves = fee_proxy_surface(paths, alphas, horizons)
    comment = _comment("optimal-width", args)
    stars = []
    for t in horizons:
        curve = curves[float(t)]
        best = int(np.argmax([proxy for _, proxy in curve]))
        stars.append((t, curve[best][0]))
        path = os.path.join(args.out_dir, f"fee_proxy_T{t:g}.csv")
        print(write_csv(path, f"{comment} | T={t:g}", ["alpha", "proxy"], curve))
    print(
        write_csv(
            os.path.join(args.out_dir, "optimal_width.csv"),
            comment,
            ["horizon_days", "alpha_star"],
            stars,
        )
    )
    return 0


def cmd_replay(args: argparse.Namespace) -> int:
    events = parse_events(args.events)
    result = replay(events, Pool.from_config(args.pool_config), day_anchor=args.anchor)
    comment = _comment("replay", args)
    paths = write_replay_outputs(result, args.out_dir, comment)
    stats_rows = pool_stats(result, window_days=args.window_days, min_value=args.min_value)
    paths["pool_stats"] = write_csv(
        os.path.join(args.out_dir, "pool_stats.csv"),
        comment,
        _STATS_HEADER,
        [[row[k] for k in _STATS_HEADER] for row in stats_rows],
    )
    for name in sorted(paths):
        print(paths[name])
    if result.partial_fill_seqs:
        print(f"warning: partial fills at seq {result.partial_fill_seqs}", file=sys.stderr)
    return 0


def cmd_pool_stats(args: argparse.Namespace) -> int:
    events = parse_events(args.events)
    result = replay(events, Pool.from_config(args.pool_config), day_anchor=args.anchor)
    stats_rows = pool_stats(result, window_days=args.window_days, min_value=args.min_value)
    path = write_csv(
        os.path.join(args.out_dir, "pool_stats.csv"),
        _comment("pool-stats", args),
        _STATS_HEADER,
        [[row[k] for k in _STATS_HEADER] for row in stats_rows],
    )
    print(path)
    return 0


def cmd_metrics(args: argparse.Namespace) -> int:
    if not (0.0 < args.cvar_level <= 1.0):
        raise UsageError(f"--cvar-level must be in (0, 1], got {args.cvar_level}")
    ledgers = load_ledgers(args.ledgers)
    rows = position_risk_rows(
        ledgers,
        min_lifetime_days=args.min_lifetime,
        min_value=args.min_value,
        level=args.cvar_level,
    )
    header = list(_RISK_HEADER)
    if args.cvar_level != 0.05:
        header[3] = f"cvar{args.cvar_level:g}"
    path = write_csv(
        os.path.join(args.out_dir, "risk_metrics.csv"),
        _comment("metrics", args),
        header,
        [
            [
                r["position_id"],
                r["mean_daily"],
                r["vol_daily"],
                r["cvar"],
                r["lifetime_days"],
                r["time_itm_fraction"],
                r["width_bps"],
            ]
            for r in rows
        ],
    )
    print(path)
    return 0


def _add_gbm_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--sigma", type=float, default=0.7, help="annual volatility (default 0.7)")
    p.add_argument("--mu", type=float, default=0.0, help="annual drift (default 0)")
    p.add_argument("--days", type=int, default=30, help="horizon in days (default 30)")
    p.add_argument("--paths", type=int, default=40000, help="Monte Carlo paths (default 40000)")
    p.add_argument("--seed", type=int, default=0, help="RNG seed (default 0)")


def _add_replay_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--events", required=True, help="event log (CSV or JSON lines)")
    p.add_argument("--pool-config", required=True, help="pool config JSON file")
    p.add_argument(
        "--anchor",
        choices=("midnight", "first-event"),
        default="midnight",
        help="day-boundary anchor (default midnight)",
    )
    p.add_argument("--window-days", type=int, default=30, help="stats window (default 30)")
    p.add_argument(
        "--min-value",
        type=float,
        default=1e-4,
        help="deposit-value report floor in quote units (default 0.0001)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="clamm",
        description="Concentrated-liquidity CPMM simulation and LP analytics.",
    )
    parser.add_argument("--version", action="version", version=f"clamm {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("il-curve", help="impermanent-loss curves per range width")
    p.add_argument("--alpha", default="1.1,4,20", help="comma list of width factors > 1")
    p.add_argument("--entry", choices=("mid", "lower", "upper"), default="mid")
    p.add_argument("--ratio-min", type=float, default=0.05)
    p.add_argument("--ratio-max", type=float, default=20.0)
    p.add_argument("--ratio-points", type=int, default=400)
    p.add_argument("--config", help="JSON file whose values override flags")
    p.add_argument("-o", "--out-dir", default="clamm-out")
    p.set_defaults(func=cmd_il_curve)

    p = sub.add_parser("itm", help="in-range probability vs time per width")
    p.add_argument("--alpha", default="1.1,4,20")
    p.add_argument("--first-passage", action="store_true", help="never-left-range variant")
    _add_gbm_flags(p)
    p.add_argument("--config", help="JSON file whose values override flags")
    p.add_argument("-o", "--out-dir", default="clamm-out")
    p.set_defaults(func=cmd_itm)

    p = sub.add_parser("time-itm", help="expected fraction of time in range")
    p.add_argument("--alpha", default="1.1,4,20")
    p.add_argument("--first-passage", action="store_true")
    _add_gbm_flags(p)
    p.add_argument("--config", help="JSON file whose values override flags")
    p.add_argument("-o", "--out-dir", default="clamm-out")
    p.set_defaults(func=cmd_time_itm)

    p = sub.add_parser("optimal-width", help="fee-proxy-maximizing width per horizon")
    p.add_argument("--horizons", default="1,10,30", help="comma list of horizons in days")
    p.add_argument("--alpha-min", type=float, default=1.01)
    p.add_argument("--alpha-max", type=float, default=20.0)
    p.add_argument("--alpha-points", type=int, default=200)
    _add_gbm_flags(p)
    p.add_argument("--config", help="JSON file whose values override flags")
    p.add_argument("-o", "--out-dir", default="clamm-out")
    p.set_defaults(func=cmd_optimal_width)

    p = sub.add_parser("replay", help="replay an event log into ledgers and stats")
    _add_replay_flags(p)
    p.add_argument("--config", help="JSON file whose values override flags")
    p.add_argument("-o", "--out-dir", default="clamm-out")
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("pool-stats", help="aggregate pool statistics from an event log")
    _add_replay_flags(p)
    p.add_argument("--config", help="JSON file whose values override flags")
    p.add_argument("-o", "--out-dir", default="clamm-out")
    p.set_defaults(func=cmd_pool_stats)

    p = sub.add_parser("metrics", help="per-position risk table from replay output")
    p.add_argument("--ledgers", required=True, help="directory written by 'clamm replay'")
    p.add_argument("--min-lifetime", type=int, default=30, help="days (default 30)")
    p.add_argument("--min-value", type=float, default=1e-4)
    p.add_argument("--cvar-level", type=float, default=0.05)
    p.add_argument("--config", help="JSON file whose values override flags")
    p.add_argument("-o", "--out-dir", default="clamm-out")
    p.set_defaults(func=cmd_metrics)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _apply_config_overrides(args)
        return args.func(args)
    except UsageError as err:
        print(f"usage error: {err}", file=sys.stderr)
        return 2
    except (EventParseError, ReplayExecutionError) as err:
        report = {"error": type(err).__name__, "message": str(err)}
        if isinstance(err, EventParseError):
            report["line"] = err.line
            report["field"] = err.fieldname
        if isinstance(err, ReplayExecutionError):
            report["seq"] = err.seq
        print(json.dumps(report, sort_keys=True), file=sys.stderr)
        return 1
    except (OSError, ValueError, KeyError) as err:
        print(
            json.dumps({"error": type(err).__name__, "message": str(err)}, sort_keys=True),
            file=sys.stderr,
        )
        return 1


if __name__ == "__main__":
    sys.exit(main())
