"""Command line entry point: ``run``, ``sweep`` and ``fit``."""

import argparse
import csv
import io
import json
import os
import sys
from dataclasses import asdict, fields

import numpy as np

from . import config as cfgmod
from .closeness import closeness, fit_gamma, min_contact_time
from .engine import EpisodeConfig, UserMetrics, _nominal_x_min, run_episode
from .sweep import AXES, SweepSpec, emit_csv, emit_plot, run_sweep
from .trace import TraceParseError, contact_stats, parse_positions, parse_trace

SWEEP_KEYS = ("axis", "values", "replicas")


def _defaults_epilog():
    flat = cfgmod.flatten(EpisodeConfig())
    lines = ["config keys (flat YAML, unknown keys rejected) and defaults:"]
    for key in cfgmod.ALL_KEYS:
        tag = "  [assumed]" if key in cfgmod.ASSUMED else ""
        lines.append(f"  {key} = {flat[key]}{tag}")
    lines.append("")
    lines.append("[assumed] marks defaults not fixed by the reference setup.")
    return "\n".join(lines)


def _u64(text):
    val = int(text, 0)
    if not 0 <= val < 2**64:
        raise argparse.ArgumentTypeError(f"seed must fit in an unsigned 64-bit integer: {text}")
    return val


def _positive_int(text):
    val = int(text)
    if val < 1:
        raise argparse.ArgumentTypeError(f"expected an integer >= 1, got {text}")
    return val


def _key_value(text):
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected KEY=VALUE, got {text!r}")
    key, raw = text.split("=", 1)
    import yaml

    return key.strip(), yaml.safe_load(raw)


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat YAML config file")
    common.add_argument("--seed", type=_u64, help="master seed (unsigned 64-bit)")
    common.add_argument("--out", default=".", help="output directory (default: current directory)")
    common.add_argument(
        "--set", dest="overrides", action="append", type=_key_value, default=[], metavar="KEY=VALUE",
        help="override one config key; repeatable",
    )

    fmt = argparse.RawDescriptionHelpFormatter
    parser = argparse.ArgumentParser(
        prog="sociald2d",
        description="Social-aware D2D traffic offloading simulator.",
        epilog=_defaults_epilog(),
        formatter_class=fmt,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", parents=[common], help="one episode with per-user metrics",
                           epilog=_defaults_epilog(), formatter_class=fmt)
    p_run.add_argument("--replicas", type=_positive_int, default=1,
                       help="episodes to run with seeds seed, seed+1, ... (default 1)")

    p_sweep = sub.add_parser("sweep", parents=[common], help="replicated sweep over one axis",
                             epilog=_defaults_epilog(), formatter_class=fmt)
    p_sweep.add_argument("--axis", choices=AXES, help="swept parameter")
    p_sweep.add_argument("--values", help="comma-separated, strictly increasing axis values")
    p_sweep.add_argument("--replicas", type=_positive_int, help="episodes per axis value (default 100)")
    p_sweep.add_argument("--jobs", type=_positive_int, default=1, help="worker processes (default 1)")
    p_sweep.add_argument("--no-plot", action="store_true", help="skip the SVG chart")

    p_fit = sub.add_parser("fit", parents=[common], help="trace file -> closeness graph CSV",
                           epilog=_defaults_epilog(), formatter_class=fmt)
    p_fit.add_argument("trace", help="encounter trace CSV (user_a,user_b,start_s,duration_s)")
    p_fit.add_argument("--positions", help="positions CSV (user_id,x_m,y_m); sets per-pair X_min from the link budget")
    p_fit.add_argument("--x-min", type=float,
                       help="minimum contact time in seconds for every pair "
                            "(default: content_bits / bandwidth, i.e. a 1 bit/s/Hz link)")
    return parser


def _load(args, extra_keys=()):
    extras = {}
    if args.config:
        config, extras = cfgmod.load_config(args.config, extra_keys=extra_keys)
    else:
        config = EpisodeConfig()
    if args.overrides:
        config = cfgmod.apply_overrides(config, dict(args.overrides))
    if args.seed is not None:
        config = config.with_value("seed", args.seed)
    return config, extras


def _write(path, data):
    mode = "wb" if isinstance(data, bytes) else "w"
    with open(path, mode, **({} if mode == "wb" else {"encoding": "utf-8", "newline": ""})) as fh:
        fh.write(data)


def cmd_run(args):
    base, _ = _load(args)
    os.makedirs(args.out, exist_ok=True)
    names = [f.name for f in fields(UserMetrics)]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["seed"] + names)
    summary = []
    for r in range(args.replicas):
        cfg = base.with_value("seed", (base.seed + r) % 2**64)
        res = run_episode(cfg)
        for u in res.per_user:
            row = asdict(u)
            w.writerow([cfg.seed] + [repr(row[n]) if isinstance(row[n], float) else row[n] for n in names])
        summary.append({"seed": cfg.seed, "aggregates": res.aggregates, "offsns": res.offsns,
                        "frequent_users": res.frequent_users})
    _write(os.path.join(args.out, "episode_users.csv"), buf.getvalue())
    _write(os.path.join(args.out, "episode.json"), json.dumps(summary, indent=2, sort_keys=True) + "\n")
    for s in summary:
        agg = s["aggregates"]
        print(f"seed={s['seed']} offloaded_traffic={agg['offloaded_traffic']:.6g} "
              f"enb_data_rate_sum={agg['enb_data_rate_sum']:.6g} d2d_success_ratio={agg['d2d_success_ratio']:.6g}")
    return 0


def cmd_sweep(args):
    base, extras = _load(args, SWEEP_KEYS)
    axis = args.axis or extras.get("axis")
    values = args.values if args.values is not None else extras.get("values")
    replicas = args.replicas or extras.get("replicas") or 100
    if axis is None or values is None:
        raise ValueError("sweep needs an axis and values (flags or config keys 'axis'/'values')")
    if isinstance(values, str):
        values = [float(v) for v in values.split(",") if v.strip()]
    spec = SweepSpec(axis, tuple(values), int(replicas), base)
    rows = run_sweep(spec, jobs=args.jobs)
    os.makedirs(args.out, exist_ok=True)
    csv_path = os.path.join(args.out, f"sweep_{axis}.csv")
    _write(csv_path, emit_csv(rows))
    print(csv_path)
    if not args.no_plot:
        svg_path = os.path.join(args.out, f"sweep_{axis}.svg")
        emit_plot(rows, svg_path)
        print(svg_path)
    return 0


def fit_closeness(records, x_min_for):
    """[(a, b, w)] for every pair seen in ``records``, sorted by pair."""
    stats = contact_stats(records)
    return [(a, b, closeness(fit_gamma(stats[(a, b)]), x_min_for(a, b))) for a, b in sorted(stats)]


def cmd_fit(args):
    config, _ = _load(args)
    with open(args.trace, "rb") as fh:
        records = parse_trace(fh.read())
    ch = config.channel
    if args.positions:
        with open(args.positions, "rb") as fh:
            pos = parse_positions(fh.read())
        enb = np.array([config.enb_distance, 0.0])

        def x_min_for(a, b):
            if a not in pos or b not in pos:
                raise KeyError(f"no position for pair ({a}, {b})")
            pa, pb = np.array(pos[a]), np.array(pos[b])
            d = max(float(np.hypot(*(pa - pb))), 1e-3)
            d_enb = max(min(float(np.hypot(*(pa - enb))), float(np.hypot(*(pb - enb)))), 1.0)
            return float(_nominal_x_min(config, np.array([d]), np.array([d_enb]))[0])
    else:
        x_fixed = args.x_min if args.x_min is not None else min_contact_time(config.content_bits, ch.bandwidth)

        def x_min_for(a, b):
            return x_fixed

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["user_a", "user_b", "w"])
    for a, b, val in fit_closeness(records, x_min_for):
        w.writerow([a, b, repr(float(val))])
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "closeness.csv")
    _write(path, buf.getvalue())
    print(path)
    return 0


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    handler = {"run": cmd_run, "sweep": cmd_sweep, "fit": cmd_fit}[args.command]
    try:
        return handler(args)
    except (ValueError, KeyError, TraceParseError, OSError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"sociald2d {args.command}: error: {msg}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
