"""Command-line front end: simulate, predict, compare, topology, selftest.

Exit codes: 0 success, 1 runtime failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

from .harness import (
    ConfigError,
    ExperimentConfig,
    fit_decade_slope,
    format_curve_csv,
    format_prediction_csv,
    gap_db,
    prediction_rows,
    recording_grid,
    resolve_threads,
    run_monte_carlo,
    theory_inputs,
    write_curve_csv,
    topology_for_run,
    write_prediction_csv,
)
from .netgraph import build_combiner, spectral_summary
from .selftest import run_selftest


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="difflab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def with_config(name, help_text, overrides=True):
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("config", help="JSON experiment config")
        sp.add_argument("--output", "-o", help="output CSV path (default: standard output)")
        if overrides:
            sp.add_argument("--seed", type=int, help="override master_seed")
            sp.add_argument("--runs", type=int, help="override runs")
            sp.add_argument("--iterations", type=int, help="override iterations")
            sp.add_argument("--threads", type=int, help="worker processes (default: $DIFFLAB_THREADS or 1)")
            sp.add_argument("--strategies", help="comma-separated subset, e.g. noncoop,diffusion")
        return sp

    with_config("simulate", "run the Monte Carlo experiment and write the learning-curve CSV")
    with_config("predict", "write theoretical predictions on the recording grid")
    with_config("compare", "simulate, predict, and print a gap/slope summary")
    with_config("topology", "print the adjacency list and |p|^2 of the chosen combiner", overrides=False)
    sub.add_parser("selftest", help="run the numerical oracle suite")
    return p


def load_config(path: str, args=None) -> ExperimentConfig:
    try:
        with open(path) as f:
            raw = json.load(f)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top-level JSON value must be an object")
    if args is not None:
        for flag, key in (("seed", "master_seed"), ("runs", "runs"), ("iterations", "iterations"),
                          ("strategies", "strategies")):
            val = getattr(args, flag, None)
            if val is not None:
                raw[key] = val
    try:
        return ExperimentConfig.from_dict(raw)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _cmd_simulate(args) -> int:
    cfg = load_config(args.config, args)
    threads = resolve_threads(args.threads)
    curve = run_monte_carlo(cfg, threads=threads)
    _emit_curve(curve, args.output)
    return 0


def _emit_curve(curve, output):
    if output:
        write_curve_csv(curve, output)
    else:
        sys.stdout.write(format_curve_csv(curve))


def _emit_predictions(rows, output):
    if output:
        write_prediction_csv(rows, output)
    else:
        sys.stdout.write(format_prediction_csv(rows))


def _cmd_predict(args) -> int:
    cfg = load_config(args.config, args)
    rows = prediction_rows(cfg, recording_grid(cfg))
    _emit_predictions(rows, args.output)
    return 0


def _cmd_compare(args) -> int:
    cfg = load_config(args.config, args)
    threads = resolve_threads(args.threads)
    curve = run_monte_carlo(cfg, threads=threads)
    inputs = theory_inputs(cfg)
    rows = prediction_rows(cfg, curve.iterations, inputs)
    if args.output:
        write_curve_csv(curve, args.output)
        root = args.output[:-4] if args.output.endswith(".csv") else args.output
        write_prediction_csv(rows, root + ".predict.csv")
    n = cfg.iterations
    tail = (int(math.ceil(n / math.sqrt(10))), n)
    names = cfg.strategies
    report = sys.stdout
    print(f"runs={cfg.runs} iterations={n} nodes={cfg.n_nodes} seed={cfg.master_seed}", file=report)
    for name in names:
        c = curve[name]
        line = f"{name:12s} ER({n}) = {c.er_db[-1]:8.3f} dB"
        if n >= 10:
            line += f"   slope[{n // 10},{n}] = {fit_decade_slope(c, n // 10, n):7.3f} dB/decade"
        print(line, file=report)
    pairs = [("noncoop", "diffusion"), ("diffusion", "centralized"), ("consensus", "diffusion")]
    for a, b in pairs:
        if a in names and b in names:
            print(f"gap {a} - {b} over [{tail[0]}, {tail[1]}] = {gap_db(curve[a], curve[b], tail):7.3f} dB", file=report)
    exact, mlsp = rows[-1][1], rows[-1][2]
    for name in ("diffusion", "centralized"):
        if name in names:
            print(f"{name} vs predictor at i={n}: sim {curve[name].er_db[-1]:.3f} dB, "
                  f"exact {10 * math.log10(exact):.3f} dB, mlsp {10 * math.log10(mlsp):.3f} dB", file=report)
    return 0


def _cmd_topology(args) -> int:
    cfg = load_config(args.config)
    if cfg.combiner == "identity":
        raise ConfigError("the identity combiner has no topology to print")
    topo = topology_for_run(cfg, 0)
    summary = spectral_summary(build_combiner(cfg.combiner, topo))
    text = topo.format_adjacency() + f"\nperron_norm_sq={summary.perron_norm_sq:.17g}\n"
    if args.output:
        with open(args.output, "w") as f:
            f.write(text)
    else:
        sys.stdout.write(text)
    return 0


def _cmd_selftest(args) -> int:
    checks = run_selftest()
    for c in checks:
        print(f"{'PASS' if c.ok else 'FAIL'}  {c.name}  ({c.detail})")
    failed = sum(not c.ok for c in checks)
    print(f"{len(checks) - failed}/{len(checks)} checks passed")
    return 0 if failed == 0 else 1


COMMANDS = {
    "simulate": _cmd_simulate,
    "predict": _cmd_predict,
    "compare": _cmd_compare,
    "topology": _cmd_topology,
    "selftest": _cmd_selftest,
}


def main(argv=None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - every other failure maps to exit 1
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
