"""Command-line entry points: ``build-mods``, ``tune``, ``run-batch`` and ``report``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import yaml

from .batch import SchemaError, report, run_batch, write_atomic
from .bo import (
    AcquisitionConfig,
    TuningAborted,
    posterior_surface,
    surface_to_csv,
    trace_to_csv,
    tune_weights,
)
from .config import ConfigError, ExperimentBatch, TuneConfig
from .cost import Weights
from .experiment import MissionTimeError
from .grid import GridSpec
from .mod import DEFAULT_KERNEL_RADIUS, DEFAULT_WINDOW, build_stack, export_stack
from .trajectories import group_trajectories, load_format, read_tracks

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_RUNTIME = 0, 1, 2, 3

log = logging.getLogger("hata")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _grid_spec(path: str) -> GridSpec:
    with open(path) as f:
        data = yaml.safe_load(f)
    if isinstance(data, dict) and "grid" in data:  # a mods.json sidecar also works
        data = data["grid"]
    return GridSpec.from_dict(data)


def cmd_build_mods(args) -> int:
    try:
        fmt = load_format(args.format)
        spec = _grid_spec(args.grid)
        parsed = read_tracks(args.tracks, fmt)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        log.error("cannot load inputs: %s", exc)
        return EXIT_DATA
    if parsed.rejects:
        log.warning("%d malformed lines skipped", len(parsed.rejects))
        if args.rejects:
            Path(args.rejects).write_text(parsed.rejects_report())
    trajs, dropped = group_trajectories(parsed.records)
    if dropped:
        log.warning("%d single-sample tracks dropped", dropped)
    times = [r.timestamp for r in parsed.records]
    start = args.start if args.start is not None else (math.floor(min(times)) if times else None)
    end = args.end if args.end is not None else (max(times) if times else None)
    if start is None:
        start = 0.0
    if end is None:
        end = start + args.window
        log.warning("empty log: one all-zero window from t=%g s (pass --start/--end for a longer range)", start)
    if not trajs:
        log.warning("no pedestrian tracks in the log; every layer is all zero")
    try:
        stack = build_stack(trajs, start, end, args.window, spec, args.kernel_radius)
    except ValueError as exc:
        log.error("%s", exc)
        return EXIT_DATA
    export_stack(stack, args.out)
    peak = max((float(layer.grid.max()) for layer in stack.layers), default=0.0)
    print(f"layers={len(stack.layers)} max_p={peak:.4f} pedestrians={len(trajs)} out={args.out}")
    return EXIT_OK


def _evaluator(cfg: TuneConfig):
    ev = cfg.evaluator
    if ev["kind"] == "quadratic":
        a, b = (float(v) for v in ev.get("optimum", [1.15, 0.95]))
        sa, sb = (float(v) for v in ev.get("scale", [1.0, 1.0]))
        return lambda w: sa * (w.w0 - a) ** 2 + sb * (w.w1 - b) ** 2
    template = ev["scenario"]
    n = int(ev.get("fleet_size", 3))
    delta = float(ev.get("delta", 0.65))
    start = float(ev.get("window", 0.0))
    scenarios = [template.build(int(s), n, start, delta=delta) for s in ev.get("seeds", [0])]
    return MissionTimeError(scenarios)


def cmd_tune(args) -> int:
    try:
        cfg = TuneConfig.load(args.config) if args.config else TuneConfig()
        changes = {}
        if args.max_iterations is not None:
            changes["max_iterations"] = args.max_iterations
        acq = cfg.acquisition
        if args.stop_threshold is not None or args.beta is not None:
            acq = AcquisitionConfig(
                beta=args.beta if args.beta is not None else acq.beta,
                w0_bounds=acq.w0_bounds,
                w1_bounds=acq.w1_bounds,
                step=acq.step,
                stop_threshold=args.stop_threshold if args.stop_threshold is not None else acq.stop_threshold,
            )
        initial = Weights(*args.initial) if args.initial else cfg.initial
        iterations = changes.get("max_iterations", cfg.max_iterations)
        evaluate = _evaluator(cfg)
    except (ConfigError, ValueError, OSError, RuntimeError) as exc:
        log.error("%s", exc)
        return EXIT_DATA
    out = Path(args.out)
    try:
        result = tune_weights(initial, evaluate, acq, cfg.gp, iterations)
    except TuningAborted as exc:
        write_atomic(out / "trace.csv", trace_to_csv(exc.trace))
        log.error("tuning aborted: %s (partial trace kept)", exc)
        return EXIT_RUNTIME
    write_atomic(out / "trace.csv", trace_to_csv(result.trace))
    weights = {"version": 1, "w0": result.weights.w0, "w1": result.weights.w1,
               "evaluations": len(result.trace), "stopped_early": result.stopped_early}
    write_atomic(out / "weights.json", json.dumps(weights, indent=2) + "\n")
    if result.model is not None:
        a0, a1, mean, var = posterior_surface(result.model, acq)
        write_atomic(out / "posterior_mean.csv", surface_to_csv(a0, a1, mean))
        write_atomic(out / "posterior_var.csv", surface_to_csv(a0, a1, var))
    print(f"w0={result.weights.w0:g} w1={result.weights.w1:g} evaluations={len(result.trace)}")
    return EXIT_OK


def cmd_run_batch(args) -> int:
    try:
        batch = ExperimentBatch.load(args.batch)
        overrides = {}
        if args.workers is not None:
            overrides["workers"] = args.workers
        if args.seed_base is not None:
            overrides["seed_base"] = args.seed_base
        if args.runs is not None:
            overrides["runs"] = args.runs
        if overrides:
            data = batch.to_mapping()
            data.update(overrides)
            batch = ExperimentBatch.from_mapping(data)
    except ConfigError as exc:
        log.error("%s", exc)
        return EXIT_DATA
    try:
        result = run_batch(batch, args.out)
    except Exception as exc:
        log.error("batch failed: %s", exc)
        return EXIT_RUNTIME
    errors = sum(r["status"] == "error" for r in result.rows)
    if errors:
        log.warning("%d runs crashed; see the message column of runs.csv", errors)
    print(f"runs={len(result.rows)} groups={len(result.results)} harness_failures={errors} out={args.out}")
    return EXIT_OK


def cmd_report(args) -> int:
    try:
        written = report(args.files, args.out)
    except SchemaError as exc:
        log.error("%s", exc)
        return EXIT_DATA
    for name, path in written.items():
        print(f"{name}: {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="hata", description="Human-aware multi-robot task allocation experiments.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    b = sub.add_parser("build-mods", help="build a MoD stack from a trajectory log")
    b.add_argument("--tracks", required=True, help="trajectory log (CSV)")
    b.add_argument("--grid", required=True, help="grid spec (YAML/JSON), or an existing mods.json")
    b.add_argument("--format", default="atc", help="column preset (atc, metric) or a format file")
    b.add_argument("--window", type=float, default=DEFAULT_WINDOW, help="window length [s]")
    b.add_argument("--start", type=float, help="first window start [s]; default: first timestamp")
    b.add_argument("--end", type=float, help="end of the last window [s]; default: last timestamp")
    b.add_argument("--kernel-radius", type=int, default=DEFAULT_KERNEL_RADIUS, help="disk kernel radius [cells]")
    b.add_argument("--rejects", help="write the malformed-line report here")
    b.add_argument("--out", required=True, help="output directory")
    b.set_defaults(func=cmd_build_mods)

    t = sub.add_parser("tune", help="tune the bid weights with Bayesian optimisation")
    t.add_argument("--config", help="tuning config (YAML); default: synthetic quadratic objective")
    t.add_argument("--max-iterations", type=int)
    t.add_argument("--stop-threshold", type=float)
    t.add_argument("--beta", type=float)
    t.add_argument("--initial", type=float, nargs=2, metavar=("W0", "W1"))
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_tune)

    r = sub.add_parser("run-batch", help="run an experiment batch")
    r.add_argument("batch", help="batch file (YAML)")
    r.add_argument("--out", required=True)
    r.add_argument("--workers", type=int)
    r.add_argument("--seed-base", type=int)
    r.add_argument("--runs", type=int)
    r.set_defaults(func=cmd_run_batch)

    rep = sub.add_parser("report", help="comparison tables and timing series from raw files")
    rep.add_argument("files", nargs="+", help="runs.csv and/or timings.csv files")
    rep.add_argument("--out", required=True)
    rep.set_defaults(func=cmd_report)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except KeyboardInterrupt:  # pragma: no cover
        return EXIT_RUNTIME


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
