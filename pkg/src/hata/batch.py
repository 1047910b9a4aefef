"""Run experiment batches, aggregate results and build comparison reports.

A batch writes into its output directory:

* ``runs.csv``: one row per run (the raw rows);
* ``results.csv``: grouped means per (method, fleet size, delta, window);
* ``timings.csv``: wall-clock seconds per run, kept apart so the other files
  are byte-identical across repeated invocations;
* ``cells/``: the same rows split per cell, each file written atomically.
"""

from __future__ import annotations

import csv
import io
import math
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import ConfigError, ExperimentBatch
from .experiment import run_experiment

RUN_COLUMNS = (
    "method", "fleet_size", "delta", "window", "run", "seed", "status", "robots", "failures",
    "mission_time", "mean_waiting_time", "mean_travel_time", "trace_hash", "message",
)
TIMING_COLUMNS = ("method", "fleet_size", "delta", "window", "run", "seed", "planning_s", "assignment_s", "simulation_s")
RESULT_COLUMNS = (
    "method", "fleet_size", "delta", "window", "runs", "harness_failures", "failure_rate_pct",
    "mission_time_s", "waiting_time_s",
)
SERIES_COLUMNS = ("method", "fleet_size", "runs", "assignment_ms", "total_ms")
GROUP_KEYS = ("method", "fleet_size", "delta", "window")


class SchemaError(ConfigError):
    pass


@dataclass(frozen=True)
class BatchCell:
    method: str
    fleet_size: int
    delta: float | None
    window: str
    window_start: float

    @property
    def name(self) -> str:
        d = "na" if self.delta is None else f"{self.delta:g}"
        return f"{self.method}_n{self.fleet_size}_d{d}_{self.window}"


def batch_cells(batch: ExperimentBatch) -> list[BatchCell]:
    cells = []
    for window, start in batch.windows:
        for n in batch.fleet_sizes:
            for method in batch.methods:
                deltas = batch.deltas if method == "hata" else (None,)
                for d in deltas:
                    cells.append(BatchCell(method, n, d, window, start))
    return cells


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return "" if math.isnan(v) else repr(v)
    return str(v)


def _csv(columns, rows) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(row.get(c)) for c in columns])
    return out.getvalue()


def write_atomic(path: str | Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def run_cell(batch: ExperimentBatch, cell: BatchCell) -> tuple[list[dict], list[dict]]:
    """Execute every run of one cell; a crashing run becomes an ``error`` row."""
    rows, timings = [], []
    for run in range(batch.runs):
        seed = batch.seed_base + run
        base = {
            "method": cell.method, "fleet_size": cell.fleet_size, "delta": cell.delta,
            "window": cell.window, "run": run, "seed": seed,
        }
        try:
            settings = dict(method=cell.method, objective=batch.objective, weights=batch.weights, timeout=batch.timeout)
            if cell.delta is not None:
                settings["delta"] = cell.delta
            sc = batch.template.build(seed, cell.fleet_size, cell.window_start, **settings)
            res = run_experiment(sc, timing_reps=batch.timing_reps)
        except Exception as exc:  # recorded, the batch goes on
            rows.append({**base, "status": "error", "robots": cell.fleet_size, "message": f"{type(exc).__name__}: {exc}"})
            continue
        row = {**base, "status": res.status, "robots": cell.fleet_size, "message": res.message}
        if res.outcome is None:
            row["failures"] = cell.fleet_size
        else:
            o = res.outcome
            row.update(
                failures=o.failures,
                mission_time=o.makespan if o.failures == 0 else None,
                mean_waiting_time=o.mean_waiting,
                mean_travel_time=o.mean_travel,
                trace_hash=o.trace_hash,
            )
        rows.append(row)
        t = res.timings
        timings.append({**base, "planning_s": t["planning"], "assignment_s": t["assignment"], "simulation_s": t.get("simulation")})
    return rows, timings


def _cell_job(args):
    batch, cell, out = args
    rows, timings = run_cell(batch, cell)
    if out is not None:
        write_atomic(Path(out) / "cells" / f"{cell.name}.runs.csv", _csv(RUN_COLUMNS, rows))
        write_atomic(Path(out) / "cells" / f"{cell.name}.timings.csv", _csv(TIMING_COLUMNS, timings))
    return rows, timings


def _num(v) -> float | None:
    if v is None or v == "":
        return None
    return float(v)


def aggregate(rows: list[dict]) -> list[dict]:
    """Group raw rows and average them.

    Failure rate is the percentage of tasks not completed over all tasks of
    the group. Mission time (makespan) is averaged over runs in which every
    robot finished; waiting time over all simulated runs. Harness failures
    (``error`` rows) are counted but left out of the means.
    """
    groups: dict[tuple, list[dict]] = {}
    for r in rows:
        key = tuple(str(_fmt(r[k])) if k == "delta" else r[k] for k in GROUP_KEYS)
        groups.setdefault(key, []).append(r)
    out = []
    for key, rs in groups.items():
        good = [r for r in rs if r["status"] != "error"]
        tasks = sum(int(r["robots"]) for r in good)
        failed = sum(int(r["failures"]) for r in good)
        missions = [_num(r["mission_time"]) for r in good if _num(r.get("mission_time")) is not None]
        waits = [_num(r["mean_waiting_time"]) for r in good if _num(r.get("mean_waiting_time")) is not None]
        out.append(
            {
                **dict(zip(GROUP_KEYS, key)),
                "runs": len(good),
                "harness_failures": len(rs) - len(good),
                "failure_rate_pct": 100.0 * failed / tasks if tasks else None,
                "mission_time_s": float(np.mean(missions)) if missions else None,
                "waiting_time_s": float(np.mean(waits)) if waits else None,
            }
        )
    return out


def timing_series(timings: list[dict]) -> list[dict]:
    """Mean assignment time (bidding plus solving) and planning-plus-assignment time per (method, fleet size)."""
    groups: dict[tuple, list[dict]] = {}
    for t in timings:
        groups.setdefault((t["method"], int(t["fleet_size"])), []).append(t)
    out = []
    for (method, n), ts in sorted(groups.items()):
        assign = [float(t["assignment_s"]) for t in ts]
        total = [float(t["planning_s"]) + float(t["assignment_s"]) for t in ts]
        out.append(
            {"method": method, "fleet_size": n, "runs": len(ts),
             "assignment_ms": 1e3 * float(np.mean(assign)), "total_ms": 1e3 * float(np.mean(total))}
        )
    return out


@dataclass
class BatchResult:
    rows: list[dict]
    results: list[dict]
    timings: list[dict]


def run_batch(batch: ExperimentBatch, out: str | Path | None = None) -> BatchResult:
    cells = batch_cells(batch)
    jobs = [(batch, c, out) for c in cells]
    if batch.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=batch.workers) as pool:
            parts = list(pool.map(_cell_job, jobs))
    else:
        parts = [_cell_job(j) for j in jobs]
    rows = [r for part, _ in parts for r in part]
    timings = [t for _, part in parts for t in part]
    result = BatchResult(rows, aggregate(rows), timings)
    if out is not None:
        out = Path(out)
        write_atomic(out / "runs.csv", _csv(RUN_COLUMNS, rows))
        write_atomic(out / "results.csv", _csv(RESULT_COLUMNS, result.results))
        write_atomic(out / "timings.csv", _csv(TIMING_COLUMNS, timings))
    return result


def read_rows(path: str | Path) -> tuple[str, list[dict]]:
    """Load a raw run or timing file; returns ``("runs" | "timings", rows)``."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise SchemaError(f"{path}: cannot read ({exc.strerror})") from exc
    reader = csv.DictReader(io.StringIO(text))
    header = reader.fieldnames or []
    timing_only = set(TIMING_COLUMNS) - set(RUN_COLUMNS)
    kind, columns = ("timings", TIMING_COLUMNS) if timing_only & set(header) else ("runs", RUN_COLUMNS)
    for c in columns:
        if c not in header:
            raise SchemaError(f"{path}: missing column {c!r} for a {kind} file")
    rows = []
    for row in reader:
        row["fleet_size"] = int(row["fleet_size"])
        rows.append(row)
    return kind, rows


def _label(method: str, delta: str) -> str:
    return method if delta in ("", None) else f"{method} delta={delta}"


def comparison_table(results: list[dict], column: str) -> tuple[list[str], list[dict]]:
    """Rows per method (and delta), one column per fleet size, pooled over windows."""
    fleets = sorted({int(r["fleet_size"]) for r in results})
    pooled: dict[str, dict[int, list]] = {}
    for r in results:
        label = _label(r["method"], r["delta"])
        pooled.setdefault(label, {}).setdefault(int(r["fleet_size"]), []).append(r)
    rows = []
    for label in sorted(pooled):
        row = {"method": label}
        for n in fleets:
            rs = pooled[label].get(n, [])
            vals = [(r[column], r["runs"]) for r in rs if r[column] is not None]
            if column == "failure_rate_pct":
                # every run of a cell has the same fleet size, so runs weight the pooled rate
                w = sum(k for _, k in vals)
                row[str(n)] = sum(v * k for v, k in vals) / w if w else None
            else:
                row[str(n)] = float(np.mean([v for v, _ in vals])) if vals else None
        rows.append(row)
    return ["method"] + [str(n) for n in fleets], rows


def report(files: list[str | Path], out: str | Path) -> dict[str, Path]:
    """Tables of failure rate, mission time and waiting time, plus the timing series."""
    if not files:
        raise SchemaError("report needs at least one raw file")
    runs, timings = [], []
    for f in files:
        kind, rows = read_rows(f)
        (runs if kind == "runs" else timings).extend(rows)
    out = Path(out)
    written = {}
    if runs:
        results = aggregate(runs)
        written["results"] = out / "results.csv"
        write_atomic(written["results"], _csv(RESULT_COLUMNS, results))
        for name, column in (
            ("failure_rate", "failure_rate_pct"),
            ("mission_time", "mission_time_s"),
            ("waiting_time", "waiting_time_s"),
        ):
            cols, rows = comparison_table(results, column)
            written[name] = out / f"{name}.csv"
            write_atomic(written[name], _csv(cols, rows))
    if timings:
        written["timing_series"] = out / "timing_series.csv"
        write_atomic(written["timing_series"], _csv(SERIES_COLUMNS, timing_series(timings)))
    return written
