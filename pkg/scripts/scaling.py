"""Assignment and planning time against fleet size; writes a plot-ready CSV via the report step."""

import argparse
from pathlib import Path

from hata.batch import report, run_batch
from hata.config import ExperimentBatch, ScenarioTemplate


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="scaling_out")
    ap.add_argument("--max-fleet", type=int, default=15)
    ap.add_argument("--runs", type=int, default=3)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()

    batch = ExperimentBatch(
        ScenarioTemplate("random", {"size": 60, "n_pedestrians": 0}),
        fleet_sizes=tuple(range(2, args.max_fleet + 1)),
        methods=("hata", "path"),
        runs=args.runs,
        workers=args.workers,
    )
    out = Path(args.out)
    run_batch(batch, out)
    written = report([out / "runs.csv", out / "timings.csv"], out / "report")
    print(written["timing_series"].read_text())


if __name__ == "__main__":
    main()
