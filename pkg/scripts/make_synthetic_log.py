"""Write a synthetic pedestrian log, its grid spec and a free static map for trying out the CLI."""

import argparse
import json
from pathlib import Path

import numpy as np

from hata.grid import GridSpec
from hata.planner import OccupancyGrid, save_static_map
from hata.trajectories import METRIC_FORMAT, TrackRecord, format_tracks


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="synthetic_log")
    ap.add_argument("--hours", type=float, default=3.0)
    ap.add_argument("--people", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--size", type=float, default=20.0, help="side of the square hall [m]")
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    end = args.hours * 3600.0
    records = []
    for pid in range(args.people):
        a, b = rng.uniform(0.5, args.size - 0.5, size=(2, 2))
        speed = rng.uniform(0.8, 1.4)
        t0 = rng.uniform(0.0, end - 60.0)
        dur = float(np.hypot(*(b - a)) / speed)
        for t in np.arange(0.0, dur, 0.5):
            x, y = a + (b - a) * (t / dur)
            records.append(TrackRecord(round(t0 + t, 3), pid, round(float(x), 3), round(float(y), 3), speed))
    records.sort(key=lambda r: (r.timestamp, r.person_id))

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "tracks.csv").write_text(format_tracks(records, METRIC_FORMAT))
    spec = GridSpec(0.0, 0.0, 0.25, int(args.size / 0.25), int(args.size / 0.25))
    (out / "grid.json").write_text(json.dumps(spec.to_dict(), indent=2) + "\n")
    save_static_map(OccupancyGrid.free(spec), out / "map.pgm", out / "map.json")
    print(f"{len(records)} records from {args.people} people in {out}")


if __name__ == "__main__":
    main()
