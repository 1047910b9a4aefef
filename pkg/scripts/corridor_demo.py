"""Compare hata against the path-length baseline on the corridor scenario family."""

import argparse

import numpy as np

from hata.experiment import run_experiment
from hata.synthetic import corridor_mods, corridor_scenario


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=30)
    ap.add_argument("--robots", type=int, default=3)
    ap.add_argument("--delta", type=float, default=0.65)
    args = ap.parse_args()

    mods = corridor_mods()
    stats = {m: {"wait": [], "fail": [], "mission": []} for m in ("hata", "path", "euclidean")}
    for seed in range(args.seeds):
        for method, s in stats.items():
            res = run_experiment(corridor_scenario(seed, args.robots, mods=mods, method=method, delta=args.delta))
            s["wait"].append(res.outcome.mean_waiting)
            s["fail"].append(res.outcome.failure_rate)
            s["mission"].append(res.outcome.makespan)
    print(f"{'method':<10} {'waiting [s]':>12} {'failure [%]':>12} {'makespan [s]':>13}")
    for method, s in stats.items():
        print(f"{method:<10} {np.mean(s['wait']):12.2f} {100 * np.mean(s['fail']):12.1f} {np.mean(s['mission']):13.1f}")


if __name__ == "__main__":
    main()
