"""Ridership and finite-demand throughput against fleet size on the reference network.

    python scripts/ridership_sweep.py --fleets 1 2 4 6 8 10 --out sweep.csv
"""

import argparse
import csv
import dataclasses
import sys

import numpy as np

from atn_evm.io import data_path, load_batch, load_params
from atn_evm.simulator import DemandMode, DemandSpec, run_simulation


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--fleets", type=int, nargs="+", default=[1, 2, 4, 6, 8, 10, 14, 18])
    ap.add_argument("--params", default=str(data_path("calling_only.json")))
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--out", required=True)
    args = ap.parse_args()

    base = load_batch(data_path("reference_batch.json"))[0]
    params = load_params(args.params)
    infinite = DemandSpec(base.demand.rates, base.demand.od_matrix, DemandMode.INFINITE)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["fleet_size", "throughput_per_h", "ridership_per_h", "mean_censored_wait_s"])
        for fleet in args.fleets:
            thr, rid, wait = [], [], []
            for seed in range(args.seeds):
                cfg = dataclasses.replace(base.sim, fleet_size=fleet, seed=seed)
                m = run_simulation(base.net, base.demand, cfg, params)
                thr.append(m.throughput)
                wait.append(m.censored_wait or 0.0)
                rid.append(run_simulation(base.net, infinite, cfg, params).throughput)
            w.writerow([fleet, np.mean(thr), np.mean(rid), np.mean(wait)])
            print(f"fleet {fleet:3d}: throughput {np.mean(thr):7.1f}/h  ridership {np.mean(rid):7.1f}/h  "
                  f"wait {np.mean(wait):8.1f} s", file=sys.stderr)


if __name__ == "__main__":
    main()
