"""Tune the shipped hub-and-spoke scenario and compare against EVM off on unseen seeds.

    python scripts/reference_experiment.py --seeds 5 --budget 200 --rounds 4
"""

import argparse
import dataclasses
import json
import sys
import time

from atn_evm.evm import EVM_OFF
from atn_evm.io import data_path, load_batch
from atn_evm.tuner import TuneSettings, evaluate, tune_scenario, worker_pool


@dataclasses.dataclass
class ExperimentConfig:
    seeds: int = 5
    budget: int = 200
    rounds: int = 4
    replications: int = 3
    jobs: int = 1
    batch: str = str(data_path("reference_batch.json"))


def run(cfg: ExperimentConfig) -> dict:
    results = []
    with worker_pool(cfg.jobs) as pool:
        for seed in range(1, cfg.seeds + 1):
            t0 = time.perf_counter()
            scenario = load_batch(cfg.batch, seed=seed)[0]
            tuned = tune_scenario(scenario, TuneSettings(cfg.budget, cfg.rounds, cfg.replications, seed=seed), pool)
            fresh = load_batch(cfg.batch, seed=10_000 + seed)[0]
            w_tuned = evaluate(fresh, tuned.best_params, cfg.replications)
            w_off = evaluate(fresh, EVM_OFF, cfg.replications)
            row = {"seed": seed, "tuned_wait_s": w_tuned, "off_wait_s": w_off,
                   "reduction": 1.0 - w_tuned / w_off, "evals": tuned.evals,
                   "params": tuned.best_params.to_dict(), "seconds": round(time.perf_counter() - t0, 1)}
            print(f"seed {seed}: {w_off:8.1f} s -> {w_tuned:7.1f} s ({row['reduction']:.1%})", file=sys.stderr)
            results.append(row)
    mean = sum(r["reduction"] for r in results) / len(results)
    return {"config": dataclasses.asdict(cfg), "mean_reduction": mean, "runs": results}


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    for f in dataclasses.fields(ExperimentConfig):
        ap.add_argument(f"--{f.name}", type=type(f.default), default=f.default)
    ap.add_argument("--out", default=None, help="write the JSON summary here instead of stdout")
    args = vars(ap.parse_args())
    out = args.pop("out")
    summary = run(ExperimentConfig(**args))
    text = json.dumps(summary, indent=2, default=float)
    if out:
        open(out, "w").write(text + "\n")
    else:
        print(text)


if __name__ == "__main__":
    main()
