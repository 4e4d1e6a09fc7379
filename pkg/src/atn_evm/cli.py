"""Command-line entry point: ``atn-evm {simulate,tune,train,predict,evaluate,finetune}``.

Exit codes: 0 success, 2 invalid input, 1 anything else. Results go to files
or standard output; progress goes to standard error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .errors import AtnError
from .io import (
    ConfigError,
    fmt,
    load_batch,
    load_bounds,
    load_env,
    load_params,
    load_scenario,
    read_dataset,
    read_labeled,
    write_dataset,
    write_json,
    write_labeled,
    read_json,
)
from .learner import TrainConfig, TrainedModel, noise_success_curve, online_finetune, predict_params, train_pipeline
from .simulator import DemandMode, DemandSpec, Simulation
from .tuner import Bounds, TuneSettings, build_dataset


@dataclass
class RunManifest:
    command: str
    configs: list[str]
    seed: int | None
    outputs: list[str]
    version: str = __version__
    duration_s: float = 0.0
    argv: list[str] = field(default_factory=list)


class _Reporter:
    def __init__(self, quiet: bool):
        self.quiet = quiet

    def __call__(self, msg: str) -> None:
        if not self.quiet:
            print(msg, file=sys.stderr)


def _write_text(path, text: str) -> None:
    Path(path).write_text(text)


# -- subcommands ---------------------------------------------------------------

def cmd_simulate(args, say) -> RunManifest:
    sc = load_scenario(args.scenario, seed=args.seed, horizon=args.horizon)
    params = load_params(args.params)
    demand = sc.demand
    if args.mode == "ridership":
        demand = DemandSpec(demand.rates, demand.od_matrix, DemandMode.INFINITE)
    log = [] if args.events else None
    metrics = Simulation(sc.net, demand, sc.sim, params, log).run()
    text = json.dumps(metrics.to_dict(), indent=2) + "\n"
    outputs = []
    if args.out:
        _write_text(args.out, text)
        outputs.append(args.out)
    else:
        sys.stdout.write(text)
    if args.events:
        _write_text(args.events, "".join(line + "\n" for line in log))
        outputs.append(args.events)
    say(f"simulated {sc.sim.horizon:g} s: {metrics.full_trips} full / {metrics.empty_trips} empty trips, "
        f"throughput {metrics.throughput:.1f}/h")
    return RunManifest("simulate", [args.scenario, args.params], sc.sim.seed, outputs)


def cmd_tune(args, say) -> RunManifest:
    bounds = load_bounds(args.bounds) if args.bounds else Bounds.from_dict()
    seed = args.seed or 0
    scenarios = load_batch(args.batch, seed=seed)
    settings = TuneSettings(args.budget, args.rounds, args.replications, bounds, seed)
    if args.budget < 1 or args.rounds < 0 or args.replications < 1:
        raise ConfigError("<flags>", "budget and replications must be >= 1, rounds >= 0")
    rows = build_dataset(scenarios, settings, jobs=args.jobs, progress=say)
    write_dataset(args.out, rows)
    say(f"wrote {len(rows)} row(s) to {args.out}")
    configs = [args.batch] + ([args.bounds] if args.bounds else [])
    return RunManifest("tune", configs, seed, [args.out])


def cmd_train(args, say) -> RunManifest:
    rows = read_dataset(args.dataset)
    if len(rows) < args.k:
        raise ConfigError(args.dataset, f"TooFewRows: {len(rows)} row(s) for k={args.k}")
    config = TrainConfig(hidden=tuple(args.hidden), activation=args.activation, learning_rate=args.lr,
                         momentum=args.momentum, epochs=args.epochs, batch_size=args.batch_size,
                         dropout_rate=args.dropout, test_fraction=args.test_fraction, seed=args.seed or 0)
    env = np.array([r.env for r in rows])
    params = np.array([r.params for r in rows])
    model, report, (train_idx, test_idx) = train_pipeline(env, params, args.k, config)
    write_json(args.out, model.to_dict())
    outputs = [args.out]
    if args.test_out:
        labels = model.clusters.assignments
        write_labeled(args.test_out, [rows[i].scenario_id for i in test_idx], env[test_idx], labels[test_idx])
        outputs.append(args.test_out)
    sys.stdout.write(json.dumps(report.to_dict(), indent=2) + "\n")
    say(f"held-out accuracy {report.accuracy:.3f} on {report.n_test} rows")
    return RunManifest("train", [args.dataset], config.seed, outputs)


def load_model(path) -> TrainedModel:
    obj, _ = read_json(path)
    try:
        return TrainedModel.from_dict(obj)
    except AtnError as exc:
        raise ConfigError(path, str(exc)) from None


def cmd_predict(args, say) -> RunManifest:
    model = load_model(args.model)
    env = load_env(args.env)
    params = predict_params(model, env)
    text = json.dumps(params.to_dict(), indent=2) + "\n"
    if args.out:
        _write_text(args.out, text)
    else:
        sys.stdout.write(text)
    return RunManifest("predict", [args.model, args.env], None, [args.out] if args.out else [])


def cmd_evaluate(args, say) -> RunManifest:
    model = load_model(args.model)
    _, env, labels = read_labeled(args.labeled)
    if not env:
        raise ConfigError(args.labeled, "no test rows")
    if max(labels) >= model.k or min(labels) < 0:
        raise ConfigError(args.labeled, f"cluster labels must lie in 0..{model.k - 1}")
    sigmas = [float(s) for s in args.sigmas.split(",")]
    curve = noise_success_curve(model, env, labels, sigmas, args.trials, args.seed or 0)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["cluster", "sigma", "success_rate", "trials"])
        for c, s, rate, trials in curve:
            w.writerow([c, fmt(s), fmt(rate), trials])
    say(f"wrote {len(curve)} curve points to {args.out}")
    return RunManifest("evaluate", [args.model, args.labeled], args.seed or 0, [args.out])


def cmd_finetune(args, say) -> RunManifest:
    sc = load_scenario(args.scenario, seed=args.seed, horizon=args.horizon)
    params = load_params(args.params)
    steps = None
    if args.steps:
        steps, _ = read_json(args.steps)
    res = online_finetune(params, sc, steps, args.iterations, args.seed or 0, args.replications)
    write_json(args.out, res.params.to_dict())
    say(f"fine-tuned: objective {res.history[0] if res.history else float('nan'):.2f} -> {res.objective:.2f} s "
        f"({res.accepted} accepted of {args.iterations})")
    configs = [args.scenario, args.params] + ([args.steps] if args.steps else [])
    return RunManifest("finetune", configs, args.seed or 0, [args.out])


# -- parser --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="master seed for all random behaviour")
    common.add_argument("--jobs", type=int, default=1, help="worker processes for evaluations")
    common.add_argument("--quiet", action="store_true", help="suppress progress on stderr")
    common.add_argument("--manifest", default=None, help="write a run manifest JSON here")

    p = argparse.ArgumentParser(prog="atn-evm", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[common], help="run one simulation")
    s.add_argument("scenario")
    s.add_argument("params")
    s.add_argument("--mode", choices=["demand", "ridership"], default="demand")
    s.add_argument("--horizon", type=float, default=None)
    s.add_argument("--out", default=None)
    s.add_argument("--events", default=None, help="write the tab-separated event log here")
    s.set_defaults(func=cmd_simulate)

    t = sub.add_parser("tune", parents=[common], help="build a tuned dataset from a scenario batch")
    t.add_argument("batch")
    t.add_argument("--bounds", default=None)
    t.add_argument("--budget", type=int, default=200)
    t.add_argument("--rounds", type=int, default=4)
    t.add_argument("--replications", type=int, default=3)
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_tune)

    r = sub.add_parser("train", parents=[common], help="cluster parameters and train the classifier")
    r.add_argument("dataset")
    r.add_argument("--k", type=int, default=10)
    r.add_argument("--hidden", type=int, nargs="+", default=[16])
    r.add_argument("--activation", default="tanh", choices=["linear", "tanh", "sigmoid", "relu", "step"])
    r.add_argument("--lr", type=float, default=0.1)
    r.add_argument("--momentum", type=float, default=0.9)
    r.add_argument("--epochs", type=int, default=500)
    r.add_argument("--batch-size", type=int, default=32)
    r.add_argument("--dropout", type=float, default=0.0)
    r.add_argument("--test-fraction", type=float, default=0.25)
    r.add_argument("--out", required=True)
    r.add_argument("--test-out", default=None, help="write the held-out rows as a labeled CSV")
    r.set_defaults(func=cmd_train)

    q = sub.add_parser("predict", parents=[common], help="environment vector -> controller parameters")
    q.add_argument("model")
    q.add_argument("env")
    q.add_argument("--out", default=None)
    q.set_defaults(func=cmd_predict)

    e = sub.add_parser("evaluate", parents=[common], help="success rate under environment noise")
    e.add_argument("model")
    e.add_argument("labeled")
    e.add_argument("--sigmas", default="0,0.05,0.1,0.2,0.3,0.5,0.75,1.0")
    e.add_argument("--trials", type=int, default=100)
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_evaluate)

    f = sub.add_parser("finetune", parents=[common], help="hill-climb parameters against a scenario")
    f.add_argument("scenario")
    f.add_argument("params")
    f.add_argument("--iterations", type=int, default=20)
    f.add_argument("--replications", type=int, default=3)
    f.add_argument("--horizon", type=float, default=None)
    f.add_argument("--steps", default=None, help="JSON of per-parameter step sizes")
    f.add_argument("--out", required=True)
    f.set_defaults(func=cmd_finetune)
    return p


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    say = _Reporter(args.quiet)
    t0 = time.perf_counter()
    try:
        manifest = args.func(args, say)
    except AtnError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    manifest.duration_s = round(time.perf_counter() - t0, 3)
    manifest.argv = argv
    if args.manifest:
        write_json(args.manifest, asdict(manifest))
    return 0


if __name__ == "__main__":
    sys.exit(main())
