"""Training-mode parameter search.

The objective is the mean censored passenger wait (seconds, lower is
better), averaged over a few simulation replications.
"""

from __future__ import annotations

import math
from concurrent.futures import Executor, ProcessPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import EmptyBounds
from .evm import EVM_OFF, FACTOR_NAMES, INTEGER_GATES, PARAM_KEYS, UNIT, ControllerParams
from .scenario import Scenario
from .simulator import run_simulation

DEFAULT_RANGES = {
    "f_q": (0.0, 10.0), "f_eb": (0.0, 10.0), "f_nd": (0.0, 10.0), "f_ai": (0.0, 10.0),
    "t_q": (0, 5), "t_eb": (0, 5), "t_ev": (0, 5),
    "t_nd": (0.0, 3.0), "t_total": (0.0, 50.0),
}
CALLING_KEYS = PARAM_KEYS[:9]
BALANCING_KEYS = PARAM_KEYS[9:]


def derive_seed(*parts: int) -> int:
    return int(np.random.SeedSequence([int(p) & (2**63 - 1) for p in parts]).generate_state(1, np.uint64)[0] >> 1)


@dataclass(frozen=True)
class Bounds:
    """Closed sampling range per controller parameter (18 keys)."""

    ranges: dict

    def __post_init__(self):
        if set(self.ranges) != set(PARAM_KEYS):
            raise EmptyBounds("bounds must cover all 18 parameters")
        for key, (lo, hi) in self.ranges.items():
            if not (math.isfinite(lo) and math.isfinite(hi)) or lo > hi or lo < 0:
                raise EmptyBounds(f"{key}: empty or invalid range [{lo}, {hi}]")
            if key[2:] in INTEGER_GATES and math.floor(hi) < math.ceil(lo):
                raise EmptyBounds(f"{key}: no integer in [{lo}, {hi}]")

    @classmethod
    def from_dict(cls, d: dict | None = None) -> "Bounds":
        """Accept generic keys (``f_q``) and/or prefixed ones (``c_f_q``); prefixed win."""
        d = d or {}
        unknown = set(d) - set(FACTOR_NAMES) - set(PARAM_KEYS)
        if unknown:
            raise EmptyBounds(f"unknown bound keys: {sorted(unknown)}")
        ranges = {}
        for key in PARAM_KEYS:
            generic = key[2:]
            lo, hi = d.get(key, d.get(generic, DEFAULT_RANGES[generic]))
            ranges[key] = (float(lo), float(hi))
        return cls(ranges)

    def to_dict(self) -> dict:
        return {k: list(v) for k, v in self.ranges.items()}

    def sample(self, rng: np.random.Generator, keys=PARAM_KEYS) -> dict[str, float]:
        out = {}
        for key in keys:
            lo, hi = self.ranges[key]
            if key[2:] in INTEGER_GATES:
                out[key] = float(rng.integers(math.ceil(lo), math.floor(hi) + 1))
            else:
                out[key] = float(rng.uniform(lo, hi))
        return out


@dataclass
class TuneResult:
    scenario_id: int
    best_params: ControllerParams
    objective: float
    evals: int
    baseline_objective: float
    history: list[float] = field(default_factory=list)  # incumbent objective after each step
    rounds: list[dict] = field(default_factory=list)


def evaluate(scenario: Scenario, params: ControllerParams, replications: int = 3) -> float:
    """Mean censored wait over ``replications`` seeded runs."""
    if replications < 1:
        raise ValueError("replications must be >= 1")
    total = 0.0
    for rep in range(replications):
        cfg = replace(scenario.sim, seed=derive_seed(scenario.sim.seed, rep))
        w = run_simulation(scenario.net, scenario.demand, cfg, params).censored_wait
        total += 0.0 if w is None else w
    return total / replications


def _eval_one(args):
    scenario, params, replications = args
    return evaluate(scenario, params, replications)


def evaluate_many(scenario: Scenario, candidates, replications: int, pool: Executor | None = None) -> list[float]:
    """Objectives in candidate order, whatever order the workers finish in."""
    jobs = [(scenario, c, replications) for c in candidates]
    if pool is None:
        return [_eval_one(j) for j in jobs]
    return list(pool.map(_eval_one, jobs))


@contextmanager
def worker_pool(jobs: int):
    if jobs <= 1:
        yield None
        return
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        yield pool


def _argmin(values) -> int:
    best = 0
    for i, v in enumerate(values):
        if v < values[best]:
            best = i
    return best


def random_search(scenario: Scenario, budget: int, bounds: Bounds, seed: int,
                  replications: int = 3, pool: Executor | None = None) -> TuneResult:
    """Uniform sampling in ``bounds``.

    Candidate 0 is EVM-off and candidate 1 is all gates open with unit
    weights; later candidates are random, so a larger budget with the same
    seed only appends candidates.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    rng = np.random.default_rng(derive_seed(seed, 0x5EA7C4))
    candidates = [EVM_OFF, ControllerParams(UNIT, UNIT)][:budget]
    while len(candidates) < budget:
        candidates.append(ControllerParams.from_dict(bounds.sample(rng)))
    objectives = evaluate_many(scenario, candidates, replications, pool)
    best = _argmin(objectives)
    history = [float(x) for x in np.minimum.accumulate(objectives)]
    return TuneResult(scenario.id, candidates[best], objectives[best], len(candidates), objectives[0], history)


def _with_half(base: ControllerParams, sampled: dict, keys) -> ControllerParams:
    d = base.to_dict()
    for k in keys:
        d[k] = sampled[k]
    return ControllerParams.from_dict(d)


def alternating_refine(scenario: Scenario, start: ControllerParams, rounds: int, per_round_budget: int,
                       bounds: Bounds, seed: int, replications: int = 3,
                       start_objective: float | None = None, baseline_objective: float | None = None,
                       pool: Executor | None = None) -> TuneResult:
    """Tune calling (odd rounds) and balancing (even rounds) in turn.

    Each round samples only the active half, copying the other half from the
    incumbent; the incumbent changes only on strict improvement.
    """
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    evals = 0
    if start_objective is None:
        start_objective = evaluate(scenario, start, replications)
        evals += 1
    if baseline_objective is None:
        baseline_objective = evaluate(scenario, EVM_OFF, replications)
        evals += 1
    incumbent, obj = start, start_objective
    history = [obj]
    log = []
    for r in range(1, rounds + 1):
        half, keys = ("calling", CALLING_KEYS) if r % 2 == 1 else ("balancing", BALANCING_KEYS)
        rng = np.random.default_rng(derive_seed(seed, 0xA17E, r))
        candidates = [_with_half(incumbent, bounds.sample(rng, keys), keys) for _ in range(per_round_budget)]
        objectives = evaluate_many(scenario, candidates, replications, pool)
        evals += len(candidates)
        before = incumbent
        if candidates:
            best = _argmin(objectives)
            if objectives[best] < obj:
                incumbent, obj = candidates[best], objectives[best]
        history.append(obj)
        log.append({"round": r, "half": half, "before": before, "after": incumbent, "objective": obj})
    return TuneResult(scenario.id, incumbent, obj, evals, baseline_objective, history, log)


@dataclass(frozen=True)
class TuneSettings:
    budget: int = 200
    rounds: int = 4
    replications: int = 3
    bounds: Bounds = field(default_factory=Bounds.from_dict)
    seed: int = 0

    def split(self) -> tuple[int, int]:
        """(random-search budget, per-round budget); the total never exceeds ``budget``."""
        per_round = (self.budget // 2) // self.rounds if self.rounds else 0
        return max(1, self.budget - per_round * self.rounds), per_round


@dataclass
class DatasetRow:
    scenario_id: int
    env: list[float]
    params: list[float]
    objective: float
    baseline: float


def tune_scenario(scenario: Scenario, settings: TuneSettings, pool: Executor | None = None) -> TuneResult:
    rs_budget, per_round = settings.split()
    seed = derive_seed(settings.seed, scenario.id)
    rs = random_search(scenario, rs_budget, settings.bounds, seed, settings.replications, pool)
    if settings.rounds < 1 or per_round < 1:
        return rs
    ar = alternating_refine(scenario, rs.best_params, settings.rounds, per_round, settings.bounds, seed,
                            settings.replications, rs.objective, rs.baseline_objective, pool)
    ar.evals += rs.evals
    ar.history = rs.history + ar.history[1:]
    return ar


def build_dataset(scenarios, settings: TuneSettings, jobs: int = 1, progress=None) -> list[DatasetRow]:
    """One row per scenario, ordered by scenario id."""
    scenarios = sorted(scenarios, key=lambda s: s.id)
    if not scenarios:
        raise ValueError("need at least one scenario")
    rows = []
    with worker_pool(jobs) as pool:
        for sc in scenarios:
            res = tune_scenario(sc, settings, pool)
            if progress:
                progress(f"scenario {sc.id}: objective {res.objective:.2f} s "
                         f"(EVM off {res.baseline_objective:.2f} s, {res.evals} evals)")
            env = sc.env.to_vector() if sc.env is not None else [float("nan")] * 11
            rows.append(DatasetRow(sc.id, env, res.best_params.to_vector(), res.objective, res.baseline_objective))
    return rows
