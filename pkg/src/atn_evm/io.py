"""File formats: scenario / batch / params / bounds JSON and dataset CSVs."""

from __future__ import annotations

import csv
import json
import re
from dataclasses import fields
from importlib import resources
from pathlib import Path

from .errors import AtnError
from .evm import PARAM_KEYS, ControllerParams
from .network import Edge, Node, NodeKind, build_network
from .scenario import ENV_DIM, EnvVector, Scenario, realize_scenario
from .simulator import DemandMode, DemandSpec, SimConfig
from .tuner import DatasetRow

DATASET_HEADER = ["scenario_id", *(f"env_{i}" for i in range(ENV_DIM)), *(f"p_{i}" for i in range(len(PARAM_KEYS))),
                  "objective_s", "baseline_s"]
LABELED_HEADER = ["scenario_id", *(f"env_{i}" for i in range(ENV_DIM)), "cluster"]


class ConfigError(AtnError):
    """Validation failure tied to a file and (when we can find it) a line."""

    def __init__(self, path, message, line: int | None = None):
        self.path, self.line = str(path), line
        where = f"{path}:{line}" if line else str(path)
        super().__init__(f"{where}: {message}")


def data_path(name: str) -> Path:
    return Path(str(resources.files("atn_evm") / "data" / name))


def _line_of(text: str, key: str, nth: int = 0) -> int | None:
    hits = [m.start() for m in re.finditer(rf'"{re.escape(key)}"\s*:', text)]
    if len(hits) <= nth:
        return None
    return text.count("\n", 0, hits[nth]) + 1


def read_json(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(path, f"cannot read file ({exc.strerror})") from None
    try:
        return json.loads(text), text
    except json.JSONDecodeError as exc:
        raise ConfigError(path, exc.msg, exc.lineno) from None


def fmt(x: float) -> str:
    """Round-trippable float text (repr), stable across runs."""
    return repr(float(x))


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=False) + "\n")


# -- network / scenario ------------------------------------------------------

def network_from_dict(d: dict):
    nodes_in = d["nodes"]
    names = [nd.get("name", str(i)) for i, nd in enumerate(nodes_in)]

    def ref(x):
        if isinstance(x, str):
            return names.index(x)
        return int(x)

    nodes = [Node(i, NodeKind(nd.get("kind", "Station")), int(nd.get("berth_count", 1)), names[i])
             for i, nd in enumerate(nodes_in)]
    edges = [Edge(ref(e["from"]), ref(e["to"]), float(e["length"])) for e in d["edges"]]
    return build_network(nodes, edges)


def _resolve(base: Path, value):
    """Inline object, or a path string relative to ``base``."""
    if isinstance(value, str):
        p = Path(value)
        if not p.is_absolute():
            p = base.parent / p
        if not p.exists() and data_path(value).exists():
            p = data_path(value)
        obj, _ = read_json(p)
        return obj
    return value


def sim_from_dict(d: dict) -> SimConfig:
    known = {f.name for f in fields(SimConfig)}
    extra = set(d) - known
    if extra:
        raise ValueError(f"unknown sim fields {sorted(extra)}")
    return SimConfig(**d)


def load_scenario(path, seed: int | None = None, horizon: float | None = None) -> Scenario:
    path = Path(path)
    obj, text = read_json(path)
    for key in ("network", "demand", "sim"):
        if key not in obj:
            raise ConfigError(path, f"missing top-level key '{key}'")
    try:
        net = network_from_dict(_resolve(path, obj["network"]))
    except (AtnError, KeyError, ValueError, TypeError) as exc:
        raise ConfigError(path, f"network: {exc}", _line_of(text, "network")) from None

    dem = obj["demand"]
    try:
        rates = dem.get("rates", [0.0] * net.n)
        if isinstance(rates, dict):
            r = [0.0] * net.n
            for name, lam in rates.items():
                r[net.index(name)] = float(lam)
            rates = r
        demand = DemandSpec(tuple(rates), dem["od_matrix"], DemandMode(dem.get("mode", "FiniteDemand")))
        demand.validate(net)
    except (AtnError, KeyError, ValueError, TypeError) as exc:
        key = "od_matrix" if "od_matrix" in str(exc) else "demand"
        raise ConfigError(path, f"demand: {exc}", _line_of(text, key)) from None

    try:
        sd = dict(obj["sim"])
        if seed is not None:
            sd["seed"] = seed
        if horizon is not None:
            sd["horizon"] = horizon
            if "warmup" in sd and sd["warmup"] is not None and sd["warmup"] >= horizon:
                sd["warmup"] = None
        sim = sim_from_dict(sd)
    except (AtnError, ValueError, TypeError) as exc:
        raise ConfigError(path, f"sim: {exc}", _line_of(text, "sim")) from None
    return Scenario(0, net, demand, sim)


def load_params(path) -> ControllerParams:
    obj, text = read_json(path)
    try:
        return ControllerParams.from_dict({k: float(v) for k, v in obj.items()})
    except (AtnError, ValueError, TypeError, AttributeError) as exc:
        line = None
        m = re.search(r"(c|b)_[a-z_]+", str(exc))
        if m:
            line = _line_of(text, m.group(0))
        raise ConfigError(path, str(exc), line) from None


def load_bounds(path):
    from .tuner import Bounds
    obj, _ = read_json(path)
    try:
        return Bounds.from_dict(obj)
    except (AtnError, ValueError, TypeError) as exc:
        raise ConfigError(path, str(exc)) from None


def load_env(path) -> EnvVector:
    obj, text = read_json(path)
    try:
        return EnvVector.from_dict(obj)
    except AtnError as exc:
        raise ConfigError(path, str(exc), _line_of(text, "od_structure") if "od_structure" in str(exc) else None) from None


def load_batch(path, seed: int = 0) -> list[Scenario]:
    """Batch file: ``{network, od_library, probes, sim, envs: [EnvVector, ...]}``."""
    from .tuner import derive_seed
    path = Path(path)
    obj, text = read_json(path)
    if isinstance(obj, list):
        raise ConfigError(path, "batch must be an object with network, od_library, probes, sim and envs")
    for key in ("network", "od_library", "probes", "envs"):
        if key not in obj:
            raise ConfigError(path, f"missing key '{key}'")
    try:
        net = network_from_dict(_resolve(path, obj["network"]))
        lib = _resolve(path, obj["od_library"])
        matrices = lib["matrices"] if isinstance(lib, dict) else lib
        probes = [net.index(p) if isinstance(p, str) else int(p) for p in obj["probes"]]
        base = sim_from_dict(obj.get("sim", {}))
    except (AtnError, KeyError, ValueError, TypeError) as exc:
        raise ConfigError(path, str(exc)) from None
    scenarios = []
    for i, e in enumerate(obj["envs"]):
        try:
            env = EnvVector.from_dict(e)
            scenarios.append(realize_scenario(env, net, base, matrices, probes, derive_seed(seed, i), i))
        except AtnError as exc:
            raise ConfigError(path, f"envs[{i}]: {exc}", _line_of(text, "fleet_size", i)) from None
    return scenarios


# -- datasets ------------------------------------------------------------------

def write_dataset(path, rows: list[DatasetRow]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(DATASET_HEADER)
        for r in rows:
            w.writerow([r.scenario_id, *map(fmt, r.env), *map(fmt, r.params), fmt(r.objective), fmt(r.baseline)])


def read_dataset(path) -> list[DatasetRow]:
    path = Path(path)
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise ConfigError(path, f"cannot read file ({exc.strerror})") from None
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != DATASET_HEADER:
            raise ConfigError(path, "dataset header does not match the expected schema", 1)
        rows = []
        for lineno, rec in enumerate(reader, start=2):
            if len(rec) != len(DATASET_HEADER):
                raise ConfigError(path, f"expected {len(DATASET_HEADER)} fields, got {len(rec)}", lineno)
            try:
                vals = [float(x) for x in rec[1:]]
                rows.append(DatasetRow(int(rec[0]), vals[:ENV_DIM], vals[ENV_DIM:ENV_DIM + 18], vals[-2], vals[-1]))
            except ValueError as exc:
                raise ConfigError(path, str(exc), lineno) from None
    return rows


def write_labeled(path, ids, env_rows, labels) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LABELED_HEADER)
        for sid, env, lab in zip(ids, env_rows, labels):
            w.writerow([int(sid), *map(fmt, env), int(lab)])


def read_labeled(path):
    path = Path(path)
    ids, envs, labels = [], [], []
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise ConfigError(path, f"cannot read file ({exc.strerror})") from None
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != LABELED_HEADER:
            raise ConfigError(path, "labeled header does not match the expected schema", 1)
        for lineno, rec in enumerate(reader, start=2):
            try:
                ids.append(int(rec[0]))
                envs.append([float(x) for x in rec[1:1 + ENV_DIM]])
                labels.append(int(rec[-1]))
            except (ValueError, IndexError) as exc:
                raise ConfigError(path, str(exc), lineno) from None
    return ids, envs, labels
