"""Environment vectors, the shipped OD structures, and scenario realization."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import InvalidEnv
from .network import NetworkModel
from .simulator import DemandMode, DemandSpec, SimConfig

OD_NAMES = ("uniform", "hub_and_spoke", "commuter", "ring_following")
N_PROBES = 4
ENV_DIM = 3 + 2 * N_PROBES


@dataclass(frozen=True)
class EnvVector:
    """Operating conditions: 11 numbers."""

    fleet_size: int
    max_velocity: float                       # m/s
    total_demand: float                       # groups/hour
    station_demand: tuple[float, ...]         # groups/hour at the probe stations
    od_structure: tuple[int, ...]             # one-hot over OD_NAMES

    def __post_init__(self):
        object.__setattr__(self, "station_demand", tuple(float(x) for x in self.station_demand))
        object.__setattr__(self, "od_structure", tuple(self.od_structure))
        self.validate()

    def validate(self) -> None:
        if len(self.station_demand) != N_PROBES or len(self.od_structure) != len(OD_NAMES):
            raise InvalidEnv(f"need {N_PROBES} probe demands and a {len(OD_NAMES)}-way OD selector")
        if sorted(self.od_structure) != [0] * (len(OD_NAMES) - 1) + [1]:
            raise InvalidEnv(f"od_structure must be one-hot, got {list(self.od_structure)}")
        if self.fleet_size < 1 or int(self.fleet_size) != self.fleet_size:
            raise InvalidEnv(f"fleet_size must be a positive integer, got {self.fleet_size}")
        if not self.max_velocity > 0:
            raise InvalidEnv("max_velocity must be > 0")
        if self.total_demand < 0 or min(self.station_demand) < 0:
            raise InvalidEnv("demands must be >= 0")
        if sum(self.station_demand) > self.total_demand * (1 + 1e-12):
            raise InvalidEnv(f"probe demand {sum(self.station_demand)} exceeds total demand {self.total_demand}")

    @property
    def od_index(self) -> int:
        return self.od_structure.index(1)

    def to_vector(self) -> list[float]:
        return [float(self.fleet_size), float(self.max_velocity), float(self.total_demand),
                *self.station_demand, *(float(b) for b in self.od_structure)]

    @classmethod
    def from_vector(cls, v) -> "EnvVector":
        v = [float(x) for x in v]
        if len(v) != ENV_DIM:
            raise InvalidEnv(f"expected {ENV_DIM} environment values, got {len(v)}")
        onehot = v[3 + N_PROBES:]
        if any(b not in (0.0, 1.0) for b in onehot):
            raise InvalidEnv(f"od_structure must be one-hot, got {onehot}")
        if v[0] != int(v[0]):
            raise InvalidEnv(f"fleet_size must be an integer, got {v[0]}")
        return cls(int(v[0]), v[1], v[2], tuple(v[3:3 + N_PROBES]), tuple(int(b) for b in onehot))

    def to_dict(self) -> dict:
        return {"fleet_size": self.fleet_size, "max_velocity": self.max_velocity,
                "total_demand": self.total_demand, "station_demand": list(self.station_demand),
                "od_structure": list(self.od_structure)}

    @classmethod
    def from_dict(cls, d: dict) -> "EnvVector":
        try:
            return cls(d["fleet_size"], d["max_velocity"], d["total_demand"],
                       tuple(d["station_demand"]), tuple(d["od_structure"]))
        except (KeyError, TypeError) as exc:
            raise InvalidEnv(f"malformed environment vector: {exc}") from None


@dataclass(frozen=True, eq=False)
class Scenario:
    id: int
    net: NetworkModel
    demand: DemandSpec
    sim: SimConfig
    env: EnvVector | None = None


def od_structures(net: NetworkModel, hub: int | None = None, hub_share: float = 0.7,
                  cross_share: float = 0.8, decay: float = 0.5) -> list[np.ndarray]:
    """The four OD structures over the network's stations, in ``OD_NAMES`` order.

    Capacitor rows and columns are zero. Station order (by node id) defines the
    commuter halves and the downstream direction for ring-following.
    """
    st = net.stations
    m = len(st)
    if m < 2:
        raise InvalidEnv("OD structures need at least two stations")
    hub = st[0] if hub is None else hub
    n = net.n

    def blank():
        return np.zeros((n, n))

    uniform = blank()
    for i in st:
        for j in st:
            if i != j:
                uniform[i, j] = 1.0 / (m - 1)

    spoke = blank()
    spokes = [s for s in st if s != hub]
    for i in st:
        if i == hub:
            for j in spokes:
                spoke[i, j] = 1.0 / len(spokes)
            continue
        others = [j for j in spokes if j != i]
        spoke[i, hub] = hub_share if others else 1.0
        for j in others:
            spoke[i, j] = (1.0 - hub_share) / len(others)

    commuter = blank()
    half = math.ceil(m / 2)
    west, east = st[:half], st[half:]
    for i in st:
        own, other = (west, east) if i in west else (east, west)
        own = [j for j in own if j != i]
        cross = cross_share if own else 1.0
        for j in other:
            commuter[i, j] = cross / len(other)
        for j in own:
            commuter[i, j] = (1.0 - cross) / len(own)

    ringf = blank()
    for a, i in enumerate(st):
        w = {st[(a + h) % m]: decay ** (h - 1) for h in range(1, m)}
        total = sum(w.values())
        for j, x in w.items():
            ringf[i, j] = x / total

    return [uniform, spoke, commuter, ringf]


def realize_scenario(env: EnvVector, net: NetworkModel, base: SimConfig, od_library, probes,
                     seed: int, scenario_id: int = 0) -> Scenario:
    env.validate()
    probes = [int(p) for p in probes]
    if len(probes) != N_PROBES or len(set(probes)) != N_PROBES:
        raise InvalidEnv(f"need {N_PROBES} distinct probe stations")
    stations = net.stations
    if any(p not in stations for p in probes):
        raise InvalidEnv("probe nodes must be stations")
    if len(od_library) != len(OD_NAMES):
        raise InvalidEnv(f"od_library must hold {len(OD_NAMES)} matrices")

    rates = [0.0] * net.n
    for p, q in zip(probes, env.station_demand):
        rates[p] = q / 3600.0
    rest = [s for s in stations if s not in probes]
    remainder = max(0.0, env.total_demand - sum(env.station_demand))
    if remainder > 0 and not rest:
        raise InvalidEnv("demand left over but every station is a probe")
    for s in rest:
        rates[s] = remainder / len(rest) / 3600.0

    od = np.array(od_library[env.od_index], dtype=float)
    demand = DemandSpec(tuple(rates), od, DemandMode.FINITE)
    demand.validate(net)
    sim = replace(base, fleet_size=int(env.fleet_size), max_velocity=float(env.max_velocity), seed=int(seed))
    return Scenario(scenario_id, net, demand, sim, env)
