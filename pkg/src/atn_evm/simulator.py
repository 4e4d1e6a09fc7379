"""Deterministic discrete-event simulation of a PRT network.

Vehicles carry one passenger group at a time. Passenger groups arrive as a
Poisson process per station (``FiniteDemand``) or are always waiting at every
station with a nonzero OD row (``InfiniteQueues``, used for ridership). Empty
vehicles move only when the EVM controller tells them to; a decision round
fires every ``evm_epoch`` seconds.

Events at equal timestamps are ordered group arrival < vehicle arrival <
dwell completion < EVM epoch, then by insertion sequence.
"""

from __future__ import annotations

import bisect
import enum
import heapq
import math
import zlib
from collections import deque
from dataclasses import asdict, dataclass

import numpy as np

from .errors import FleetExceedsBerths, InvalidConfig, InvalidDemand, WindowTooLong
from .evm import EVM_OFF, ControllerParams, MoveKind, StationView, decision_round
from .network import NetworkModel, NodeKind

AI_CEILING = 1e6

# event priorities
GROUP_ARRIVAL, VEHICLE_ARRIVAL, DWELL_DONE, EVM_EPOCH = range(4)


class DemandMode(str, enum.Enum):
    FINITE = "FiniteDemand"
    INFINITE = "InfiniteQueues"


@dataclass(frozen=True, eq=False)
class DemandSpec:
    rates: tuple[float, ...]   # groups per second, one per node
    od_matrix: np.ndarray
    mode: DemandMode = DemandMode.FINITE

    def __post_init__(self):
        object.__setattr__(self, "rates", tuple(float(r) for r in self.rates))
        object.__setattr__(self, "od_matrix", np.asarray(self.od_matrix, dtype=float))
        object.__setattr__(self, "mode", DemandMode(self.mode))

    def validate(self, net: NetworkModel) -> None:
        n = net.n
        od = self.od_matrix
        if len(self.rates) != n:
            raise InvalidDemand(f"expected {n} arrival rates, got {len(self.rates)}")
        if od.shape != (n, n):
            raise InvalidDemand(f"od_matrix must be {n}x{n}, got {od.shape}")
        for node in net.nodes:
            i, label = node.id, node.label
            lam, row = self.rates[i], od[i]
            if not (math.isfinite(lam) and lam >= 0):
                raise InvalidDemand(f"station {label}: arrival rate must be finite and >= 0, got {lam}")
            if np.any(row < 0) or not np.all(np.isfinite(row)):
                raise InvalidDemand(f"station {label}: od_matrix row has negative or non-finite entries")
            if row[i] != 0:
                raise InvalidDemand(f"station {label}: od_matrix diagonal must be 0")
            if node.kind == NodeKind.CAPACITOR:
                if lam != 0 or row.any():
                    raise InvalidDemand(f"capacitor {label} cannot generate demand")
                if od[:, i].any():
                    raise InvalidDemand(f"capacitor {label} cannot be a trip destination")
                continue
            total = row.sum()
            if lam > 0 and abs(total - 1.0) > 1e-9:
                raise InvalidDemand(f"station {label}: od_matrix row sums to {total:.12g}, expected 1")
            if lam == 0 and total != 0 and abs(total - 1.0) > 1e-9:
                raise InvalidDemand(f"station {label}: od_matrix row sums to {total:.12g}, expected 0 or 1")

    def prior_history(self, net: NetworkModel, ceiling: float = AI_CEILING) -> "DemandHistory":
        ai = tuple(min(1.0 / lam, ceiling) if lam > 0 else ceiling for lam in self.rates)
        return DemandHistory(ai, "ScenarioPrior")


@dataclass(frozen=True)
class DemandHistory:
    ai: tuple[float, ...]
    source: str = "ScenarioPrior"


@dataclass(frozen=True)
class SimConfig:
    horizon: float = 7200.0
    warmup: float | None = None      # None -> horizon / 10
    dwell_time: float = 15.0
    max_velocity: float = 10.0
    fleet_size: int = 1
    evm_epoch: float = 5.0
    seed: int = 0
    history_window: float | None = None  # None -> use the scenario prior 1/lambda
    ai_ceiling: float = AI_CEILING

    def __post_init__(self):
        if self.warmup is None:
            object.__setattr__(self, "warmup", self.horizon / 10.0)
        if not (self.horizon > 0 and 0 <= self.warmup < self.horizon):
            raise InvalidConfig(f"need 0 <= warmup < horizon, got warmup={self.warmup}, horizon={self.horizon}")
        if self.dwell_time < 0:
            raise InvalidConfig("dwell_time must be >= 0")
        if not self.max_velocity > 0:
            raise InvalidConfig("max_velocity must be > 0")
        if self.fleet_size < 1 or int(self.fleet_size) != self.fleet_size:
            raise InvalidConfig(f"fleet_size must be an integer >= 1, got {self.fleet_size}")
        if not self.evm_epoch > 0:
            raise InvalidConfig("evm_epoch must be > 0")
        if self.history_window is not None and not self.history_window > 0:
            raise InvalidConfig("history_window must be > 0")


@dataclass
class SimMetrics:
    full_trips: int = 0
    empty_trips: int = 0
    throughput: float = 0.0          # full trips per hour after warmup
    mean_wait: float | None = None   # over groups boarded after warmup
    p90_wait: float | None = None
    empty_distance: float = 0.0
    full_distance: float = 0.0
    served_groups: int = 0
    residual_queue: int = 0
    censored_wait: float | None = None  # unserved groups count up to the horizon

    def to_dict(self) -> dict:
        return asdict(self)


class VState(enum.Enum):
    IDLE = "idle"
    DWELLING = "dwelling"
    MOVING_EMPTY = "moving_empty"
    MOVING_FULL = "moving_full"
    HOLDING = "holding"   # arrived at a node with no free berth


@dataclass
class Vehicle:
    id: int
    node: int                     # current node, or destination while moving
    state: VState = VState.IDLE
    origin: int = -1              # trip origin while moving
    group: list | None = None
    balancing: bool = False
    odometer_empty: float = 0.0
    odometer_full: float = 0.0


def substream(seed: int, label: str, *key: int) -> np.random.Generator:
    """Independent generator for one labelled purpose."""
    ss = np.random.SeedSequence(entropy=int(seed) & (2**64 - 1), spawn_key=(zlib.crc32(label.encode()), *key))
    return np.random.default_rng(ss)


@dataclass
class _Group:
    origin: int
    dest: int
    arrival: float
    board: float | None = None


class Simulation:
    """One run. ``run()`` may be called repeatedly with increasing ``until``."""

    def __init__(self, net: NetworkModel, demand: DemandSpec, config: SimConfig,
                 controller: ControllerParams = EVM_OFF, event_log: list | None = None,
                 strict: bool = False):
        demand.validate(net)
        if config.fleet_size > net.total_berths:
            raise FleetExceedsBerths(f"fleet of {config.fleet_size} exceeds {net.total_berths} berths")
        self.net, self.demand, self.cfg, self.cp = net, demand, config, controller
        self.log = event_log
        self.strict = strict
        n = net.n
        self.now = 0.0
        self._heap: list = []
        self._seq = 0
        self.queues = [deque() for _ in range(n)]
        self.idle: list[set[int]] = [set() for _ in range(n)]
        self.occupancy = [0] * n
        self.holding = [deque() for _ in range(n)]
        self.inbound_empty = [0] * n
        self.inbound_balance = [0] * n
        self.groups: list[_Group] = []
        self.arrival_times: list[list[float]] = [[] for _ in range(n)]
        self.boarded_order: list[list[_Group]] = [[] for _ in range(n)]
        self.metrics = SimMetrics()
        self._full_after_warmup = 0
        self._dirty = True
        self._started = False

        self._travel = net.dist / config.max_velocity
        self._cum_od = np.cumsum(demand.od_matrix, axis=1)
        self._od_rng = [substream(config.seed, "od", s) for s in range(n)]
        self._arr_rng = [substream(config.seed, "arrivals", s) for s in range(n)]
        self._prior = demand.prior_history(net, config.ai_ceiling)
        self.infinite = demand.mode == DemandMode.INFINITE
        self._backlog = [
            self.infinite and net.nodes[s].is_station and demand.od_matrix[s].sum() > 0 for s in range(n)
        ]
        self.vehicles = self._place_fleet()

    # -- setup -----------------------------------------------------------
    def _place_fleet(self) -> list[Vehicle]:
        # round-robin over station berths; capacitors only take the overflow
        vehicles = []
        for group in (self.net.stations, [nd.id for nd in self.net.nodes if not nd.is_station]):
            k = 0
            while len(vehicles) < self.cfg.fleet_size and any(
                    self.occupancy[s] < self.net.nodes[s].berth_count for s in group):
                s = group[k % len(group)]
                k += 1
                if self.occupancy[s] >= self.net.nodes[s].berth_count:
                    continue
                v = Vehicle(len(vehicles), s)
                self.occupancy[s] += 1
                self.idle[s].add(v.id)
                vehicles.append(v)
        return vehicles

    def _push(self, t: float, prio: int, payload) -> None:
        heapq.heappush(self._heap, (t, prio, self._seq, payload))
        self._seq += 1

    def _emit(self, kind: str, vehicle, a, b) -> None:
        if self.log is not None:
            self.log.append(f"{self.now:.6f}\t{kind}\t{'-' if vehicle is None else vehicle}\t{a}\t{b}")

    def _start(self) -> None:
        self._started = True
        for s in range(self.net.n):
            lam = self.demand.rates[s]
            if self._backlog[s]:
                self._top_up(s)
            elif not self.infinite and lam > 0:
                self._push(self._arr_rng[s].exponential(1.0 / lam), GROUP_ARRIVAL, s)
        for s in range(self.net.n):
            self._serve_idle(s)
        self._push(0.0, EVM_EPOCH, 0)

    # -- demand ----------------------------------------------------------
    def _draw_dest(self, s: int) -> int:
        u = self._od_rng[s].random() * self._cum_od[s, -1]
        d = min(int(np.searchsorted(self._cum_od[s], u, side="right")), self.net.n - 1)
        while self.demand.od_matrix[s, d] == 0:
            d -= 1   # u rounded up to the row total
        return d

    def _new_group(self, s: int) -> None:
        g = _Group(s, self._draw_dest(s), self.now)
        self.groups.append(g)
        self.queues[s].append(g)
        self.arrival_times[s].append(self.now)
        self._emit("group_arrival", None, s, g.dest)

    def _top_up(self, s: int) -> None:
        while len(self.queues[s]) < self.cfg.fleet_size:
            self._new_group(s)

    def _pop_group(self, s: int) -> _Group:
        g = self.queues[s].popleft()
        g.board = self.now
        self.boarded_order[s].append(g)
        if self._backlog[s]:
            self._top_up(s)
        return g

    # -- vehicle movement --------------------------------------------------
    def _serve_idle(self, s: int) -> None:
        while self.queues[s] and self.idle[s]:
            vid = min(self.idle[s])
            self.idle[s].discard(vid)
            v = self.vehicles[vid]
            v.group = self._pop_group(s)
            v.state = VState.DWELLING
            self._emit("board", vid, s, v.group.dest)
            self._push(self.now + self.cfg.dwell_time, DWELL_DONE, vid)

    def _depart(self, v: Vehicle, dest: int, balancing: bool = False) -> None:
        s = v.node
        full = v.group is not None
        self.occupancy[s] -= 1
        v.origin, v.node = s, dest
        v.state = VState.MOVING_FULL if full else VState.MOVING_EMPTY
        v.balancing = balancing
        if not full:
            self.inbound_empty[dest] += 1
            if balancing:
                self.inbound_balance[dest] += 1
        self._emit("depart_full" if full else "depart_empty", v.id, s, dest)
        self._push(self.now + self._travel[s, dest], VEHICLE_ARRIVAL, v.id)
        if self.holding[s]:
            self._admit(self.holding[s].popleft())

    def _admit(self, v: Vehicle) -> None:
        d = v.node
        self.occupancy[d] += 1
        if v.group is not None or self.queues[d]:
            v.state = VState.DWELLING
            self._push(self.now + self.cfg.dwell_time, DWELL_DONE, v.id)
        else:
            self._make_idle(v)

    def _make_idle(self, v: Vehicle) -> None:
        v.state = VState.IDLE
        self.idle[v.node].add(v.id)
        self._emit("idle", v.id, v.node, v.node)

    def _on_vehicle_arrival(self, vid: int) -> None:
        v = self.vehicles[vid]
        s, d = v.origin, v.node
        length = float(self.net.dist[s, d])
        if v.group is not None:
            self.metrics.full_trips += 1
            self.metrics.served_groups += 1
            self.metrics.full_distance += length
            v.odometer_full += length
            if self.now >= self.cfg.warmup:
                self._full_after_warmup += 1
        else:
            self.metrics.empty_trips += 1
            self.metrics.empty_distance += length
            v.odometer_empty += length
            self.inbound_empty[d] -= 1
            if v.balancing:
                self.inbound_balance[d] -= 1
        v.balancing = False
        self._emit("arrive", vid, s, d)
        if self.occupancy[d] < self.net.nodes[d].berth_count:
            self._admit(v)
        else:
            v.state = VState.HOLDING
            self.holding[d].append(v)
            self._emit("hold", vid, d, d)

    def _on_dwell_done(self, vid: int) -> None:
        v = self.vehicles[vid]
        s = v.node
        if v.group is not None and v.group.origin != s:
            v.group = None  # alighting finished
        if v.group is None and self.queues[s]:
            v.group = self._pop_group(s)
            self._emit("board", vid, s, v.group.dest)
        if v.group is not None:
            self._depart(v, v.group.dest)
        else:
            self._make_idle(v)

    def _on_group_arrival(self, s: int) -> None:
        self._new_group(s)
        self._push(self.now + self._arr_rng[s].exponential(1.0 / self.demand.rates[s]), GROUP_ARRIVAL, s)
        self._serve_idle(s)

    def _on_epoch(self, k: int) -> None:
        nxt = (k + 1) * self.cfg.evm_epoch
        if nxt <= self.cfg.horizon:
            self._push(nxt, EVM_EPOCH, k + 1)
        # an unchanged state yields an empty round when history is static
        if not self._dirty and self.cfg.history_window is None:
            return
        self._dirty = False
        if not any(self.idle):
            return
        moves = decision_round(self.cp, self.net, self.views(), self.now)
        for m in moves:
            vid = min(self.idle[m.source])
            self.idle[m.source].discard(vid)
            v = self.vehicles[vid]
            self._depart(v, m.target, balancing=m.kind is MoveKind.BALANCE)
        if moves:
            self._dirty = True

    # -- observation -------------------------------------------------------
    def views(self) -> list[StationView]:
        hist = self.history()
        out = []
        for node in self.net.nodes:
            j = node.id
            reserved = self.inbound_balance[j] + len(self.holding[j])
            eb = max(0, node.berth_count - self.occupancy[j] - reserved)
            out.append(StationView(j, len(self.queues[j]), eb, len(self.idle[j]), self.inbound_empty[j], hist.ai[j]))
        return out

    def history(self) -> DemandHistory:
        w = self.cfg.history_window
        if w is None or self.now < w:
            return self._prior
        return self.observe_history(w)

    def observe_history(self, window: float) -> DemandHistory:
        """Mean inter-arrival per node over the trailing ``window`` seconds."""
        if window > self.now:
            raise WindowTooLong(f"window {window} s exceeds elapsed time {self.now} s")
        if not window > 0:
            raise WindowTooLong("window must be positive")
        lo = self.now - window
        ai = []
        for s in range(self.net.n):
            times = self.arrival_times[s]
            count = len(times) - bisect.bisect_left(times, lo)
            ai.append(min(window / count, self.cfg.ai_ceiling) if count else self.cfg.ai_ceiling)
        return DemandHistory(tuple(ai), "ObservedWindow")

    # -- main loop ---------------------------------------------------------
    def run(self, until: float | None = None) -> SimMetrics:
        stop = self.cfg.horizon if until is None else min(until, self.cfg.horizon)
        if not self._started:
            self._start()
            if self.strict:
                self.check_invariants()
        handlers = {GROUP_ARRIVAL: self._on_group_arrival, VEHICLE_ARRIVAL: self._on_vehicle_arrival,
                    DWELL_DONE: self._on_dwell_done, EVM_EPOCH: self._on_epoch}
        heap = self._heap
        while heap and heap[0][0] <= stop:
            t, prio, _, payload = heapq.heappop(heap)
            self.now = t
            if prio != EVM_EPOCH:
                self._dirty = True
            handlers[prio](payload)
            if self.strict:
                self.check_invariants()
        self.now = stop
        return self.finalize()

    def finalize(self) -> SimMetrics:
        m = self.metrics
        cfg = self.cfg
        m.throughput = self._full_after_warmup / ((cfg.horizon - cfg.warmup) / 3600.0)
        waits = [g.board - g.arrival for g in self.groups if g.board is not None and g.board >= cfg.warmup]
        m.mean_wait = float(np.mean(waits)) if waits else None
        m.p90_wait = float(np.percentile(waits, 90)) if waits else None
        censored = [(g.board if g.board is not None else self.now) - g.arrival
                    for g in self.groups if g.arrival >= cfg.warmup]
        m.censored_wait = float(np.mean(censored)) if censored else None
        m.residual_queue = sum(len(q) for q in self.queues)
        return m

    def check_invariants(self) -> None:
        counts = {st: 0 for st in VState}
        per_node = [0] * self.net.n
        for v in self.vehicles:
            counts[v.state] += 1
            if v.state in (VState.IDLE, VState.DWELLING):
                per_node[v.node] += 1
        assert sum(counts.values()) == self.cfg.fleet_size
        assert per_node == self.occupancy, (per_node, self.occupancy)
        for node in self.net.nodes:
            assert self.occupancy[node.id] <= node.berth_count, f"berth overflow at {node.label}"
            if not node.is_station:
                assert not self.queues[node.id]
        for s in range(self.net.n):
            assert len(self.idle[s]) == sum(1 for v in self.vehicles if v.state is VState.IDLE and v.node == s)
            if self.idle[s]:
                assert not self.queues[s], "idle vehicle next to a waiting group"


def run_simulation(net: NetworkModel, demand: DemandSpec, config: SimConfig,
                   controller: ControllerParams = EVM_OFF, event_log: list | None = None,
                   strict: bool = False) -> SimMetrics:
    return Simulation(net, demand, config, controller, event_log, strict).run()


def measure_ridership(net: NetworkModel, od_matrix, config: SimConfig,
                      controller: ControllerParams = EVM_OFF) -> float:
    """Full trips per hour with an endless queue at every station that has demand."""
    od = np.asarray(od_matrix.od_matrix if isinstance(od_matrix, DemandSpec) else od_matrix, dtype=float)
    demand = DemandSpec((0.0,) * net.n, od, DemandMode.INFINITE)
    return run_simulation(net, demand, config, controller).throughput
