"""Parametric empty-vehicle management: the calling and balancing functions.

Both functions share one structure. A move ``src -> dst`` is considered only
if every threshold gate passes; its score is then the weighted sum

    f_q * effective_queue(dst) + f_eb * EB(dst) + f_nd * ND(src, dst) + f_ai / AI(dst)

and the move is accepted when ``score >= t_total``. A decision round runs the
calling function greedily first, then balancing on what is left.
"""

from __future__ import annotations

import enum
import math
from collections import Counter
from dataclasses import astuple, dataclass, replace

from .errors import InconsistentViews, InvalidParams
from .network import NetworkModel

FACTOR_NAMES = ("f_q", "f_eb", "f_nd", "f_ai", "t_q", "t_eb", "t_ev", "t_nd", "t_total")
INTEGER_GATES = ("t_q", "t_eb", "t_ev")
PARAM_KEYS = tuple(f"c_{k}" for k in FACTOR_NAMES) + tuple(f"b_{k}" for k in FACTOR_NAMES)

# instrumentation: number of weighted sums actually computed
counters: Counter = Counter()


@dataclass(frozen=True)
class EvmParams:
    f_q: float = 0.0
    f_eb: float = 0.0
    f_nd: float = 0.0
    f_ai: float = 0.0
    t_q: float = 0
    t_eb: float = 0
    t_ev: float = 0
    t_nd: float = 0.0
    t_total: float = math.inf

    def __post_init__(self):
        for name in FACTOR_NAMES:
            v = getattr(self, name)
            if math.isnan(v) or v < 0:
                raise InvalidParams(f"{name} must be >= 0, got {v}")
        for name in ("f_q", "f_eb", "f_nd", "f_ai", "t_nd"):
            if math.isinf(getattr(self, name)):
                raise InvalidParams(f"{name} must be finite")
        for name in INTEGER_GATES:
            v = getattr(self, name)
            if math.isinf(v) or v != int(v):
                raise InvalidParams(f"{name} must be a non-negative integer, got {v}")

    @property
    def disabled(self) -> bool:
        return math.isinf(self.t_total)

    def as_tuple(self) -> tuple[float, ...]:
        return astuple(self)

    def scaled(self, c: float) -> "EvmParams":
        """Multiply the four weights and ``t_total`` by ``c``."""
        return replace(self, f_q=self.f_q * c, f_eb=self.f_eb * c, f_nd=self.f_nd * c,
                       f_ai=self.f_ai * c, t_total=self.t_total * c)


OFF = EvmParams()
UNIT = EvmParams(1.0, 1.0, 1.0, 1.0, 0, 0, 0, 0.0, 0.0)


@dataclass(frozen=True)
class ControllerParams:
    calling: EvmParams = OFF
    balancing: EvmParams = OFF

    def to_vector(self) -> list[float]:
        return list(self.calling.as_tuple()) + list(self.balancing.as_tuple())

    @classmethod
    def from_vector(cls, values) -> "ControllerParams":
        values = [float(v) for v in values]
        if len(values) != 2 * len(FACTOR_NAMES):
            raise InvalidParams(f"expected 18 parameter values, got {len(values)}")
        halves = []
        for prefix, chunk in (("c_", values[:9]), ("b_", values[9:])):
            try:
                halves.append(EvmParams(*chunk))
            except InvalidParams as exc:
                raise InvalidParams(f"{prefix}{exc}") from None
        return cls(*halves)

    def to_dict(self) -> dict[str, float]:
        return dict(zip(PARAM_KEYS, self.to_vector()))

    @classmethod
    def from_dict(cls, d: dict) -> "ControllerParams":
        missing = [k for k in PARAM_KEYS if k not in d]
        if missing:
            raise InvalidParams(f"missing parameter keys: {', '.join(missing)}")
        extra = sorted(set(d) - set(PARAM_KEYS))
        if extra:
            raise InvalidParams(f"unknown parameter keys: {', '.join(extra)}")
        return cls.from_vector([d[k] for k in PARAM_KEYS])


EVM_OFF = ControllerParams(OFF, OFF)


@dataclass(frozen=True)
class StationView:
    node: int
    queue_len: int = 0
    empty_berths: int = 0
    empty_vehicles: int = 0
    inbound_empties: int = 0
    ai: float = 1e6

    @property
    def effective_queue(self) -> int:
        return max(0, self.queue_len - self.inbound_empties)


class MoveKind(str, enum.Enum):
    CALL = "Call"
    BALANCE = "Balance"


@dataclass(frozen=True)
class MoveCandidate:
    source: int
    target: int
    score: float
    kind: MoveKind


class Gate(str, enum.Enum):
    """Reason a move was rejected."""
    QUEUE = "QueueThreshold"
    BERTHS = "BerthThreshold"
    VEHICLES = "VehicleThreshold"
    DISTANCE = "DistanceThreshold"
    TOTAL = "TotalThreshold"


def score_move(p: EvmParams, net: NetworkModel, src: StationView, dst: StationView) -> float | Gate:
    """Score one move, or return the :class:`Gate` that rejected it."""
    if src.node == dst.node:
        raise InconsistentViews("source and target must differ")
    eq = dst.effective_queue
    if eq < p.t_q:
        return Gate.QUEUE
    if dst.empty_berths < p.t_eb:
        return Gate.BERTHS
    if src.empty_vehicles < p.t_ev:
        return Gate.VEHICLES
    nd = net.nd[src.node, dst.node]
    if nd < p.t_nd:
        return Gate.DISTANCE
    counters["score"] += 1
    score = p.f_q * eq + p.f_eb * dst.empty_berths + p.f_nd * nd + p.f_ai * (1.0 / dst.ai)
    if score < p.t_total:
        return Gate.TOTAL
    return score


def _check_views(net: NetworkModel, views) -> dict[int, StationView]:
    by_node = {v.node: v for v in views}
    if sorted(by_node) != list(range(net.n)):
        raise InconsistentViews("views must cover every node exactly once")
    for v in views:
        if min(v.queue_len, v.empty_berths, v.empty_vehicles, v.inbound_empties) < 0:
            raise InconsistentViews(f"negative count in view of node {v.node}")
        if not v.ai > 0:
            raise InconsistentViews(f"mean inter-arrival at node {v.node} must be positive")
    return by_node


def _feasible_target(kind: MoveKind, dst: StationView) -> bool:
    # a move needs somewhere to go: a waiting group or a free berth
    if kind is MoveKind.BALANCE:
        return dst.empty_berths >= 1
    return dst.effective_queue >= 1 or dst.empty_berths >= 1


def _greedy_phase(p: EvmParams, net: NetworkModel, state: dict[int, StationView], kind: MoveKind,
                  targets: list[int]) -> list[MoveCandidate]:
    committed = []
    if p.disabled:
        return committed
    dist = net.dist
    while True:
        best = None
        best_key = None
        for s in range(net.n):
            src = state[s]
            if src.empty_vehicles < 1:
                continue
            for t in targets:
                if t == s:
                    continue
                dst = state[t]
                if not _feasible_target(kind, dst):
                    continue
                r = score_move(p, net, src, dst)
                if isinstance(r, Gate):
                    continue
                key = (-r, dist[s, t], s, t)
                if best_key is None or key < best_key:
                    best, best_key = (s, t, r), key
        if best is None:
            return committed
        s, t, r = best
        committed.append(MoveCandidate(s, t, r, kind))
        state[s] = replace(state[s], empty_vehicles=state[s].empty_vehicles - 1)
        dst = state[t]
        if kind is MoveKind.BALANCE:
            state[t] = replace(dst, inbound_empties=dst.inbound_empties + 1, empty_berths=dst.empty_berths - 1)
        else:
            state[t] = replace(dst, inbound_empties=dst.inbound_empties + 1)


def decision_round(cp: ControllerParams, net: NetworkModel, views, now: float = 0.0) -> list[MoveCandidate]:
    """Greedy calling phase, then greedy balancing phase.

    Returns the committed moves in commit order. Ties on score go to the
    shorter ``dist[src, dst]``, then to the smaller ``(src, dst)``.
    ``now`` is accepted for interface symmetry; the scoring is time-free.
    """
    state = dict(_check_views(net, views))
    stations = [nd.id for nd in net.nodes if nd.is_station]
    moves = _greedy_phase(cp.calling, net, state, MoveKind.CALL, stations)
    moves += _greedy_phase(cp.balancing, net, state, MoveKind.BALANCE, list(range(net.n)))
    return moves


def horizon_filter(views, t_nd: float, net: NetworkModel, center: int, inbound: bool = False) -> list[StationView]:
    """Views of the nodes within the ND horizon of ``center``.

    With ``inbound=False`` a node ``j`` is visible when ``nd[center, j] >= t_nd``
    (where ``center`` could send a vehicle); with ``inbound=True`` when
    ``nd[j, center] >= t_nd`` (who could send a vehicle to ``center``).
    """
    out = []
    for v in views:
        if v.node == center:
            continue
        nd = net.nd[v.node, center] if inbound else net.nd[center, v.node]
        if nd >= t_nd:
            out.append(v)
    return out
