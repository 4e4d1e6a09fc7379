"""Guideway graph and the distance quantities used by EVM scoring.

The guideway is a directed graph (PRT track is one-way). All-pairs shortest
distances are computed once; ``d_av`` is the mean over ordered pairs of
distinct nodes and ``nd[i, j] = d_av / dist[i, j]``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path

from .errors import InvalidEdge, NotStronglyConnected, SameNode


class NodeKind(str, enum.Enum):
    STATION = "Station"
    CAPACITOR = "Capacitor"


@dataclass(frozen=True)
class Node:
    id: int
    kind: NodeKind = NodeKind.STATION
    berth_count: int = 1
    name: str = ""

    def __post_init__(self):
        if self.id < 0:
            raise InvalidEdge(f"node id must be non-negative, got {self.id}")
        if self.berth_count < 1:
            raise InvalidEdge(f"node {self.label} needs at least one berth")

    @property
    def label(self) -> str:
        return self.name or str(self.id)

    @property
    def is_station(self) -> bool:
        return self.kind == NodeKind.STATION


@dataclass(frozen=True)
class Edge:
    src: int
    dst: int
    length: float


@dataclass(frozen=True, eq=False)
class NetworkModel:
    nodes: tuple[Node, ...]
    edges: tuple[Edge, ...]
    dist: np.ndarray
    d_av: float
    nd: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return len(self.nodes)

    @property
    def stations(self) -> list[int]:
        return [nd.id for nd in self.nodes if nd.is_station]

    @property
    def total_berths(self) -> int:
        return sum(nd.berth_count for nd in self.nodes)

    def index(self, name: str) -> int:
        for nd in self.nodes:
            if nd.name == name:
                return nd.id
        raise KeyError(name)


def build_network(nodes, edges) -> NetworkModel:
    """Validate the graph and precompute ``dist``, ``d_av`` and ``nd``.

    ``nodes`` must carry ids ``0..n-1`` (any order); ``edges`` are
    :class:`Edge` or ``(src, dst, length)`` triples.
    """
    nodes = tuple(sorted(nodes, key=lambda nd: nd.id))
    n = len(nodes)
    if n < 2:
        raise NotStronglyConnected("a network needs at least two nodes")
    if [nd.id for nd in nodes] != list(range(n)):
        raise InvalidEdge("node ids must be exactly 0..n-1")

    edges = tuple(e if isinstance(e, Edge) else Edge(int(e[0]), int(e[1]), float(e[2])) for e in edges)
    seen = set()
    for e in edges:
        if not (0 <= e.src < n and 0 <= e.dst < n):
            raise InvalidEdge(f"edge {e.src}->{e.dst} references an unknown node")
        if e.src == e.dst:
            raise InvalidEdge(f"self-loop at node {nodes[e.src].label}")
        if not (e.length > 0 and np.isfinite(e.length)):
            raise InvalidEdge(f"edge {nodes[e.src].label}->{nodes[e.dst].label} has non-positive length {e.length}")
        if (e.src, e.dst) in seen:
            raise InvalidEdge(f"parallel edge {nodes[e.src].label}->{nodes[e.dst].label}")
        seen.add((e.src, e.dst))

    rows = [e.src for e in edges]
    cols = [e.dst for e in edges]
    lengths = [e.length for e in edges]
    graph = csr_matrix((lengths, (rows, cols)), shape=(n, n))
    dist = shortest_path(graph, method="D", directed=True)

    off = ~np.eye(n, dtype=bool)
    if not np.all(np.isfinite(dist[off])):
        i, j = np.argwhere(~np.isfinite(dist) & off)[0]
        raise NotStronglyConnected(f"{nodes[j].label} is unreachable from {nodes[i].label}")

    d_av = float(dist[off].mean())
    nd = np.full((n, n), np.nan)
    nd[off] = d_av / dist[off]
    dist.setflags(write=False)
    nd.setflags(write=False)
    return NetworkModel(nodes=nodes, edges=edges, dist=dist, d_av=d_av, nd=nd)


def nd_between(net: NetworkModel, i: int, j: int) -> float:
    if i == j:
        raise SameNode(f"normalized inverse distance undefined for node {i} to itself")
    return float(net.nd[i, j])


def ring(n: int, length: float = 100.0, berths: int = 1, names=None) -> NetworkModel:
    """One-way ring ``0 -> 1 -> ... -> n-1 -> 0``, handy for tests and demos."""
    names = names or [chr(ord("A") + k) if n <= 26 else f"S{k}" for k in range(n)]
    nodes = [Node(k, NodeKind.STATION, berths, names[k]) for k in range(n)]
    edges = [Edge(k, (k + 1) % n, length) for k in range(n)]
    return build_network(nodes, edges)
