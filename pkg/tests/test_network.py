import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from atn_evm.errors import InvalidEdge, NotStronglyConnected, SameNode
from atn_evm.network import Node, NodeKind, build_network, nd_between, ring


def floyd_warshall(n, edges):
    d = np.full((n, n), np.inf)
    np.fill_diagonal(d, 0.0)
    for a, b, w in edges:
        d[a, b] = min(d[a, b], w)
    for k in range(n):
        for i in range(n):
            for j in range(n):
                if d[i, k] + d[k, j] < d[i, j]:
                    d[i, j] = d[i, k] + d[k, j]
    return d


def nodes(n):
    return [Node(i, NodeKind.STATION, 2, f"N{i}") for i in range(n)]


def test_two_nodes_mean_distance():
    net = build_network(nodes(2), [(0, 1, 100.0), (1, 0, 100.0)])
    assert net.d_av == 100.0
    assert net.nd[0, 1] == 1.0


def test_directed_ring_of_three():
    net = ring(3, 100.0)
    assert net.dist[0, 1] == 100.0
    assert net.dist[1, 0] == 200.0
    assert net.d_av == 150.0
    assert net.nd[0, 1] == 1.5
    assert net.nd[1, 0] == 0.75


def test_unreachable_node():
    with pytest.raises(NotStronglyConnected):
        build_network(nodes(3), [(0, 1, 10.0), (1, 0, 10.0), (2, 0, 10.0)])


@pytest.mark.parametrize("edge", [(0, 0, 5.0), (0, 7, 5.0), (0, 1, 0.0), (0, 1, -3.0)])
def test_invalid_edges(edge):
    with pytest.raises(InvalidEdge):
        build_network(nodes(2), [edge, (1, 0, 1.0), (0, 1, 1.0)] if edge[:2] != (0, 1) else [edge, (1, 0, 1.0)])


def test_parallel_edges_rejected():
    with pytest.raises(InvalidEdge):
        build_network(nodes(2), [(0, 1, 1.0), (0, 1, 2.0), (1, 0, 1.0)])


def test_nd_between():
    net = build_network(nodes(3), [(0, 1, 50.0), (1, 2, 100.0), (2, 0, 150.0)])
    # distances: 50,150 | 250,100 | 150,200 ; mean 150
    assert net.d_av == 150.0
    assert nd_between(net, 2, 0) == 1.0
    assert nd_between(net, 0, 1) == pytest.approx(3.0)
    with pytest.raises(SameNode):
        nd_between(net, 1, 1)


def test_nd_half_mean_distance_is_two():
    net = build_network(nodes(2), [(0, 1, 50.0), (1, 0, 150.0)])
    assert net.d_av == 100.0
    assert nd_between(net, 0, 1) == 2.0


@st.composite
def strong_graphs(draw):
    n = draw(st.integers(2, 7))
    perm = draw(st.permutations(range(n)))
    length = st.floats(1.0, 500.0, allow_nan=False)
    # a Hamiltonian cycle guarantees strong connectivity; chords add variety
    edges = {(perm[i], perm[(i + 1) % n]): draw(length) for i in range(n)}
    pairs = [(i, j) for i in range(n) for j in range(n) if i != j]
    for p in draw(st.lists(st.sampled_from(pairs), max_size=2 * n)):
        edges.setdefault(p, draw(length))
    return n, [(a, b, w) for (a, b), w in edges.items()]


@given(strong_graphs())
def test_matches_floyd_warshall(graph):
    n, edges = graph
    net = build_network(nodes(n), edges)
    np.testing.assert_allclose(net.dist, floyd_warshall(n, edges), rtol=1e-12)


@given(strong_graphs())
def test_distance_invariants(graph):
    n, edges = graph
    net = build_network(nodes(n), edges)
    off = ~np.eye(n, dtype=bool)
    assert np.all(np.diag(net.dist) == 0)
    assert np.all(net.dist[off] > 0)
    np.testing.assert_allclose(net.nd[off] * net.dist[off], net.d_av, rtol=1e-12)
    assert np.mean(1.0 / net.nd[off]) == pytest.approx(1.0, rel=1e-12)
    for i, j, k in itertools.product(range(n), repeat=3):
        assert net.dist[i, j] <= net.dist[i, k] + net.dist[k, j] + 1e-9


@given(strong_graphs(), st.data())
def test_lengthening_an_edge_never_shortens_paths(graph, data):
    n, edges = graph
    before = build_network(nodes(n), edges).dist
    idx = data.draw(st.integers(0, len(edges) - 1))
    extra = data.draw(st.floats(0.0, 1000.0))
    a, b, w = edges[idx]
    edges = edges[:idx] + [(a, b, w + extra)] + edges[idx + 1:]
    after = build_network(nodes(n), edges).dist
    assert np.all(after >= before - 1e-9)


@given(strong_graphs())
def test_nd_strictly_decreasing_in_distance(graph):
    n, edges = graph
    net = build_network(nodes(n), edges)
    pairs = [(i, j) for i in range(n) for j in range(n) if i != j]
    for p, q in itertools.combinations(pairs, 2):
        if net.dist[p] < net.dist[q] * (1 - 1e-9):
            assert net.nd[p] > net.nd[q]


def test_network_is_read_only():
    net = ring(3)
    with pytest.raises(ValueError):
        net.dist[0, 1] = 1.0
