import math

import numpy as np
import pytest

from meetup.road_graph import from_segments
from meetup.shortest_path import (
    FORWARD, REVERSE, NoPathError, Search, WeightView, astar, dijkstra, distance_weights, reconstruct_path,
)


def test_square_distances(sq):
    r = dijkstra(sq, distance_weights(sq), 1)
    assert r.dist == {1: 0.0, 2: 1.0, 4: 1.0, 3: 2.0}
    assert r.settled[0] == 1 and set(r.settled) == {1, 2, 3, 4}


def test_isolated_source():
    g = from_segments([(0, 0), (1, 0)], [(2, 1, 3.0)], directed=True)
    r = dijkstra(g, distance_weights(g), 1)
    assert r.dist == {1: 0.0} and r.settled == [1]


def test_reverse_direction():
    g = from_segments([(0, 0), (1, 0)], [(1, 2, 7.5)], directed=True)
    w = distance_weights(g)
    r = dijkstra(g, w, 2, REVERSE)
    assert r.dist == {2: 0.0, 1: 7.5}
    assert dijkstra(g, w, 2, FORWARD).dist == {2: 0.0}
    assert [e.id for e in reconstruct_path(r, 1)] == [0]


def test_unknown_source(sq):
    with pytest.raises(KeyError):
        dijkstra(sq, distance_weights(sq), 9)


def test_reconstruct(sq):
    w = distance_weights(sq)
    r = dijkstra(sq, w, 1)
    assert reconstruct_path(r, 1) == []
    path = reconstruct_path(r, 3)
    assert [(e.u, e.v) for e in path] in ([(1, 2), (2, 3)], [(1, 4), (4, 3)])
    assert sum(w.weight_of(e) for e in path) == 2.0
    partial = dijkstra(sq, w, 1, stop_set={1})
    with pytest.raises(NoPathError):
        reconstruct_path(partial, 3)


def test_weight_view_rejects_bad_costs(sq):
    with pytest.raises(ValueError):
        WeightView(sq, "distance", [1.0] * (sq.n_edges - 1) + [0.0])
    with pytest.raises(ValueError):
        WeightView(sq, "distance", [1.0] * (sq.n_edges - 1) + [math.inf])
    with pytest.raises(ValueError):
        WeightView(sq, "speed", [1.0] * sq.n_edges)


def test_symmetry_flag(sq):
    assert distance_weights(sq).symmetric
    g = from_segments([(0, 0), (1, 0)], [(1, 2, 7.5)], directed=True)
    assert not distance_weights(g).symmetric


def test_astar_square(sq):
    w = distance_weights(sq)
    res = astar(sq, w, 1, 3)
    assert res.cost == 2.0 and len(res.path) == 2
    same = astar(sq, w, 2, 2)
    assert same.cost == 0.0 and same.path == []


def test_astar_unreachable():
    g = from_segments([(0, 0), (1, 0), (2, 0)], [(1, 2, 1.0)])
    res = astar(g, distance_weights(g), 1, 3)
    assert not res.reachable and math.isinf(res.cost) and res.path is None


def _relaxed(graph, w, result):
    d = result.dist
    for u in d:
        for e in graph.out_edges(u) if result.direction == FORWARD else graph.in_edges(u):
            v = e.v if result.direction == FORWARD else e.u
            if v in d:
                assert d[v] <= d[u] + w.weight_of(e)


def test_relaxation_and_stop_sets(dc_graph, dc_weights):
    rng = np.random.default_rng(11)
    g, w = dc_graph, dc_weights
    for s in rng.choice(g.n_nodes, 5, replace=False) + 1:
        full = dijkstra(g, w, int(s))
        _relaxed(g, w, full)
        targets = {int(t) for t in rng.choice(g.n_nodes, 3, replace=False) + 1}
        part = dijkstra(g, w, int(s), stop_set=targets)
        assert targets <= set(part.settled)
        assert len(part.settled) <= len(full.settled)
        for t in targets:
            assert part.dist[t] == full.dist[t]
        assert part.settled == full.settled[: len(part.settled)]


def test_reverse_matches_forward(dc_graph, dc_weights):
    rng = np.random.default_rng(12)
    for u, t in rng.choice(dc_graph.n_nodes, (10, 2)) + 1:
        fwd = dijkstra(dc_graph, dc_weights, int(u), stop_set={int(t)})
        rev = dijkstra(dc_graph, dc_weights, int(t), REVERSE, stop_set={int(u)})
        assert fwd.dist[int(t)] == rev.dist[int(u)]


def test_resumed_search_matches_fresh(dc_graph, dc_weights):
    s = Search(dc_weights, 17)
    s.run({500})
    s.run({9000})
    s.run()
    fresh = dijkstra(dc_graph, dc_weights, 17)
    assert s.settled == fresh.settled and s.dist == fresh.dist


def test_path_sums_to_distance(dc_graph, dc_weights):
    r = dijkstra(dc_graph, dc_weights, 99, stop_set={7777})
    path = reconstruct_path(r, 7777)
    assert path[0].u == 99 and path[-1].v == 7777
    assert all(a.v == b.u for a, b in zip(path, path[1:]))
    assert math.isclose(sum(dc_weights.weight_of(e) for e in path), r.dist[7777], rel_tol=1e-9)


def test_astar_settles_subset(dc_graph, dc_weights):
    rng = np.random.default_rng(13)
    for s, t in rng.choice(dc_graph.n_nodes, (20, 2)) + 1:
        a = astar(dc_graph, dc_weights, int(s), int(t))
        d = dijkstra(dc_graph, dc_weights, int(s), stop_set={int(t)})
        assert a.cost == d.dist[int(t)]
        assert math.isclose(sum(dc_weights.weight_of(e) for e in a.path), a.cost, rel_tol=1e-9)
