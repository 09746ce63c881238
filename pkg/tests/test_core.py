import math

import numpy as np
import pytest

from meetup.core import (
    FINAL_DESTINATION, CandidateSet, InfeasibleError, MeetupQuery, MovingObject, all_candidates,
    candidates_for, ch_candidates, cost_surface, default_ed_k, diameter_nodes, euclidean_seed, evaluate_candidates,
    greedy_descent, rt_candidates, solve, solve_ch, solve_dp, solve_ed, solve_exact, solve_rt, solve_sp,
    sp_candidates, write_surface_csv,
)
from meetup.road_graph import from_segments, knn_nodes
from meetup.shortest_path import dijkstra, distance_weights

from instances import corridor_graph, exterior_hub_graph
from oracles import enumerate_objective, floyd_warshall, random_graph


@pytest.fixture
def w_sq(sq):
    return distance_weights(sq)


def test_query_validation():
    with pytest.raises(ValueError):
        MeetupQuery(())
    with pytest.raises(ValueError):
        MeetupQuery((MovingObject("a", 1),))
    with pytest.raises(ValueError):
        MeetupQuery((MovingObject("a", 1, 2),), mode="sideways")
    with pytest.raises(ValueError):
        MovingObject("a", 1, 2, w_out=-1)


def test_evaluate_all_square(sq, w_sq, q_sq):
    sol = evaluate_candidates(sq, w_sq, q_sq, all_candidates(sq))
    assert (sol.node, sol.objective) == (1, 4.0)
    single = evaluate_candidates(sq, w_sq, q_sq, CandidateSet(frozenset({2}), "manual"))
    assert (single.node, single.objective) == (2, 4.0)
    assert sol.objective == sum(a + b for a, b in sol.per_object)


def test_final_destination_square(sq, w_sq):
    q = MeetupQuery((MovingObject("A", 1), MovingObject("B", 3)), FINAL_DESTINATION)
    sol = evaluate_candidates(sq, w_sq, q, all_candidates(sq))
    # Every node costs 2 here (n1: 0 + 2, n2: 1 + 1, ...), so the lowest id wins.
    assert [r.objective for r in cost_surface(sq, w_sq, q)] == [2.0] * 4
    assert (sol.node, sol.objective) == (1, 2.0)
    assert all(back == 0.0 for _, back in sol.per_object)


def test_empty_candidates_rejected(sq, w_sq, q_sq):
    with pytest.raises(ValueError):
        evaluate_candidates(sq, w_sq, q_sq, CandidateSet(frozenset(), "manual"))


def test_exact_square_and_zero_trips(sq, w_sq, q_sq):
    assert solve_exact(sq, w_sq, q_sq).objective == 4.0
    q = MeetupQuery((MovingObject("A", 1, 1), MovingObject("B", 1, 1)))
    sol = solve_exact(sq, w_sq, q)
    assert (sol.node, sol.objective) == (1, 0.0)


@pytest.mark.parametrize("method", ["sp", "ch", "dp", "rt", "ed", "greedy"])
def test_every_heuristic_on_square(sq, w_sq, q_sq, method):
    sol = solve(sq, w_sq, q_sq, method)
    assert sol.objective == 4.0 and sol.method == method


def test_square_candidate_sets(sq, w_sq, q_sq):
    every = {1, 2, 3, 4}
    assert set(ch_candidates(sq, q_sq).nodes) == every
    assert set(rt_candidates(sq, q_sq).nodes) == every
    assert set(candidates_for(sq, w_sq, q_sq, "dp").nodes) == every
    p, q = diameter_nodes(sq, q_sq)
    assert {p, q} in ({1, 3}, {2, 4})
    assert sp_candidates(sq, w_sq, q_sq).nodes


def test_ed_k(sq, w_sq, q_sq):
    assert solve_ed(sq, w_sq, q_sq, k=4).candidate_count == 4
    one = solve_ed(sq, w_sq, q_sq, k=1)
    assert one.candidate_count == 1 and one.objective == 4.0
    # On the sphere the corners are not equidistant from the centre.
    assert one.node == knn_nodes(sq, euclidean_seed(sq, q_sq), 1)[0]
    assert default_ed_k(sq) == 1


def test_ed_default_k_on_benchmark_graph(dc_graph):
    assert default_ed_k(dc_graph) == 956


def test_greedy_fixed_point(sq, w_sq, q_sq):
    sol = greedy_descent(sq, w_sq, q_sq, start=3, neighborhood_k=3)
    assert (sol.node, sol.objective) == (3, 4.0)
    with pytest.raises(ValueError):
        greedy_descent(sq, w_sq, q_sq, neighborhood_k=0)


def test_sp_needs_intermediate_mode(sq, w_sq):
    q = MeetupQuery((MovingObject("A", 1), MovingObject("B", 3)), FINAL_DESTINATION)
    with pytest.raises(ValueError):
        solve_sp(sq, w_sq, q)


def test_sp_degenerate_trip(sq, w_sq):
    q = MeetupQuery((MovingObject("A", 2, 2), MovingObject("B", 1, 3)))
    assert sp_candidates(sq, w_sq, q).nodes <= {2}


def test_disconnected_components_fall_back_then_fail():
    g = from_segments([(0, 0), (0.001, 0), (1, 1), (1.001, 1)], [(1, 2, 1.0), (3, 4, 1.0)])
    w = distance_weights(g)
    q = MeetupQuery((MovingObject("A", 1, 2), MovingObject("B", 3, 4)))
    assert sp_candidates(g, w, q).fell_back
    with pytest.raises(InfeasibleError) as info:
        solve_sp(g, w, q)
    assert info.value.fell_back
    with pytest.raises(InfeasibleError):
        solve_exact(g, w, q)


def test_collinear_ch_falls_back_to_rt():
    g = from_segments([(0, 0), (0, 0.001), (0, 0.002), (0, 0.003)], [(1, 2, 1.0), (2, 3, 1.0), (3, 4, 1.0)])
    w = distance_weights(g)
    q = MeetupQuery((MovingObject("A", 1, 4), MovingObject("B", 2, 3)))
    c = ch_candidates(g, q)
    assert c.fell_back and c.nodes == rt_candidates(g, q).nodes
    ch, rt = solve_ch(g, w, q), solve_rt(g, w, q)
    assert ch.fell_back and (ch.node, ch.objective) == (rt.node, rt.objective)
    assert rt_candidates(g, q).nodes == {1, 2, 3, 4}


def test_dp_single_point():
    g = from_segments([(0, 0), (0.001, 0)], [(1, 2, 1.0)])
    q = MeetupQuery((MovingObject("A", 1, 1), MovingObject("B", 1, 1)))
    assert candidates_for(g, distance_weights(g), q, "dp").nodes == {1}


def test_exterior_hub_beats_hull_and_box():
    g = exterior_hub_graph()
    w = distance_weights(g)
    q = MeetupQuery((MovingObject("A", 1, 3), MovingObject("B", 2, 4)))
    exact = solve_exact(g, w, q)
    assert (exact.node, exact.objective) == (6, 4.0)
    assert 6 not in ch_candidates(g, q).nodes and 6 not in rt_candidates(g, q).nodes
    assert solve_ch(g, w, q).objective > exact.objective
    assert solve_rt(g, w, q).objective > exact.objective
    assert solve_dp(g, w, q).objective == exact.objective


def test_sp_fallback_matches_rt():
    g = corridor_graph()
    w = distance_weights(g)
    q = MeetupQuery((MovingObject("A", 2, 5), MovingObject("B", 8, 11)))
    sp, rt = solve_sp(g, w, q), solve_rt(g, w, q)
    assert sp.fell_back and not rt.fell_back
    assert (sp.node, sp.objective, sp.per_object, sp.candidate_count) == \
        (rt.node, rt.objective, rt.per_object, rt.candidate_count)


def test_dominance_on_random_graphs():
    rng = np.random.default_rng(31)
    for trial in range(10):
        g = random_graph(rng, 50)
        w = distance_weights(g)
        d = floyd_warshall(g, w.costs)
        nodes = rng.choice(g.n_nodes, 4, replace=False) + 1
        q = MeetupQuery((MovingObject("a", int(nodes[0]), int(nodes[1])),
                         MovingObject("b", int(nodes[2]), int(nodes[3]))))
        want = enumerate_objective(d, q).min()
        if math.isinf(want):
            continue
        exact = solve_exact(g, w, q)
        assert math.isclose(exact.objective, want, rel_tol=1e-9)
        for m in ("sp", "ch", "dp", "rt", "ed", "greedy"):
            try:
                assert solve(g, w, q, m).objective >= exact.objective
            except InfeasibleError:
                pass


def test_weighted_objects():
    g = from_segments([(0, 0), (0.001, 0), (0.002, 0)], [(1, 2, 10.0), (2, 3, 10.0)])
    w = distance_weights(g)
    q = MeetupQuery((MovingObject("a", 1, 1, w_out=3, w_back=3), MovingObject("b", 3, 3)))
    sol = solve_exact(g, w, q)
    assert (sol.node, sol.objective) == (1, 40.0)


def test_consistency_with_surface(dc_graph, dc_weights):
    rng = np.random.default_rng(32)
    nodes = rng.choice(dc_graph.n_nodes, 4, replace=False) + 1
    q = MeetupQuery((MovingObject("a", int(nodes[0]), int(nodes[1])),
                     MovingObject("b", int(nodes[2]), int(nodes[3]))))
    surface = {r.node: r.objective for r in cost_surface(dc_graph, dc_weights, q)}
    exact = solve_exact(dc_graph, dc_weights, q)
    assert exact.objective == min(surface.values())
    for m in ("sp", "ch", "dp", "rt", "ed"):
        sol = solve(dc_graph, dc_weights, q, m)
        cands = candidates_for(dc_graph, dc_weights, q, m).nodes
        if m == "dp" and sol.fell_back:
            cands = rt_candidates(dc_graph, q).nodes
        best = min((surface.get(n, math.inf), n) for n in cands)
        assert (sol.objective, sol.node) == best
    g = greedy_descent(dc_graph, dc_weights, q)
    near = knn_nodes(dc_graph, dc_graph.lonlat(g.node), 33)
    assert all(surface.get(n, math.inf) >= g.objective for n in near)


def test_repeated_runs_same_node(dc_graph, dc_weights):
    q = MeetupQuery((MovingObject("a", 10, 20), MovingObject("b", 3000, 4000)))
    first = [solve(dc_graph, dc_weights, q, m).node for m in ("exact", "sp", "dp", "greedy")]
    again = [solve(dc_graph, dc_weights, q, m).node for m in ("exact", "sp", "dp", "greedy")]
    assert first == again


def test_matrix_cache_identical(tmp_path):
    from meetup.matrix import all_pairs, load_or_build

    rng = np.random.default_rng(33)
    g = random_graph(rng, 60)
    w = distance_weights(g)
    m = load_or_build(w, tmp_path / "m.npy")
    assert np.array_equal(m, all_pairs(w))
    q = MeetupQuery((MovingObject("a", 1, 2), MovingObject("b", 3, 4)))
    try:
        plain = solve_exact(g, w, q)
    except InfeasibleError:
        with pytest.raises(InfeasibleError):
            solve_exact(g, w, q, matrix=m)
        return
    cached = solve_exact(g, w, q, matrix=m)
    assert (plain.node, plain.objective) == (cached.node, cached.objective)


def test_surface_square(sq, w_sq, q_sq):
    rows = cost_surface(sq, w_sq, q_sq)
    assert [r.node for r in rows] == [1, 2, 3, 4]
    assert all(r.objective == 4.0 for r in rows)


def test_surface_single_object_is_distance_field(sq, w_sq):
    q = MeetupQuery((MovingObject("A", 1),), FINAL_DESTINATION)
    rows = cost_surface(sq, w_sq, q)
    assert {r.node: r.objective for r in rows} == dijkstra(sq, w_sq, 1).dist


def test_surface_csv(sq, w_sq, q_sq):
    import io

    buf = io.StringIO()
    write_surface_csv(cost_surface(sq, w_sq, q_sq), buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "node_id,lon,lat,objective" and len(lines) == 5


def test_solution_dict(sq, w_sq, q_sq):
    d = solve_rt(sq, w_sq, q_sq).to_dict(sq)
    assert d["method"] == "rt" and d["node_id"] == 1 and d["lon"] == 0.0
    assert d["elapsed_s"] >= 0
