"""Acceptance criteria T1-T10, one PASS/FAIL line each.

The benchmark criteria (T3, T4, T9) share one seeded 1000-case run on the
benchmark-sized synthetic network; expect several minutes on a single core.
"""
import itertools
import math

import numpy as np
import pytest

from meetup.bench import (
    METHODS, TABLE_COLUMNS, dominance_violations, export_cdf, gen_cases, run_experiment, summarize,
)
from meetup.core import (
    InfeasibleError, LegCosts, MeetupQuery, MovingObject, candidates_for, rt_candidates, solve_dp,
    solve_exact, solve_rt, solve_sp,
)
from meetup.geometry import manhattan_median, manhattan_objective
from meetup.road_graph import RoadClass, knn_nodes
from meetup.shortest_path import astar, dijkstra, distance_weights, reconstruct_path
from meetup.traffic import (
    LEVEL_MULTIPLIER, MAX_SPEED_KMH, SPI_BANDS, TrafficScenario, base_time_weights, in_band,
    inject_delay, level_for_ratio, max_speed_for_class, multiplier_for_level, time_weights,
)
from meetup.poi import load_venues, rank_nearby

from instances import corridor_graph, grid_city
from oracles import enumerate_objective, floyd_warshall, random_graph
from verdicts import verdict

REL = 1e-9
BENCH_CASES = 1000
BENCH_SEED = 20170
HEURISTICS = ("sp", "ch", "dp", "rt", "ed", "greedy")
GREEDY_K = 32


def close(a, b, rel=REL):
    return abs(a - b) <= rel * max(1.0, abs(b))


# -- T1 ------------------------------------------------------------------------------


def test_t1_exact_matches_floyd_warshall():
    rng = np.random.default_rng(101)
    checked = bad = 0
    for g_i in range(24):
        g = random_graph(rng, int(rng.integers(8, 201)), directed_share=0.3)
        w = distance_weights(g)
        d = floyd_warshall(g, w.costs)
        for q_i in range(4):
            m = int(rng.integers(2, 5))
            mode = "intermediate" if q_i % 2 == 0 else "final_destination"
            ends = rng.choice(g.n_nodes, size=2 * m) + 1
            objs = tuple(MovingObject(f"o{i}", int(ends[2 * i]), int(ends[2 * i + 1]),
                                      float(rng.uniform(0.5, 2)), float(rng.uniform(0.5, 2)))
                         for i in range(m))
            q = MeetupQuery(objs, mode)
            best = float(enumerate_objective(d, q).min())
            try:
                got = solve_exact(g, w, q).objective
            except InfeasibleError:
                got = math.inf
            ok = got == best if math.isinf(best) else close(got, best)
            checked += 1
            bad += not ok
    verdict("T1", bad == 0 and checked >= 80,
            f"{checked - bad}/{checked} queries on 24 random graphs match the Floyd-Warshall oracle (rel {REL})")


# -- T2 ------------------------------------------------------------------------------


def grid_min(points, lo, hi):
    xs = np.arange(lo, hi + 1, dtype=float)
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    total = np.zeros_like(X)
    for x, y, w in points:
        total += w * (np.abs(X - x) + np.abs(Y - y))
    best = total.min()
    arg = np.argwhere(total == best)
    return float(best), [(xs[i], xs[j]) for i, j in arg]


def test_t2_manhattan_optimum():
    pts = [(10, 42, 1), (0, 0, 1), (45, 33, 1), (5, 20, 1)]
    rect = manhattan_median(pts)
    best, argmins = grid_min(pts, -10, 60)
    paper_ok = rect.contains((8, 20)) and close(rect.objective, best) and best == 105
    paper_ok &= all(rect.contains(p) for p in argmins)
    rng = np.random.default_rng(202)
    bad = 0
    for _ in range(500):
        n = int(rng.integers(1, 7))
        rp = [(int(rng.integers(0, 25)), int(rng.integers(0, 25)), int(rng.integers(1, 6))) for _ in range(n)]
        r = manhattan_median(rp)
        b, arg = grid_min(rp, 0, 24)
        ok = close(r.objective, b) and all(r.contains(p) for p in arg)
        ok &= all(close(manhattan_objective(rp, *c), b) for c in r.corners)
        bad += not ok
    verdict("T2", paper_ok and bad == 0,
            f"instance rect [{rect.x_lo:g},{rect.x_hi:g}]x[{rect.y_lo:g},{rect.y_hi:g}] objective "
            f"{rect.objective:g} (grid min {best:g}), {500 - bad}/500 random instances match the grid oracle")


# -- benchmark run shared by T3, T4 and T9 ------------------------------------------


@pytest.fixture(scope="module")
def bench(dc_graph, dc_weights):
    cases = gen_cases(dc_graph, BENCH_CASES, 2, BENCH_SEED)
    assert len(cases) == BENCH_CASES
    results = run_experiment(dc_graph, dc_weights, cases, METHODS, greedy_k=GREEDY_K)
    return cases, results


def test_t3_dominance_and_consistency(dc_graph, dc_weights, bench):
    cases, results = bench
    violations = dominance_violations(results)
    by_case = {}
    for r in results:
        by_case.setdefault(r.case_id, {})[r.method] = r
    all_nodes = np.arange(1, dc_graph.n_nodes + 1)
    inconsistent = []
    for cid, q in enumerate(cases):
        legs = LegCosts(dc_weights, q)
        legs.exhaust()
        surface = np.zeros(dc_graph.n_nodes)
        for to, back in legs.leg_arrays(all_nodes):
            surface += to + back
        rows = by_case[cid]
        for m in ("exact",) + HEURISTICS:
            r = rows[m]
            if m == "greedy":
                # Local-minimum certificate over the same spatial neighbourhood.
                hood = knn_nodes(dc_graph, dc_graph.lonlat(r.node), GREEDY_K + 1)
                ok = surface[r.node - 1] == r.objective and all(surface[n - 1] >= r.objective for n in hood)
            else:
                if m == "dp" and r.fell_back:
                    cands = rt_candidates(dc_graph, q).nodes
                else:
                    cands = candidates_for(dc_graph, dc_weights, q, m).nodes
                idx = np.array(sorted(cands))
                vals = surface[idx - 1]
                i = int(np.argmin(vals))
                ok = close(r.objective, float(vals[i])) and r.node == int(idx[i])
            if not ok:
                inconsistent.append((cid, m))
    verdict("T3", not violations and not inconsistent,
            f"{len(violations)} dominance violations, {len(inconsistent)} candidate-set inconsistencies "
            f"over {len(cases)} cases x {len(HEURISTICS)} heuristics")


def test_t4_table_shape(bench):
    s = summarize(bench[1])
    acc = {r.method: r.accuracy for r in s.rows}
    ok = acc["dp"] >= acc["ch"] and acc["rt"] >= acc["ch"]
    ok &= all(acc[m] >= 50.0 for m in ("sp", "ch", "dp", "rt", "ed"))
    ok &= tuple(s.header()[:4]) == TABLE_COLUMNS == (
        "Methods", "Number of found optimal cases", "Number of missed cases", "Accuracy")
    print(s.format())
    verdict("T4", ok, ", ".join(f"{m} {s[m].accuracy_label}" for m in ("sp", "ch", "dp", "rt", "ed", "greedy")))


# -- T5 ------------------------------------------------------------------------------


def test_t5_traffic_relocation():
    g = grid_city()
    q = MeetupQuery((MovingObject("1", 3, 23), MovingObject("2", 16, 10)), metric="time")
    free = time_weights(g)
    before = solve_exact(g, free, q)
    surface = sorted(LegCosts(free, q).objective(n) for n in g.nodes())
    unique = surface[1] > surface[0]
    path = reconstruct_path(dijkstra(g, free, 16, stop_set={10}), 10)
    jam_edge = 44
    on_path = jam_edge in {e.id for e in path}
    jammed = time_weights(g, inject_delay(TrafficScenario.free_flow(g), [jam_edge], 300.0))
    after = solve_exact(g, jammed, q)
    t5a = unique and on_path and after.objective > before.objective and after.node != before.node
    base = base_time_weights(g)
    t5b = all(a == b for a, b in zip(free.costs, base.costs))
    t5b &= solve_exact(g, base, q).objective == before.objective
    verdict("T5", t5a and t5b,
            f"free flow node {before.node} ({before.objective:.3f} s), 300 s on edge {jam_edge} "
            f"-> node {after.node} ({after.objective:.3f} s); free-flow equals base times: {t5b}")


# -- T6 ------------------------------------------------------------------------------


def test_t6_speed_and_level_tables():
    speeds = {
        "motorway": 80, "motorway_link": 45, "trunk": 80, "trunk_link": 40, "primary": 65,
        "primary_link": 30, "secondary": 55, "secondary_link": 25, "tertiary": 40,
        "tertiary_link": 20, "residential": 25, "living_street": 10, "service": 15,
    }
    ok = all(max_speed_for_class(RoadClass(k)) == v for k, v in speeds.items())
    ok &= {c.value: s for c, s in MAX_SPEED_KMH.items()} == speeds
    mults = {1: 0.25, 2: 0.50, 3: 0.75, 4: 1.00}
    ok &= all(multiplier_for_level(k) == v for k, v in mults.items()) and LEVEL_MULTIPLIER == mults
    bands = {1: (0.0, 0.25, True), 2: (0.25, 0.50, False), 3: (0.50, 0.75, False), 4: (0.75, 1.0, False)}
    ok &= SPI_BANDS == bands
    ok &= all(in_band(k, v) for k, v in mults.items())
    ok &= [level_for_ratio(r) for r in (0.0, 0.25, 0.2501, 0.5, 0.51, 0.75, 0.76, 1.0)] == [1, 1, 2, 2, 3, 3, 4, 4]
    verdict("T6", ok, "13 road-class speeds, 4 level multipliers and 4 index bands match exactly")


# -- T7 ------------------------------------------------------------------------------


def test_t7_astar_equivalence(dc_graph, dc_weights):
    rng = np.random.default_rng(707)
    pairs = [tuple(int(x) for x in rng.choice(dc_graph.n_nodes, 2, replace=False) + 1) for _ in range(200)]
    equal = smaller = 0
    for s, t in pairs:
        a = astar(dc_graph, dc_weights, s, t)
        d = dijkstra(dc_graph, dc_weights, s, stop_set={t})
        equal += a.cost == d.dist[t]
        smaller += len(a.settled) <= len(d.settled)
    verdict("T7", equal == 200 and smaller >= 190,
            f"costs equal in {equal}/200 pairs; A* settles no more nodes in {smaller}/200")


# -- T8 ------------------------------------------------------------------------------


def test_t8_sp_fallback():
    outcomes = []
    for length, gap, rung in itertools.product((6, 8, 12), (0.02, 0.05), (20_000.0, 50_000.0)):
        g = corridor_graph(length, gap, rung)
        w = distance_weights(g)
        q = MeetupQuery((MovingObject("a", 2, length - 1), MovingObject("b", length + 2, 2 * length - 1)))
        sp, rt = solve_sp(g, w, q), solve_rt(g, w, q)
        outcomes.append(sp.fell_back and (sp.node, sp.objective, sp.per_object) == (rt.node, rt.objective, rt.per_object))
    verdict("T8", all(outcomes), f"{sum(outcomes)}/{len(outcomes)} disjoint-corridor instances fall back to rt")


# -- T9 ------------------------------------------------------------------------------


def test_t9_reproducibility_and_cdf(dc_graph, dc_weights, bench):
    cases, results = bench
    # A rerun of the full benchmark only repeats the timing; a 100-case seeded
    # subset exercises generation and accuracy reproducibility end to end.
    reruns = []
    for _ in range(2):
        sub = gen_cases(dc_graph, 100, 2, BENCH_SEED)
        reruns.append(summarize(run_experiment(dc_graph, dc_weights, sub, METHODS, warmup=False)).accuracy_table())
    same = reruns[0] == reruns[1] and gen_cases(dc_graph, 100, 2, BENCH_SEED) == cases[:100]
    monotone = True
    for m in METHODS:
        cdf = export_cdf(results, m)
        ts, fs = zip(*cdf)
        monotone &= all(a <= b for a, b in zip(ts, ts[1:])) and all(a < b for a, b in zip(fs, fs[1:]))
        monotone &= fs[-1] == 1.0
    s = summarize(results)
    faster = {m: s[m].median_s < s["exact"].median_s for m in HEURISTICS}
    medians = ", ".join(f"{m} {1e3 * s[m].median_s:.1f}" for m in ("exact",) + HEURISTICS)
    verdict("T9", same and monotone and all(faster.values()),
            f"reproducible: {same}; CDFs monotone ending at 1.0: {monotone}; median ms {medians}")


# -- T10 -----------------------------------------------------------------------------


def test_t10_poi_lists(request):
    venues = load_venues(request.path.parent / "fixtures" / "dc_pois.csv")
    p1, p2 = (-77.0365, 38.8977), (-77.0110, 38.8899)
    a, b = rank_nearby(venues, p1, 10), rank_nearby(venues, p2, 10)
    shared = {r.venue.id for r in a} & {r.venue.id for r in b}
    nondecreasing = all(x.distance_m <= y.distance_m for lst in (a, b) for x, y in zip(lst, lst[1:]))
    verdict("T10", len(venues) == 18 and len(a) == len(b) == 10 and len(shared) == 2 and nondecreasing,
            f"{len(venues)} venues; lists share {sorted(shared)}; nondecreasing: {nondecreasing}")
