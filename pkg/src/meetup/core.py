"""Meetup location queries on a road network.

The objective for a candidate node ``j`` is

    sum_i  w_out_i * cost(origin_i -> j) + w_back_i * cost(j -> destination_i)

in intermediate mode, and only the first term in final-destination mode.
The exact solver evaluates every node; each heuristic restricts evaluation
to a smaller candidate set and so can only report an objective at least as
large as the exact one.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .geometry import Degenerate, convex_hull, hull_diameter, points_in_convex_polygon, weiszfeld
from .road_graph import Rect, RoadGraph, knn_nodes, nodes_in_rect, snap_to_node
from .shortest_path import FORWARD, REVERSE, Search, WeightView

INTERMEDIATE = "intermediate"
FINAL_DESTINATION = "final_destination"

METHODS = ("exact", "sp", "ch", "dp", "rt", "ed", "greedy")


class InfeasibleError(RuntimeError):
    """No candidate node is reachable by every object."""

    def __init__(self, message: str, fell_back: bool = False):
        super().__init__(message)
        self.fell_back = fell_back


@dataclass(frozen=True)
class MovingObject:
    id: str
    origin: int
    destination: int | None = None
    w_out: float = 1.0
    w_back: float = 1.0

    def __post_init__(self):
        if self.w_out < 0 or self.w_back < 0:
            raise ValueError(f"object {self.id}: weights must be nonnegative")


@dataclass(frozen=True)
class MeetupQuery:
    objects: tuple[MovingObject, ...]
    mode: str = INTERMEDIATE
    metric: str = "distance"

    def __post_init__(self):
        object.__setattr__(self, "objects", tuple(self.objects))
        if not self.objects:
            raise ValueError("a query needs at least one moving object")
        if self.mode not in (INTERMEDIATE, FINAL_DESTINATION):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.metric not in ("distance", "time"):
            raise ValueError(f"unknown metric {self.metric!r}")
        if self.mode == INTERMEDIATE:
            missing = [o.id for o in self.objects if o.destination is None]
            if missing:
                raise ValueError(f"intermediate mode needs destinations for {missing}")

    @property
    def intermediate(self) -> bool:
        return self.mode == INTERMEDIATE

    def endpoints(self) -> list[int]:
        """Origins followed by destinations (intermediate mode), in object order."""
        pts = [o.origin for o in self.objects]
        if self.intermediate:
            pts += [o.destination for o in self.objects]
        return pts

    def validate_for(self, graph: RoadGraph) -> None:
        for n in self.endpoints():
            if not 1 <= n <= graph.n_nodes:
                raise ValueError(f"query node {n} not in graph")


@dataclass(frozen=True)
class CandidateSet:
    nodes: frozenset[int]
    strategy: str
    fell_back: bool = False

    def __len__(self):
        return len(self.nodes)


@dataclass
class MeetupSolution:
    node: int
    objective: float
    per_object: list[tuple[float, float]]
    candidate_count: int
    method: str
    elapsed: float = 0.0
    fell_back: bool = False

    def to_dict(self, graph: RoadGraph | None = None) -> dict:
        d = {
            "node_id": self.node,
            "objective": self.objective,
            "per_object": [{"to_cost": a, "from_cost": b} for a, b in self.per_object],
            "candidate_count": self.candidate_count,
            "method": self.method,
            "elapsed_s": self.elapsed,
            "fell_back": self.fell_back,
        }
        if graph is not None:
            d["lon"], d["lat"] = graph.lonlat(self.node)
            d["node_label"] = graph.node_labels[self.node - 1]
        return d


def _objective(query: MeetupQuery, legs: Sequence[tuple[float, float]]) -> float:
    # The single place the objective is summed, so every path agrees bit for bit.
    total = 0.0
    if query.intermediate:
        for o, (to, back) in zip(query.objects, legs):
            total += o.w_out * to + o.w_back * back
    else:
        for o, (to, _) in zip(query.objects, legs):
            total += o.w_out * to
    return total


class LegCosts:
    """Lazy per-object leg costs backed by resumable Dijkstra runs.

    ``matrix`` (optional) is a precomputed all-pairs cost table that replaces
    the searches; values are identical because it is filled by the same runs.
    """

    def __init__(self, weights: WeightView, query: MeetupQuery, matrix=None,
                 forward: dict[int, Search] | None = None,
                 reverse: dict[int, Search] | None = None):
        self.query = query
        self.matrix = matrix
        if matrix is None:
            # Searches already started from an endpoint are resumed, not repeated.
            forward = dict(forward or {})
            reverse = dict(reverse or {})
            self.out = []
            self.back = []
            for o in query.objects:
                if o.origin not in forward:
                    forward[o.origin] = Search(weights, o.origin, FORWARD)
                self.out.append(forward[o.origin])
                if not query.intermediate:
                    self.back.append(None)
                    continue
                if o.destination not in reverse:
                    reverse[o.destination] = Search(weights, o.destination, REVERSE)
                self.back.append(reverse[o.destination])

    def prefetch(self, nodes: Iterable[int]) -> None:
        if self.matrix is not None:
            return
        nodes = set(nodes)
        for s in {id(s): s for s in self.out + self.back if s is not None}.values():
            s.run(nodes)

    def exhaust(self) -> None:
        if self.matrix is None:
            for s in {id(s): s for s in self.out + self.back if s is not None}.values():
                s.run()

    def legs(self, node: int) -> list[tuple[float, float]] | None:
        """Leg costs at ``node``, or None if some object cannot use it."""
        out = []
        m = self.matrix
        for i, o in enumerate(self.query.objects):
            if m is None:
                to = self.out[i].distance(node)
                back = self.back[i].distance(node) if self.query.intermediate else 0.0
            else:
                to = float(m[o.origin - 1, node - 1])
                back = float(m[node - 1, o.destination - 1]) if self.query.intermediate else 0.0
            if math.isinf(to) or math.isinf(back):
                return None
            out.append((to, back))
        return out

    def objective(self, node: int) -> float:
        legs = self.legs(node)
        return math.inf if legs is None else _objective(self.query, legs)

    def leg_arrays(self, nodes: Sequence[int]) -> list[tuple[np.ndarray, np.ndarray]]:
        """Per object, arrays of (to, back) costs over ``nodes``; inf where unreachable."""
        q = self.query
        idx = np.asarray(nodes, dtype=int)
        zeros = np.zeros(len(idx))
        out = []
        for i, o in enumerate(q.objects):
            if self.matrix is None:
                to = self.out[i].costs_at(idx)
                back = self.back[i].costs_at(idx) if q.intermediate else zeros
            else:
                to = np.asarray(self.matrix[o.origin - 1, idx - 1], dtype=float)
                back = np.asarray(self.matrix[idx - 1, o.destination - 1], dtype=float) \
                    if q.intermediate else zeros
            out.append((to, back))
        return out


def _objective_array(query: MeetupQuery, arrays) -> np.ndarray:
    # Elementwise mirror of _objective: same operations in the same order.
    total = np.zeros(len(arrays[0][0]))
    if query.intermediate:
        for o, (to, back) in zip(query.objects, arrays):
            total = total + (o.w_out * to + o.w_back * back)
    else:
        for o, (to, _) in zip(query.objects, arrays):
            total = total + o.w_out * to
    reachable = np.ones(len(total), dtype=bool)
    for to, back in arrays:
        reachable &= np.isfinite(to) & np.isfinite(back)
    return np.where(reachable, total, math.inf)


def evaluate_candidates(
    graph: RoadGraph,
    weights: WeightView,
    query: MeetupQuery,
    candidates: CandidateSet,
    matrix=None,
    _forward: dict[int, Search] | None = None,
    _reverse: dict[int, Search] | None = None,
) -> MeetupSolution:
    """Best candidate by objective; ties go to the lowest node id.

    ``_forward``/``_reverse`` map origins/destinations to searches that may be resumed.
    """
    if not candidates.nodes:
        raise ValueError("empty candidate set")
    _check(graph, weights, query)
    legs = LegCosts(weights, query, matrix, _forward, _reverse)
    legs.prefetch(candidates.nodes)
    nodes = sorted(candidates.nodes)
    values = _objective_array(query, legs.leg_arrays(nodes))
    i = int(np.argmin(values))  # first minimum = lowest node id
    if math.isinf(values[i]):
        raise InfeasibleError(
            f"none of {len(candidates)} {candidates.strategy} candidates is reachable by every object",
            candidates.fell_back,
        )
    node = nodes[i]
    per_object = legs.legs(node)
    objective = _objective(query, per_object)
    return MeetupSolution(node, objective, per_object, len(candidates), candidates.strategy,
                          fell_back=candidates.fell_back)


def _check(graph: RoadGraph, weights: WeightView, query: MeetupQuery) -> None:
    if weights.graph is not graph:
        raise ValueError("weight view belongs to a different graph")
    query.validate_for(graph)


def _timed(fn):
    def wrapper(*args, **kwargs):
        t0 = time.perf_counter()
        sol = fn(*args, **kwargs)
        sol.elapsed = time.perf_counter() - t0
        return sol

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    wrapper.__wrapped__ = fn
    return wrapper


# -- candidate generators ------------------------------------------------------------


def all_candidates(graph: RoadGraph) -> CandidateSet:
    return CandidateSet(frozenset(graph.nodes()), "all")


def rt_candidates(graph: RoadGraph, query: MeetupQuery) -> CandidateSet:
    ends = query.endpoints()
    rect = Rect.bounding(graph.lonlat(n) for n in ends)
    return CandidateSet(frozenset(nodes_in_rect(graph, rect) | set(ends)), "rt")


def _sp_spaces(graph, weights, query) -> tuple[CandidateSet, dict[int, Search]]:
    if not query.intermediate:
        raise ValueError("the sp strategy needs origin-destination trips (intermediate mode)")
    searches: dict[int, Search] = {}
    common = None
    for o in query.objects:
        s = searches.get(o.origin) or Search(weights, o.origin, FORWARD)
        searches[o.origin] = s
        s.run((o.destination,))
        # Copy: the search may be resumed later and its settled set will grow.
        space = set(s.settled)
        common = space if common is None else common & space
    if common:
        return CandidateSet(frozenset(common), "sp"), searches
    return CandidateSet(rt_candidates(graph, query).nodes, "sp", fell_back=True), searches


def sp_candidates(graph: RoadGraph, weights: WeightView, query: MeetupQuery) -> CandidateSet:
    return _sp_spaces(graph, weights, query)[0]


def ch_candidates(graph: RoadGraph, query: MeetupQuery) -> CandidateSet:
    ends = sorted(set(query.endpoints()))
    xy = graph.planar(ends)
    hull = convex_hull([tuple(p) for p in xy])
    if isinstance(hull, Degenerate):
        return CandidateSet(rt_candidates(graph, query).nodes, "ch", fell_back=True)
    # The hull lies inside the endpoints' bounding box, so filter that first.
    box = sorted(rt_candidates(graph, query).nodes)
    pxy = graph.planar(box)
    mask = points_in_convex_polygon(pxy[:, 0], pxy[:, 1], hull)
    nodes = {n for n, m in zip(box, mask) if m} | set(ends)
    return CandidateSet(frozenset(nodes), "ch")


def diameter_nodes(graph: RoadGraph, query: MeetupQuery) -> tuple[int, int]:
    """Endpoint nodes farthest apart in the plane (lowest ids on coincident coordinates)."""
    ends = sorted(set(query.endpoints()))
    xy = graph.planar(ends)
    at: dict[tuple[float, float], int] = {}
    for n, p in zip(ends, xy):
        at.setdefault((float(p[0]), float(p[1])), n)
    if len(at) == 1:
        n = next(iter(at.values()))
        return n, n
    hull = convex_hull(list(at))
    verts = list(hull.points) if isinstance(hull, Degenerate) else hull
    p, q, _ = hull_diameter(verts)
    return at[p], at[q]


def _dp_spaces(graph, weights, query):
    p, q = diameter_nodes(graph, query)
    if p == q:
        return CandidateSet(frozenset({p}), "dp"), {}, {}
    origins = {o.origin for o in query.objects}
    dests = {o.destination for o in query.objects} if query.intermediate else set()
    fwd: dict[int, Search] = {}
    rev: dict[int, Search] = {}

    def path_space(a, b):
        # Settled set of the forward a -> b run. On a symmetric view the
        # reverse run from a settles the same sequence, so a destination's
        # leg search can be grown instead and later resumed by the evaluation.
        if a not in origins and a in dests and weights.symmetric:
            s = rev.setdefault(a, Search(weights, a, REVERSE))
        else:
            s = fwd.setdefault(a, Search(weights, a, FORWARD))
        s.run((b,))
        return frozenset(s.settled)

    space = path_space(p, q) | path_space(q, p)
    return CandidateSet(space, "dp"), fwd, rev


def dp_candidates(graph: RoadGraph, weights: WeightView, query: MeetupQuery) -> CandidateSet:
    """Union of the search spaces of the shortest paths p -> q and q -> p between the diameter ends."""
    return _dp_spaces(graph, weights, query)[0]


def euclidean_seed(graph: RoadGraph, query: MeetupQuery) -> tuple[float, float]:
    """Unweighted geometric median of all endpoints, as (lon, lat)."""
    xy = graph.planar(query.endpoints())
    x, y = weiszfeld([(float(a), float(b)) for a, b in xy])
    lon, lat = graph.projection.inverse(x, y)
    return float(lon), float(lat)


def default_ed_k(graph: RoadGraph) -> int:
    return min(max(1, math.ceil(graph.n_nodes / 10)), graph.n_nodes)


def ed_candidates(graph: RoadGraph, query: MeetupQuery, k: int | None = None) -> CandidateSet:
    if k is None:
        k = default_ed_k(graph)
    k = min(max(1, k), graph.n_nodes)
    return CandidateSet(frozenset(knn_nodes(graph, euclidean_seed(graph, query), k)), "ed")


# -- solvers -------------------------------------------------------------------------


@_timed
def solve_exact(graph, weights, query, matrix=None) -> MeetupSolution:
    """Global optimum over all network nodes."""
    _check(graph, weights, query)
    sol = evaluate_candidates(graph, weights, query, all_candidates(graph), matrix)
    sol.method = "exact"
    return sol


@_timed
def solve_rt(graph, weights, query, matrix=None) -> MeetupSolution:
    """Candidates: nodes inside the bounding box of all origins and destinations."""
    _check(graph, weights, query)
    return evaluate_candidates(graph, weights, query, rt_candidates(graph, query), matrix)


@_timed
def solve_sp(graph, weights, query, matrix=None) -> MeetupSolution:
    """Candidates: nodes common to every object's origin-to-destination search space.

    Falls back to the bounding-box candidates when the search spaces are disjoint.
    """
    _check(graph, weights, query)
    cands, searches = _sp_spaces(graph, weights, query)
    return evaluate_candidates(graph, weights, query, cands, matrix, searches)


@_timed
def solve_ch(graph, weights, query, matrix=None) -> MeetupSolution:
    """Candidates: nodes inside or on the convex hull of all endpoints."""
    _check(graph, weights, query)
    return evaluate_candidates(graph, weights, query, ch_candidates(graph, query), matrix)


@_timed
def solve_dp(graph, weights, query, matrix=None) -> MeetupSolution:
    """Candidates: union of both search spaces between the two diameter endpoints."""
    _check(graph, weights, query)
    cands, fwd, rev = _dp_spaces(graph, weights, query)
    try:
        return evaluate_candidates(graph, weights, query, cands, matrix, fwd, rev)
    except InfeasibleError:
        rt = CandidateSet(rt_candidates(graph, query).nodes, "dp", fell_back=True)
        return evaluate_candidates(graph, weights, query, rt, matrix)


@_timed
def solve_ed(graph, weights, query, k: int | None = None, matrix=None) -> MeetupSolution:
    """Candidates: the ``k`` nodes nearest the Euclidean geometric median (default |V|/10)."""
    _check(graph, weights, query)
    return evaluate_candidates(graph, weights, query, ed_candidates(graph, query, k), matrix)


@_timed
def greedy_descent(
    graph, weights, query, start: int | None = None, neighborhood_k: int = 32, matrix=None,
) -> MeetupSolution:
    """Local search over spatial neighbours.

    From ``start`` (default: node nearest the Euclidean median), move to the
    best of the ``neighborhood_k`` nearest nodes while it strictly improves the
    objective. The result is a local minimum only.
    """
    _check(graph, weights, query)
    if neighborhood_k < 1:
        raise ValueError("neighborhood_k must be >= 1")
    if start is None:
        start = snap_to_node(graph, euclidean_seed(graph, query))
    legs = LegCosts(weights, query, matrix)
    seen: dict[int, float] = {}

    def value(n):
        if n not in seen:
            seen[n] = legs.objective(n)
        return seen[n]

    k = min(neighborhood_k + 1, graph.n_nodes)
    current = start
    while True:
        here = value(current)
        better = [(value(n), n) for n in knn_nodes(graph, graph.lonlat(current), k)
                  if n != current and value(n) < here]
        if not better:
            break
        _, current = min(better)
    if math.isinf(seen[current]):
        raise InfeasibleError("greedy descent found no node reachable by every object")
    return MeetupSolution(current, seen[current], legs.legs(current), len(seen), "greedy")


SOLVERS: dict[str, Callable[..., MeetupSolution]] = {
    "exact": solve_exact,
    "sp": solve_sp,
    "ch": solve_ch,
    "dp": solve_dp,
    "rt": solve_rt,
    "ed": solve_ed,
    "greedy": greedy_descent,
}


def solve(graph, weights, query, method: str = "exact", matrix=None, ed_k=None, greedy_k=None) -> MeetupSolution:
    if method not in SOLVERS:
        raise ValueError(f"unknown method {method!r}; choose from {', '.join(METHODS)}")
    kwargs = {"matrix": matrix}
    if method == "ed" and ed_k is not None:
        kwargs["k"] = ed_k
    if method == "greedy" and greedy_k is not None:
        kwargs["neighborhood_k"] = greedy_k
    return SOLVERS[method](graph, weights, query, **kwargs)


def candidates_for(graph, weights, query, method: str, ed_k=None) -> CandidateSet:
    """The candidate set a strategy would evaluate (not defined for greedy)."""
    if method == "exact":
        return all_candidates(graph)
    if method == "sp":
        return sp_candidates(graph, weights, query)
    if method == "ch":
        return ch_candidates(graph, query)
    if method == "dp":
        return dp_candidates(graph, weights, query)
    if method == "rt":
        return rt_candidates(graph, query)
    if method == "ed":
        return ed_candidates(graph, query, ed_k)
    raise ValueError(f"no fixed candidate set for method {method!r}")


# -- cost surface --------------------------------------------------------------------


@dataclass(frozen=True)
class SurfaceRow:
    node: int
    lon: float
    lat: float
    objective: float


def cost_surface(graph, weights, query, matrix=None) -> list[SurfaceRow]:
    """Objective at every node reachable by all objects, in node order."""
    _check(graph, weights, query)
    legs = LegCosts(weights, query, matrix)
    legs.exhaust()
    rows = []
    for n in graph.nodes():
        v = legs.objective(n)
        if not math.isinf(v):
            lon, lat = graph.lonlat(n)
            rows.append(SurfaceRow(n, lon, lat, v))
    return rows


def write_surface_csv(rows: Iterable[SurfaceRow], fh) -> None:
    fh.write("node_id,lon,lat,objective\n")
    for r in rows:
        fh.write(f"{r.node},{r.lon!r},{r.lat!r},{r.objective!r}\n")
