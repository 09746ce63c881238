"""Dijkstra (binary heap) and A* over a weight view of a road graph.

The "search space" of a run is its settled set: nodes popped from the heap,
in settlement order. Runs may stop early once a given set of nodes has been
settled; distances of settled nodes are identical to those of an unrestricted
run because the truncated run performs the same steps up to the stop point.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .road_graph import Edge, RoadGraph, haversine_m

FORWARD = "forward"
REVERSE = "reverse"


class NoPathError(LookupError):
    """The requested target was not settled by the search."""


class WeightView:
    """Per-edge costs for one metric over one graph.

    ``costs[e.id]`` is the cost of edge ``e``. Costs must be finite and
    strictly positive. Adjacency lists with costs inlined are built lazily
    and cached, since Dijkstra's inner loop reads them directly.
    """

    def __init__(self, graph: RoadGraph, metric: str, costs: Sequence[float]):
        if metric not in ("distance", "time"):
            raise ValueError(f"metric must be 'distance' or 'time', got {metric!r}")
        costs = [float(c) for c in costs]
        if len(costs) != graph.n_edges:
            raise ValueError(f"expected {graph.n_edges} costs, got {len(costs)}")
        for i, c in enumerate(costs):
            if not (c > 0 and math.isfinite(c)):
                raise ValueError(f"edge {i} has invalid cost {c}")
        self.graph = graph
        self.metric = metric
        self.costs = costs
        self._fwd = None
        self._rev = None

    def weight_of(self, edge: Edge) -> float:
        return self.costs[edge.id]

    def adjacency(self, direction: str = FORWARD):
        """``adj[u]`` = list of ``(neighbour, cost, edge_id)``."""
        if direction == FORWARD:
            if self._fwd is None:
                self._fwd = self._build(self.graph.out_adj, lambda e: e.v)
            return self._fwd
        if direction == REVERSE:
            if self._rev is None:
                self._rev = self._build(self.graph.in_adj, lambda e: e.u)
            return self._rev
        raise ValueError(f"direction must be 'forward' or 'reverse', got {direction!r}")

    def _build(self, lists, head):
        edges, costs = self.graph.edges, self.costs
        return [[(head(edges[i]), costs[i], i) for i in ids] for ids in lists]

    @property
    def heuristic_scale(self) -> float:
        """Largest factor ``s`` with ``cost(e) >= s * greatcircle(u, v)`` for every edge.

        ``s * greatcircle(node, target)`` is then a consistent A* heuristic: for
        the time metric ``1 / s`` is the fastest effective speed on the graph.
        """
        if not hasattr(self, "_scale"):
            g = self.graph
            if g.n_edges == 0:
                self._scale = 0.0
            else:
                u = np.fromiter((e.u for e in g.edges), dtype=int, count=g.n_edges) - 1
                v = np.fromiter((e.v for e in g.edges), dtype=int, count=g.n_edges) - 1
                gc = haversine_m(g.coords[u, 0], g.coords[u, 1], g.coords[v, 0], g.coords[v, 1])
                c = np.asarray(self.costs)
                pos = gc > 0
                scale = float(np.min(c[pos] / gc[pos])) if pos.any() else 0.0
                # Margin for haversine rounding so the bound stays admissible.
                self._scale = scale * (1.0 - 1e-9)
        return self._scale

    @property
    def symmetric(self) -> bool:
        """True when every u -> v has a v -> u of the same least cost.

        Forward and reverse Dijkstra runs from one source then settle the
        same nodes in the same order with bit-identical costs, since the heap
        orders by (cost, node id).
        """
        if not hasattr(self, "_symmetric"):
            best: dict[tuple[int, int], float] = {}
            for e in self.graph.edges:
                key = (e.u, e.v)
                c = self.costs[e.id]
                if c < best.get(key, math.inf):
                    best[key] = c
            self._symmetric = all(best.get((v, u)) == c for (u, v), c in best.items())
        return self._symmetric

    def __repr__(self):
        return f"WeightView(metric={self.metric!r}, edges={len(self.costs)})"


def distance_weights(graph: RoadGraph) -> WeightView:
    return WeightView(graph, "distance", [e.length for e in graph.edges])


@dataclass
class SearchResult:
    """Outcome of a Dijkstra run.

    ``dist`` holds exact costs for settled nodes only. For a reverse run,
    ``dist[u]`` is the cost from ``u`` to ``source`` and ``parent[u]`` is the
    first edge on that path.
    """

    source: int
    direction: str
    dist: dict[int, float]
    parent_edge: dict[int, int]
    settled: list[int]
    graph: RoadGraph = field(repr=False)

    @property
    def parent(self) -> dict[int, Edge]:
        edges = self.graph.edges
        return {n: edges[e] for n, e in self.parent_edge.items()}

    @property
    def settled_edges(self) -> set[int]:
        """Edge ids in the search space: parent edges of settled nodes."""
        return set(self.parent_edge.values())


class Search:
    """Resumable Dijkstra run.

    Nodes are settled on demand, so several callers can ask for distances
    to different nodes without restarting the search. Heap entries are
    ``(cost, node)``, so equal costs pop in node-id order.
    """

    def __init__(self, weights: WeightView, source: int, direction: str = FORWARD):
        graph = weights.graph
        n = graph.n_nodes
        if not 1 <= source <= n:
            raise KeyError(f"source node {source} not in graph")
        self.weights = weights
        self.source = source
        self.direction = direction
        self._adj = weights.adjacency(direction)
        self._best = [math.inf] * (n + 1)
        self._best[source] = 0.0
        self._done = bytearray(n + 1)
        self._via = [-1] * (n + 1)
        self.settled: list[int] = []
        self._heap = [(0.0, source)]

    @property
    def exhausted(self) -> bool:
        return not self._heap

    def run(self, stop: Iterable[int] | None = None) -> None:
        """Settle nodes until every reachable member of ``stop`` is settled.

        With ``stop=None`` the run continues until the heap is empty.
        """
        done, best, via, settled = self._done, self._best, self._via, self.settled
        heap, adj = self._heap, self._adj
        pop, push = heapq.heappop, heapq.heappush
        if stop is None:
            remaining = -1
            targets = ()
        else:
            targets = {t for t in stop if not done[t]}
            remaining = len(targets)
            if remaining == 0:
                return
        while heap:
            d, u = pop(heap)
            if done[u]:
                continue
            done[u] = 1
            settled.append(u)
            # A settled v already has best[v] <= d < d + w, so no extra check is needed.
            for v, w, eid in adj[u]:
                nd = d + w
                if nd < best[v]:
                    best[v] = nd
                    via[v] = eid
                    push(heap, (nd, v))
            # Relax before stopping so a later run() resumes correctly.
            if remaining > 0 and u in targets:
                remaining -= 1
                if remaining == 0:
                    break

    def is_settled(self, node: int) -> bool:
        return bool(self._done[node])

    def distance(self, node: int) -> float:
        """Exact cost to ``node``, settling more of the graph if needed; inf if unreachable."""
        if not self._done[node]:
            self.run((node,))
        return self._best[node] if self._done[node] else math.inf

    def costs_at(self, nodes) -> np.ndarray:
        """Settled costs for ``nodes`` (no further settling); inf where unsettled."""
        idx = np.asarray(nodes, dtype=int)
        done = np.frombuffer(self._done, dtype=np.uint8)[idx].astype(bool)
        best = np.asarray(self._best)[idx]
        return np.where(done, best, math.inf)

    @property
    def dist(self) -> dict[int, float]:
        best = self._best
        return {u: best[u] for u in self.settled}

    @property
    def parent_edge(self) -> dict[int, int]:
        via = self._via
        return {u: via[u] for u in self.settled if u != self.source}

    def result(self) -> SearchResult:
        return SearchResult(
            self.source, self.direction, self.dist, self.parent_edge,
            list(self.settled), self.weights.graph,
        )


def dijkstra(
    graph: RoadGraph,
    weights: WeightView,
    source: int,
    direction: str = FORWARD,
    stop_set: Iterable[int] | None = None,
) -> SearchResult:
    """Shortest costs from ``source`` (forward) or to ``source`` (reverse).

    If ``stop_set`` is given the run ends once all of its reachable members
    are settled.
    """
    if weights.graph is not graph:
        raise ValueError("weight view belongs to a different graph")
    if stop_set is not None:
        stop_set = set(stop_set)
        bad = [s for s in stop_set if not 1 <= s <= graph.n_nodes]
        if bad:
            raise KeyError(f"stop_set contains unknown nodes {sorted(bad)[:5]}")
    search = Search(weights, source, direction)
    search.run(stop_set)
    return search.result()


def reconstruct_path(result: SearchResult, target: int) -> list[Edge]:
    """Edges from the source to ``target`` (forward) or from ``target`` to the source (reverse)."""
    if target not in result.dist:
        raise NoPathError(f"node {target} was not settled from {result.source}")
    edges = result.graph.edges
    path = []
    node = target
    while node != result.source:
        e = edges[result.parent_edge[node]]
        path.append(e)
        node = e.u if result.direction == FORWARD else e.v
    if result.direction == FORWARD:
        path.reverse()
    return path


@dataclass
class AStarResult:
    cost: float
    path: list[Edge] | None
    settled: set[int]

    @property
    def reachable(self) -> bool:
        return self.path is not None


def astar(graph: RoadGraph, weights: WeightView, source: int, target: int) -> AStarResult:
    """A* with a great-circle lower bound scaled by ``weights.heuristic_scale``.

    An unreachable target gives ``cost=inf`` and ``path=None``.
    """
    n = graph.n_nodes
    if not 1 <= source <= n:
        raise KeyError(f"source node {source} not in graph")
    if not 1 <= target <= n:
        raise KeyError(f"target node {target} not in graph")
    if source == target:
        return AStarResult(0.0, [], {source})

    lon, lat = graph.lonlat(target)
    h = (graph.distances_from((lon, lat)) * weights.heuristic_scale).tolist()
    h.insert(0, 0.0)
    adj = weights.adjacency(FORWARD)
    g = {source: 0.0}
    via: dict[int, int] = {}
    closed: set[int] = set()
    heap = [(h[source], 0.0, source)]
    pop, push = heapq.heappop, heapq.heappush
    while heap:
        _, d, u = pop(heap)
        if u in closed or d > g[u]:
            continue
        closed.add(u)
        if u == target:
            edges = graph.edges
            path = []
            node = target
            while node != source:
                e = edges[via[node]]
                path.append(e)
                node = e.u
            path.reverse()
            return AStarResult(d, path, closed)
        for v, w, eid in adj[u]:
            nd = d + w
            if nd < g.get(v, math.inf):
                # Reopening keeps the result exact if rounding breaks consistency.
                closed.discard(v)
                g[v] = nd
                via[v] = eid
                push(heap, (nd + h[v], nd, v))
    return AStarResult(math.inf, None, closed)
