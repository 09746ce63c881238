"""Independent reference computations used as test oracles."""
from __future__ import annotations

import numpy as np

from meetup.road_graph import from_segments


def floyd_warshall(graph, costs) -> np.ndarray:
    """All-pairs costs by Floyd-Warshall; ``d[i - 1, j - 1]`` is i -> j."""
    n = graph.n_nodes
    d = np.full((n, n), np.inf)
    np.fill_diagonal(d, 0.0)
    for e in graph.edges:
        c = costs[e.id]
        if c < d[e.u - 1, e.v - 1]:
            d[e.u - 1, e.v - 1] = c
    for k in range(n):
        d = np.minimum(d, d[:, k:k + 1] + d[k:k + 1, :])
    return d


def enumerate_objective(d, query) -> np.ndarray:
    """Objective at every node from an all-pairs table (inf where some leg is missing)."""
    n = d.shape[0]
    total = np.zeros(n)
    for o in query.objects:
        total = total + o.w_out * d[o.origin - 1, :]
        if query.intermediate:
            total = total + o.w_back * d[:, o.destination - 1]
    return total


def random_graph(rng, n, extra=1.5, directed_share=0.3):
    """Connected-ish random geometric graph with positive float lengths."""
    coords = rng.uniform(0, 0.05, size=(n, 2))
    segs = []
    order = rng.permutation(n) + 1
    for i in range(1, n):
        a, b = int(order[i]), int(order[rng.integers(0, i)])
        segs.append((a, b, float(rng.uniform(1, 100))))
    for _ in range(int(extra * n)):
        a, b = (int(x) for x in rng.choice(n, 2, replace=False) + 1)
        segs.append((a, b, float(rng.uniform(1, 100))))
    edges = []
    for a, b, w in segs:
        edges.append((a, b, w))
        if rng.random() > directed_share:
            edges.append((b, a, float(w * rng.uniform(0.8, 1.25))))
    return from_segments([tuple(c) for c in coords], edges, directed=True)
