"""Optional all-pairs cost cache.

Rows are filled by one full Dijkstra run per source, the same code path the
on-the-fly solvers use, so cached and uncached answers are identical.
"""
from __future__ import annotations

import logging
from pathlib import Path

import numpy as np

from .shortest_path import FORWARD, Search, WeightView

log = logging.getLogger(__name__)

MAX_MATRIX_NODES = 20_000


def all_pairs(weights: WeightView) -> np.ndarray:
    """``m[i - 1, j - 1]`` is the cost from node i to node j (inf when unreachable)."""
    n = weights.graph.n_nodes
    if n > MAX_MATRIX_NODES:
        raise ValueError(f"all-pairs cache is limited to {MAX_MATRIX_NODES} nodes, graph has {n}")
    m = np.empty((n, n))
    idx = np.arange(1, n + 1)
    for src in range(1, n + 1):
        s = Search(weights, src, FORWARD)
        s.run()
        m[src - 1] = s.costs_at(idx)
    return m


def load_or_build(weights: WeightView, path) -> np.ndarray:
    """Load the cache at ``path`` if its shape fits the graph, else build and save it."""
    path = Path(path)
    n = weights.graph.n_nodes
    if path.exists():
        m = np.load(path, allow_pickle=False)
        if m.shape == (n, n):
            return m
        log.warning("cache %s has shape %s, expected %s; rebuilding", path, m.shape, (n, n))
    m = all_pairs(weights)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        np.save(fh, m, allow_pickle=False)
    return m
