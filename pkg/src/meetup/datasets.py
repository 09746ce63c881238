"""Seeded synthetic road networks.

``synthetic_city`` builds a jittered street grid with a hierarchy of road
classes, sized by default like the Washington D.C. DIMACS benchmark graph
(9,559 intersections, 14,909 two-way segments). Every segment length is an
integer number of metres no shorter than the great-circle distance between
its endpoints, so the graph round-trips through DIMACS files unchanged.
"""
from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .road_graph import RoadClass, RoadGraph, from_segments, haversine_m, write_csv, write_dimacs

DC_NODES = 9559
DC_SEGMENTS = 14909


def _line_class(k: int, size: int) -> RoadClass:
    if k == size // 2:
        return RoadClass.MOTORWAY
    if k == (4 * size) // 5:
        return RoadClass.TRUNK
    if k % 16 == 0:
        return RoadClass.PRIMARY
    if k % 8 == 0:
        return RoadClass.SECONDARY
    if k % 4 == 0:
        return RoadClass.TERTIARY
    return RoadClass.RESIDENTIAL


_RANK = [RoadClass.MOTORWAY, RoadClass.TRUNK, RoadClass.PRIMARY, RoadClass.SECONDARY,
         RoadClass.TERTIARY, RoadClass.RESIDENTIAL]


class _DisjointSet:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, a):
        p = self.parent
        while p[a] != a:
            p[a] = p[p[a]]
            a = p[a]
        return a

    def union(self, a, b) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        self.parent[ra] = rb
        return True


def synthetic_city(
    n_nodes: int = DC_NODES,
    n_segments: int = DC_SEGMENTS,
    seed: int = 9559,
    origin: tuple[float, float] = (-77.12, 38.80),
    spacing_m: float = 200.0,
) -> RoadGraph:
    """Connected two-way street network with exactly ``n_nodes`` and ``n_segments``.

    Nodes come from the smallest square grid that holds ``n_nodes``, minus a
    triangular corner; segments form a random spanning tree (arterials first)
    plus random extra grid links.
    """
    side = math.isqrt(n_nodes - 1) + 1
    drop = side * side - n_nodes
    t = 0
    while t * (t + 1) // 2 < drop:
        t += 1
    # Remove a corner triangle, then trim the remainder from its hypotenuse.
    removed = {(i, j) for i in range(side) for j in range(side) if i + j < t - 1}
    diag = [(i, t - 1 - i) for i in range(t)]
    removed |= set(diag[: drop - len(removed)])
    cells = [(i, j) for i in range(side) for j in range(side) if (i, j) not in removed]
    assert len(cells) == n_nodes
    index = {c: k for k, c in enumerate(cells)}

    rng = np.random.default_rng(seed)
    lat0 = origin[1]
    dlat = spacing_m / 111_195.0
    dlon = dlat / math.cos(math.radians(lat0))
    jitter = rng.uniform(-0.3, 0.3, size=(n_nodes, 2))
    coords = np.array([
        (origin[0] + (j + jitter[k, 0]) * dlon, origin[1] + (i + jitter[k, 1]) * dlat)
        for k, (i, j) in enumerate(cells)
    ])

    links = []
    for (i, j), a in index.items():
        if (i, j + 1) in index:
            links.append((a, index[(i, j + 1)], _line_class(i, side)))
        if (i + 1, j) in index:
            links.append((a, index[(i + 1, j)], _line_class(j, side)))
    if not n_nodes - 1 <= n_segments <= len(links):
        raise ValueError(f"n_segments must be in [{n_nodes - 1}, {len(links)}]")

    prio = rng.random(len(links)) + np.array([_RANK.index(c) for _, _, c in links])
    order = np.argsort(prio, kind="stable")
    ds = _DisjointSet(n_nodes)
    chosen = np.zeros(len(links), dtype=bool)
    for li in order:
        a, b, _ = links[li]
        if ds.union(a, b):
            chosen[li] = True
    rest = np.flatnonzero(~chosen)
    # Arterials are kept in full so the hierarchy forms continuous corridors.
    arterial = [li for li in rest if links[li][2] is not RoadClass.RESIDENTIAL]
    local = [li for li in rest if links[li][2] is RoadClass.RESIDENTIAL]
    extra = n_segments - int(chosen.sum())
    take = arterial[:extra]
    if len(take) < extra:
        take += list(rng.choice(local, size=extra - len(take), replace=False))
    chosen[take] = True

    stretch = rng.uniform(1.0, 1.12, size=len(links))
    service = rng.random(len(links)) < 0.05
    segments = []
    for li in np.flatnonzero(chosen):
        a, b, cls = links[li]
        gc = float(haversine_m(coords[a, 0], coords[a, 1], coords[b, 0], coords[b, 1]))
        length = float(math.ceil(gc * stretch[li]))
        if cls is RoadClass.RESIDENTIAL and service[li]:
            cls = RoadClass.SERVICE
        segments.append((a + 1, b + 1, length, cls))
    return from_segments(coords, segments)


def write_dataset(graph: RoadGraph, out_dir, stem: str = "city") -> dict[str, Path]:
    """Write DIMACS (``.gr``/``.co``) and CSV (``_nodes.csv``/``_edges.csv``) copies."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "gr": out / f"{stem}.gr",
        "co": out / f"{stem}.co",
        "nodes": out / f"{stem}_nodes.csv",
        "edges": out / f"{stem}_edges.csv",
    }
    write_dimacs(graph, paths["gr"], paths["co"], comment=f"synthetic road network {stem}")
    write_csv(graph, paths["nodes"], paths["edges"])
    return paths
