"""Road network model, loaders and spatial queries.

Nodes carry dense 1-based integer ids in load order. Edges are directed; an
undirected segment is stored as two edges. Spatial queries (snap, k-NN,
rectangle) all use great-circle metres and break ties by lowest node id.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.spatial import cKDTree

EARTH_RADIUS_M = 6_371_008.8


class GraphFormatError(ValueError):
    """A graph file line could not be parsed."""

    def __init__(self, path, lineno: int, message: str):
        super().__init__(f"{path}:{lineno}: {message}")
        self.path = path
        self.lineno = lineno


class GraphValidationError(ValueError):
    """Parsed graph data is structurally inconsistent."""


class RoadClass(str, Enum):
    MOTORWAY = "motorway"
    MOTORWAY_LINK = "motorway_link"
    TRUNK = "trunk"
    TRUNK_LINK = "trunk_link"
    PRIMARY = "primary"
    PRIMARY_LINK = "primary_link"
    SECONDARY = "secondary"
    SECONDARY_LINK = "secondary_link"
    TERTIARY = "tertiary"
    TERTIARY_LINK = "tertiary_link"
    RESIDENTIAL = "residential"
    LIVING_STREET = "living_street"
    SERVICE = "service"
    UNKNOWN = "unknown"

    @classmethod
    def parse(cls, text: str | None) -> "RoadClass":
        if not text:
            return cls.UNKNOWN
        try:
            return cls(text.strip().lower())
        except ValueError:
            return cls.UNKNOWN

    @property
    def parent(self) -> "RoadClass":
        """The main class of a ``*_link`` class; other classes map to themselves."""
        if self.value.endswith("_link"):
            return RoadClass(self.value[: -len("_link")])
        return self


@dataclass(frozen=True, slots=True)
class Edge:
    id: int
    u: int
    v: int
    length: float
    road_class: RoadClass = RoadClass.UNKNOWN
    max_speed: float | None = None
    base_time: float | None = None
    label: str | None = None


@dataclass(frozen=True)
class Rect:
    min_lon: float
    min_lat: float
    max_lon: float
    max_lat: float

    def __post_init__(self):
        if self.min_lon > self.max_lon or self.min_lat > self.max_lat:
            raise ValueError(f"invalid rectangle {self}")

    @classmethod
    def bounding(cls, points: Iterable[tuple[float, float]]) -> "Rect":
        pts = list(points)
        if not pts:
            raise ValueError("bounding rectangle of no points")
        lons = [p[0] for p in pts]
        lats = [p[1] for p in pts]
        return cls(min(lons), min(lats), max(lons), max(lats))


def haversine_m(lon1, lat1, lon2, lat2):
    """Great-circle distance in metres. Works on scalars or numpy arrays."""
    lon1, lat1, lon2, lat2 = map(np.radians, (lon1, lat1, lon2, lat2))
    a = np.sin((lat2 - lat1) / 2.0) ** 2 + np.cos(lat1) * np.cos(lat2) * np.sin((lon2 - lon1) / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_M * np.arcsin(np.sqrt(np.clip(a, 0.0, 1.0)))


def _unit_vectors(lon, lat) -> np.ndarray:
    lon = np.radians(np.asarray(lon, dtype=float))
    lat = np.radians(np.asarray(lat, dtype=float))
    c = np.cos(lat)
    return np.stack([c * np.cos(lon), c * np.sin(lon), np.sin(lat)], axis=-1)


@dataclass(frozen=True)
class LocalProjection:
    """Equirectangular projection to metres around a reference latitude.

    Linear in each axis, so convexity and box membership are preserved.
    """

    lat0: float

    def forward(self, lon, lat):
        k = math.radians(1.0) * EARTH_RADIUS_M
        return np.asarray(lon) * k * math.cos(math.radians(self.lat0)), np.asarray(lat) * k

    def inverse(self, x, y):
        k = math.radians(1.0) * EARTH_RADIUS_M
        return np.asarray(x) / (k * math.cos(math.radians(self.lat0))), np.asarray(y) / k


@dataclass(eq=False)
class RoadGraph:
    """Immutable directed road graph.

    ``coords[i]`` holds (lon, lat) of node ``i + 1``. ``out_adj[u]`` and
    ``in_adj[u]`` are tuples of edge ids; index 0 is unused.
    """

    coords: np.ndarray
    edges: tuple[Edge, ...]
    node_labels: tuple[str, ...] = ()
    out_adj: tuple[tuple[int, ...], ...] = field(init=False)
    in_adj: tuple[tuple[int, ...], ...] = field(init=False)

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=float)
        if coords.ndim != 2 or coords.shape[1] != 2 or len(coords) < 1:
            raise GraphValidationError("graph needs at least one node with (lon, lat)")
        coords.setflags(write=False)
        self.coords = coords
        n = len(coords)
        out_adj: list[list[int]] = [[] for _ in range(n + 1)]
        in_adj: list[list[int]] = [[] for _ in range(n + 1)]
        for i, e in enumerate(self.edges):
            if e.id != i:
                raise GraphValidationError(f"edge ids must be dense, got {e.id} at position {i}")
            if not (1 <= e.u <= n and 1 <= e.v <= n):
                raise GraphValidationError(f"edge {e.id} references unknown node ({e.u}, {e.v})")
            if not e.length > 0:
                raise GraphValidationError(f"edge {e.id} has non-positive length {e.length}")
            out_adj[e.u].append(i)
            in_adj[e.v].append(i)
        self.out_adj = tuple(tuple(a) for a in out_adj)
        self.in_adj = tuple(tuple(a) for a in in_adj)
        if not self.node_labels:
            self.node_labels = tuple(str(i) for i in range(1, n + 1))

    @property
    def n_nodes(self) -> int:
        return len(self.coords)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @cached_property
    def segment_count(self) -> int:
        """Number of distinct undirected node pairs joined by at least one edge."""
        return len({(min(e.u, e.v), max(e.u, e.v)) for e in self.edges})

    def nodes(self) -> range:
        return range(1, self.n_nodes + 1)

    def lonlat(self, node: int) -> tuple[float, float]:
        lon, lat = self.coords[node - 1]
        return float(lon), float(lat)

    def out_edges(self, node: int) -> list[Edge]:
        return [self.edges[i] for i in self.out_adj[node]]

    def in_edges(self, node: int) -> list[Edge]:
        return [self.edges[i] for i in self.in_adj[node]]

    @cached_property
    def projection(self) -> LocalProjection:
        return LocalProjection(float(self.coords[:, 1].mean()))

    def planar(self, nodes: Sequence[int]) -> np.ndarray:
        """Projected (x, y) metres for the given nodes, shape (len(nodes), 2)."""
        idx = np.asarray(nodes, dtype=int) - 1
        x, y = self.projection.forward(self.coords[idx, 0], self.coords[idx, 1])
        return np.stack([x, y], axis=-1)

    @cached_property
    def _tree(self) -> cKDTree:
        # Chord length on the unit sphere is monotone in great-circle distance.
        return cKDTree(_unit_vectors(self.coords[:, 0], self.coords[:, 1]))

    def distances_from(self, point: tuple[float, float], nodes=None) -> np.ndarray:
        if nodes is None:
            c = self.coords
        else:
            c = self.coords[np.asarray(nodes, dtype=int) - 1]
        return haversine_m(point[0], point[1], c[:, 0], c[:, 1])

    def __repr__(self):
        return f"RoadGraph(nodes={self.n_nodes}, edges={self.n_edges})"


# -- spatial queries -----------------------------------------------------------------


def knn_nodes(graph: RoadGraph, point: tuple[float, float], k: int) -> list[int]:
    """The ``k`` nodes nearest ``point`` by great-circle distance, ties by lowest id."""
    n = graph.n_nodes
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    if k == n:
        pool = np.arange(n)
    else:
        q = _unit_vectors(point[0], point[1])
        d, _ = graph._tree.query(q, k=k)
        radius = float(np.max(d)) * (1.0 + 1e-9) + 1e-15
        # Everything within the k-th chord, so boundary ties are all present.
        pool = np.asarray(graph._tree.query_ball_point(q, radius), dtype=int)
    dist = haversine_m(point[0], point[1], graph.coords[pool, 0], graph.coords[pool, 1])
    order = np.lexsort((pool, dist))
    return [int(pool[i]) + 1 for i in order[:k]]


def snap_to_node(graph: RoadGraph, point: tuple[float, float]) -> int:
    return knn_nodes(graph, point, 1)[0]


def nodes_in_rect(graph: RoadGraph, rect: Rect) -> set[int]:
    """Nodes inside the closed box ``rect``."""
    lon = graph.coords[:, 0]
    lat = graph.coords[:, 1]
    mask = (lon >= rect.min_lon) & (lon <= rect.max_lon) & (lat >= rect.min_lat) & (lat <= rect.max_lat)
    return {int(i) + 1 for i in np.flatnonzero(mask)}


# -- DIMACS --------------------------------------------------------------------------


def _dimacs_lines(path):
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("c"):
                continue
            yield lineno, line.split()


def _read_coordinates(co_path) -> tuple[int, np.ndarray]:
    n = None
    coords = None
    seen = None
    for lineno, tok in _dimacs_lines(co_path):
        if tok[0] == "p":
            if len(tok) != 5 or tok[1:4] != ["aux", "sp", "co"]:
                raise GraphFormatError(co_path, lineno, "expected 'p aux sp co <n>'")
            try:
                n = int(tok[4])
            except ValueError:
                raise GraphFormatError(co_path, lineno, f"bad node count {tok[4]!r}") from None
            coords = np.full((n, 2), np.nan)
            seen = np.zeros(n, dtype=bool)
        elif tok[0] == "v":
            if coords is None:
                raise GraphFormatError(co_path, lineno, "'v' line before header")
            if len(tok) != 4:
                raise GraphFormatError(co_path, lineno, "expected 'v <id> <x> <y>'")
            try:
                i, x, y = int(tok[1]), int(tok[2]), int(tok[3])
            except ValueError:
                raise GraphFormatError(co_path, lineno, "non-integer field in 'v' line") from None
            if not 1 <= i <= n:
                raise GraphValidationError(f"{co_path}:{lineno}: node id {i} outside 1..{n}")
            if seen[i - 1]:
                raise GraphValidationError(f"{co_path}:{lineno}: duplicate node id {i}")
            seen[i - 1] = True
            coords[i - 1] = (x * 1e-6, y * 1e-6)
        else:
            raise GraphFormatError(co_path, lineno, f"unknown line type {tok[0]!r}")
    if coords is None:
        raise GraphFormatError(co_path, 0, "missing 'p aux sp co' header")
    if not seen.all():
        missing = int(np.flatnonzero(~seen)[0]) + 1
        raise GraphValidationError(f"{co_path}: no coordinates for node {missing}")
    return n, coords


def load_dimacs(gr_path, co_path, weight_kind: str = "distance") -> RoadGraph:
    """Load a DIMACS ``.gr``/``.co`` pair.

    ``weight_kind="distance"`` stores arc weights as edge length in metres;
    ``"time"`` stores them as ``base_time`` seconds and uses the great-circle
    distance between endpoints as the length.
    """
    if weight_kind not in ("distance", "time"):
        raise ValueError(f"weight_kind must be 'distance' or 'time', got {weight_kind!r}")
    n_co, coords = _read_coordinates(co_path)
    n = m = None
    arcs: list[tuple[int, int, int, int]] = []
    for lineno, tok in _dimacs_lines(gr_path):
        if tok[0] == "p":
            if len(tok) != 4 or tok[1] != "sp":
                raise GraphFormatError(gr_path, lineno, "expected 'p sp <n> <m>'")
            try:
                n, m = int(tok[2]), int(tok[3])
            except ValueError:
                raise GraphFormatError(gr_path, lineno, "non-integer header field") from None
        elif tok[0] == "a":
            if n is None:
                raise GraphFormatError(gr_path, lineno, "'a' line before header")
            if len(tok) != 4:
                raise GraphFormatError(gr_path, lineno, "expected 'a <u> <v> <w>'")
            try:
                u, v, w = int(tok[1]), int(tok[2]), int(tok[3])
            except ValueError:
                raise GraphFormatError(gr_path, lineno, "non-integer field in 'a' line") from None
            if not (1 <= u <= n and 1 <= v <= n):
                raise GraphValidationError(f"{gr_path}:{lineno}: arc ({u}, {v}) references unknown node")
            if w <= 0:
                raise GraphValidationError(f"{gr_path}:{lineno}: arc weight must be positive, got {w}")
            arcs.append((u, v, w, lineno))
        else:
            raise GraphFormatError(gr_path, lineno, f"unknown line type {tok[0]!r}")
    if n is None:
        raise GraphFormatError(gr_path, 0, "missing 'p sp' header")
    if n != n_co:
        raise GraphValidationError(f"node count mismatch: {gr_path} has {n}, {co_path} has {n_co}")
    if m != len(arcs):
        raise GraphValidationError(f"{gr_path}: header declares {m} arcs, found {len(arcs)}")

    edges = []
    for i, (u, v, w, lineno) in enumerate(arcs):
        if weight_kind == "distance":
            edges.append(Edge(i, u, v, float(w), label=str(lineno)))
        else:
            (lon1, lat1), (lon2, lat2) = coords[u - 1], coords[v - 1]
            length = max(float(haversine_m(lon1, lat1, lon2, lat2)), 1e-3)
            edges.append(Edge(i, u, v, length, base_time=float(w), label=str(lineno)))
    return RoadGraph(coords, tuple(edges))


def write_dimacs(graph: RoadGraph, gr_path, co_path, comment: str = "") -> None:
    """Write a graph as DIMACS distance files; lengths are rounded to integers."""
    with open(co_path, "w", encoding="utf-8") as fh:
        if comment:
            fh.write(f"c {comment}\n")
        fh.write(f"p aux sp co {graph.n_nodes}\n")
        for i, (lon, lat) in enumerate(graph.coords, 1):
            fh.write(f"v {i} {round(lon * 1e6)} {round(lat * 1e6)}\n")
    with open(gr_path, "w", encoding="utf-8") as fh:
        if comment:
            fh.write(f"c {comment}\n")
        fh.write(f"p sp {graph.n_nodes} {graph.n_edges}\n")
        for e in graph.edges:
            fh.write(f"a {e.u} {e.v} {max(1, round(e.length))}\n")


# -- CSV -----------------------------------------------------------------------------

NODE_COLUMNS = ("node_id", "lon", "lat")
EDGE_COLUMNS = ("edge_id", "u", "v", "length_m", "road_class", "max_speed_kmh", "oneway")


def _dict_rows(path, required: Sequence[str]):
    fh = open(path, newline="", encoding="utf-8")
    reader = csv.DictReader(fh)
    missing = [c for c in required if c not in (reader.fieldnames or ())]
    if missing:
        fh.close()
        raise GraphFormatError(path, 1, f"missing required column(s): {', '.join(missing)}")
    return fh, reader


def load_csv(nodes_path, edges_path) -> RoadGraph:
    """Load node and edge tables; ``oneway=0`` rows yield a pair of edges."""
    fh, reader = _dict_rows(nodes_path, NODE_COLUMNS)
    index: dict[str, int] = {}
    coords = []
    with fh:
        for lineno, row in enumerate(reader, 2):
            label = row["node_id"].strip()
            try:
                lon, lat = float(row["lon"]), float(row["lat"])
            except (TypeError, ValueError):
                raise GraphFormatError(nodes_path, lineno, "lon/lat must be numbers") from None
            if label in index:
                raise GraphValidationError(f"{nodes_path}:{lineno}: duplicate node id {label!r}")
            index[label] = len(coords) + 1
            coords.append((lon, lat))

    fh, reader = _dict_rows(edges_path, EDGE_COLUMNS)
    edges: list[Edge] = []
    with fh:
        for lineno, row in enumerate(reader, 2):
            u_label, v_label = row["u"].strip(), row["v"].strip()
            if u_label not in index or v_label not in index:
                raise GraphValidationError(
                    f"{edges_path}:{lineno}: edge endpoint ({u_label}, {v_label}) is not a loaded node"
                )
            try:
                length = float(row["length_m"])
                speed = float(row["max_speed_kmh"]) if (row["max_speed_kmh"] or "").strip() else None
                oneway = int(row["oneway"])
            except (TypeError, ValueError):
                raise GraphFormatError(edges_path, lineno, "non-numeric length, speed or oneway") from None
            if not length > 0:
                raise GraphValidationError(f"{edges_path}:{lineno}: non-positive length {length}")
            if speed is not None and not speed > 0:
                raise GraphValidationError(f"{edges_path}:{lineno}: non-positive max speed {speed}")
            if oneway not in (0, 1):
                raise GraphFormatError(edges_path, lineno, f"oneway must be 0 or 1, got {oneway}")
            cls = RoadClass.parse(row["road_class"])
            u, v = index[u_label], index[v_label]
            label = row["edge_id"].strip()
            edges.append(Edge(len(edges), u, v, length, cls, speed, label=label))
            if oneway == 0:
                edges.append(Edge(len(edges), v, u, length, cls, speed, label=label))
    if not coords:
        raise GraphValidationError(f"{nodes_path}: no nodes")
    return RoadGraph(np.array(coords, dtype=float), tuple(edges), tuple(index))


def write_csv(graph: RoadGraph, nodes_path, edges_path) -> None:
    """Write node/edge tables. Reverse-twin edges collapse into one two-way row."""
    with open(nodes_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(NODE_COLUMNS)
        for i, (lon, lat) in enumerate(graph.coords, 1):
            w.writerow([graph.node_labels[i - 1], repr(float(lon)), repr(float(lat))])
    twins: dict[tuple, list[Edge]] = {}
    for e in graph.edges:
        twins.setdefault((e.u, e.v, e.length, e.road_class, e.max_speed), []).append(e)
    written = set()
    with open(edges_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(EDGE_COLUMNS)
        for e in graph.edges:
            if e.id in written:
                continue
            written.add(e.id)
            back = [b for b in twins.get((e.v, e.u, e.length, e.road_class, e.max_speed), []) if b.id not in written]
            oneway = 1
            if back and e.u != e.v:
                written.add(back[0].id)
                oneway = 0
            w.writerow([
                e.label or f"e{e.id}",
                graph.node_labels[e.u - 1],
                graph.node_labels[e.v - 1],
                repr(e.length),
                e.road_class.value,
                "" if e.max_speed is None else repr(e.max_speed),
                oneway,
            ])


def from_segments(
    coords: Sequence[tuple[float, float]],
    segments: Iterable[tuple],
    directed: bool = False,
) -> RoadGraph:
    """Build a graph from ``(u, v, length[, road_class[, max_speed]])`` tuples.

    Convenient for fixtures; ``directed=False`` adds the reverse of every segment.
    """
    edges: list[Edge] = []
    for seg in segments:
        u, v, length = seg[0], seg[1], float(seg[2])
        cls = RoadClass(seg[3]) if len(seg) > 3 else RoadClass.UNKNOWN
        speed = seg[4] if len(seg) > 4 else None
        edges.append(Edge(len(edges), u, v, length, cls, speed))
        if not directed:
            edges.append(Edge(len(edges), v, u, length, cls, speed))
    return RoadGraph(np.asarray(coords, dtype=float), tuple(edges))


def load_graph(paths: Sequence[Path | str], fmt: str, weight_kind: str = "distance") -> RoadGraph:
    if fmt == "dimacs":
        return load_dimacs(paths[0], paths[1], weight_kind)
    if fmt == "csv":
        return load_csv(paths[0], paths[1])
    raise ValueError(f"unknown graph format {fmt!r}")
