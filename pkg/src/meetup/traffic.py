"""Traffic context: default speeds per road class, jam levels and delay overlays.

Edge travel time under a scenario is

    length / (max_speed * multiplier(level)) + extra_delay

or, for edges that ship a base travel time, ``base_time / multiplier + extra_delay``.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .road_graph import Edge, RoadClass, RoadGraph
from .shortest_path import WeightView, dijkstra, reconstruct_path

log = logging.getLogger(__name__)

DEFAULT_UNKNOWN_SPEED_KMH = 40.0

# Default maximum speed (km/h) per OpenStreetMap highway type.
MAX_SPEED_KMH: dict[RoadClass, float] = {
    RoadClass.MOTORWAY: 80.0,
    RoadClass.MOTORWAY_LINK: 45.0,
    RoadClass.TRUNK: 80.0,
    RoadClass.TRUNK_LINK: 40.0,
    RoadClass.PRIMARY: 65.0,
    RoadClass.PRIMARY_LINK: 30.0,
    RoadClass.SECONDARY: 55.0,
    RoadClass.SECONDARY_LINK: 25.0,
    RoadClass.TERTIARY: 40.0,
    RoadClass.TERTIARY_LINK: 20.0,
    RoadClass.RESIDENTIAL: 25.0,
    RoadClass.LIVING_STREET: 10.0,
    RoadClass.SERVICE: 15.0,
}

LEVELS = (1, 2, 3, 4)
FREE_FLOW = 4

# Fraction of maximum speed actually travelled at each jam level.
LEVEL_MULTIPLIER: dict[int, float] = {1: 0.25, 2: 0.50, 3: 0.75, 4: 1.00}

# Speed-performance-index band per level as (low, high, low_inclusive); high is inclusive.
SPI_BANDS: dict[int, tuple[float, float, bool]] = {
    1: (0.0, 0.25, True),
    2: (0.25, 0.50, False),
    3: (0.50, 0.75, False),
    4: (0.75, 1.00, False),
}

HIGHWAY_FAMILY = frozenset({
    RoadClass.MOTORWAY, RoadClass.MOTORWAY_LINK,
    RoadClass.TRUNK, RoadClass.TRUNK_LINK,
    RoadClass.PRIMARY, RoadClass.PRIMARY_LINK,
    RoadClass.SECONDARY, RoadClass.SECONDARY_LINK,
})

_HIERARCHY = {
    RoadClass.MOTORWAY: 1,
    RoadClass.TRUNK: 2,
    RoadClass.PRIMARY: 2,
    RoadClass.SECONDARY: 3,
}


def max_speed_for_class(road_class: RoadClass, unknown_kmh: float = DEFAULT_UNKNOWN_SPEED_KMH) -> float:
    return MAX_SPEED_KMH.get(RoadClass(road_class), unknown_kmh)


def edge_speed_kmh(edge: Edge, unknown_kmh: float = DEFAULT_UNKNOWN_SPEED_KMH) -> float:
    """Explicit ``max_speed`` if the edge has one, else the class default."""
    return edge.max_speed if edge.max_speed is not None else max_speed_for_class(edge.road_class, unknown_kmh)


def multiplier_for_level(level: int) -> float:
    if level not in LEVEL_MULTIPLIER:
        raise ValueError(f"traffic level must be one of {LEVELS}, got {level!r}")
    return LEVEL_MULTIPLIER[level]


def in_band(level: int, ratio: float) -> bool:
    lo, hi, lo_closed = SPI_BANDS[level]
    return (lo <= ratio if lo_closed else lo < ratio) and ratio <= hi


def level_for_ratio(ratio: float) -> int:
    """Jam level whose speed-performance-index band contains ``ratio``."""
    for level in LEVELS:
        if in_band(level, ratio):
            return level
    raise ValueError(f"speed ratio {ratio} outside [0, 1]")


@dataclass(frozen=True)
class TrafficScenario:
    """Jam levels and additive delays keyed by edge id. Missing levels mean free flow."""

    edge_count: int
    levels: Mapping[int, int] = field(default_factory=dict)
    extra_delay: Mapping[int, float] = field(default_factory=dict)
    kind: str = "none"
    seed: int | None = None

    def __post_init__(self):
        for eid, lvl in self.levels.items():
            self._check_edge(eid)
            multiplier_for_level(lvl)
        for eid, d in self.extra_delay.items():
            self._check_edge(eid)
            if not (d >= 0 and math.isfinite(d)):
                raise ValueError(f"delay on edge {eid} must be finite and >= 0, got {d}")

    def _check_edge(self, eid: int) -> None:
        if not 0 <= eid < self.edge_count:
            raise KeyError(f"unknown edge id {eid}")

    @classmethod
    def free_flow(cls, graph: RoadGraph) -> "TrafficScenario":
        return cls(graph.n_edges)

    def level(self, eid: int) -> int:
        return self.levels.get(eid, FREE_FLOW)

    def to_json(self) -> dict:
        d = {
            "kind": self.kind,
            "levels": [[e, lvl] for e, lvl in sorted(self.levels.items())],
            "delays": [[e, s] for e, s in sorted(self.extra_delay.items())],
        }
        if self.seed is not None:
            d["seed"] = self.seed
        return d

    @classmethod
    def from_json(cls, data: dict, graph: RoadGraph) -> "TrafficScenario":
        kind = data.get("kind", "manual")
        if kind not in ("none", "hierarchical", "random", "manual"):
            raise ValueError(f"unknown scenario kind {kind!r}")
        levels = {int(e): int(lvl) for e, lvl in data.get("levels", [])}
        delays: dict[int, float] = {}
        for e, s in data.get("delays", []):
            delays[int(e)] = delays.get(int(e), 0.0) + float(s)
        return cls(graph.n_edges, levels, delays, kind, data.get("seed"))


def save_scenario(scenario: TrafficScenario, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(scenario.to_json(), fh)
        fh.write("\n")


def load_scenario(path, graph: RoadGraph) -> TrafficScenario:
    with open(path, encoding="utf-8") as fh:
        return TrafficScenario.from_json(json.load(fh), graph)


def time_weights(
    graph: RoadGraph,
    scenario: TrafficScenario | None = None,
    unknown_kmh: float = DEFAULT_UNKNOWN_SPEED_KMH,
) -> WeightView:
    """Travel-time view (seconds) under ``scenario``; free flow when omitted."""
    if scenario is None:
        scenario = TrafficScenario.free_flow(graph)
    if scenario.edge_count != graph.n_edges:
        raise ValueError("scenario was built for a different graph")
    costs = []
    for e in graph.edges:
        mult = LEVEL_MULTIPLIER[scenario.level(e.id)]
        if e.base_time is not None:
            t = e.base_time / mult
        else:
            t = e.length * 3.6 / (edge_speed_kmh(e, unknown_kmh) * mult)
        costs.append(t + scenario.extra_delay.get(e.id, 0.0))
    return WeightView(graph, "time", costs)


def base_time_weights(graph: RoadGraph, unknown_kmh: float = DEFAULT_UNKNOWN_SPEED_KMH) -> WeightView:
    """Free-flow travel times with no scenario applied."""
    costs = [
        e.base_time if e.base_time is not None else e.length * 3.6 / edge_speed_kmh(e, unknown_kmh)
        for e in graph.edges
    ]
    return WeightView(graph, "time", costs)


def hierarchical_scenario(graph: RoadGraph) -> TrafficScenario:
    """Jams concentrated on highways: motorway 1, trunk and primary 2, secondary 3, others 4.

    Link classes take their parent's level.
    """
    levels = {}
    for e in graph.edges:
        lvl = _HIERARCHY.get(e.road_class.parent, FREE_FLOW)
        if lvl != FREE_FLOW:
            levels[e.id] = lvl
    if graph.n_edges and all(e.road_class is RoadClass.UNKNOWN for e in graph.edges):
        log.warning("no edge carries a road class; hierarchical scenario is all free flow")
    return TrafficScenario(graph.n_edges, levels, {}, "hierarchical")


def random_scenario(graph: RoadGraph, seed: int) -> TrafficScenario:
    """Uniform random level in {1, 2, 3, 4} on highway-family edges, free flow elsewhere.

    Draws come from ``numpy.random.default_rng(seed)`` in edge-id order.
    """
    rng = np.random.default_rng(seed)
    hw = [e.id for e in graph.edges if e.road_class in HIGHWAY_FAMILY]
    draws = rng.integers(1, 5, size=len(hw))
    levels = {eid: int(lvl) for eid, lvl in zip(hw, draws) if lvl != FREE_FLOW}
    return TrafficScenario(graph.n_edges, levels, {}, "random", seed)


def inject_delay(scenario: TrafficScenario, edges: Iterable[int], delay: float) -> TrafficScenario:
    """New scenario with ``delay`` seconds added to each listed edge."""
    if not delay >= 0:
        raise ValueError(f"delay must be >= 0, got {delay}")
    extra = dict(scenario.extra_delay)
    for eid in edges:
        scenario._check_edge(eid)
        extra[eid] = extra.get(eid, 0.0) + float(delay)
    kind = scenario.kind if scenario.kind != "none" else "manual"
    return TrafficScenario(scenario.edge_count, dict(scenario.levels), extra, kind, scenario.seed)


def inject_path_delay(
    scenario: TrafficScenario,
    graph: RoadGraph,
    source: int,
    target: int,
    delay: float,
    unknown_kmh: float = DEFAULT_UNKNOWN_SPEED_KMH,
) -> TrafficScenario:
    """Spread ``delay`` seconds evenly over the current fastest path source -> target.

    The path's total travel time grows by exactly ``delay`` (up to rounding).
    """
    res = dijkstra(graph, time_weights(graph, scenario, unknown_kmh), source, stop_set={target})
    path = reconstruct_path(res, target)
    if not path:
        return scenario
    share = delay / len(path)
    out = scenario
    for e in path:
        out = inject_delay(out, [e.id], share)
    return out
