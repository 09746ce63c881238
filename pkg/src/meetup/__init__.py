"""Meetup location queries for multiple moving objects on road networks."""
from .core import (
    FINAL_DESTINATION,
    INTERMEDIATE,
    METHODS,
    CandidateSet,
    InfeasibleError,
    MeetupQuery,
    MeetupSolution,
    MovingObject,
    cost_surface,
    solve,
)
from .road_graph import RoadGraph, load_csv, load_dimacs
from .shortest_path import WeightView, astar, dijkstra, distance_weights
from .traffic import TrafficScenario, time_weights

__version__ = "0.1.0"

__all__ = [
    "FINAL_DESTINATION", "INTERMEDIATE", "METHODS", "CandidateSet", "InfeasibleError",
    "MeetupQuery", "MeetupSolution", "MovingObject", "RoadGraph", "TrafficScenario",
    "WeightView", "astar", "cost_surface", "dijkstra", "distance_weights", "load_csv",
    "load_dimacs", "solve", "time_weights",
]
