"""Planar solvers and primitives.

Manhattan (L1) Weber problem via weighted medians, Weiszfeld's iteration for
the Euclidean geometric median, monotone-chain convex hull and hull diameter.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Sequence

import numpy as np

Point = tuple[float, float]


@dataclass(frozen=True)
class WeightedPoint:
    x: float
    y: float
    w: float = 1.0

    def __post_init__(self):
        if not self.w >= 0:
            raise ValueError(f"weight must be nonnegative, got {self.w}")


@dataclass(frozen=True)
class OptimalRect:
    """Every point of ``[x_lo, x_hi] x [y_lo, y_hi]`` minimises the L1 objective."""

    x_lo: float
    x_hi: float
    y_lo: float
    y_hi: float
    representative: Point
    objective: float

    def contains(self, p: Point) -> bool:
        return self.x_lo <= p[0] <= self.x_hi and self.y_lo <= p[1] <= self.y_hi

    @property
    def corners(self) -> list[Point]:
        return [(self.x_lo, self.y_lo), (self.x_hi, self.y_lo), (self.x_hi, self.y_hi), (self.x_lo, self.y_hi)]


def _as_points(points) -> list[WeightedPoint]:
    out = [p if isinstance(p, WeightedPoint) else WeightedPoint(*p) for p in points]
    if not out:
        raise ValueError("need at least one point")
    return out


def weighted_median_interval(values: Sequence[float], weights: Sequence[float]) -> tuple[float, float]:
    """Interval of minimisers of ``sum w_i |t - v_i|``.

    Weights are compared exactly (as fractions) so ties at half the total
    weight widen the interval as they should.
    """
    pairs = sorted((float(v), Fraction(w)) for v, w in zip(values, weights) if w > 0)
    if not pairs:
        raise ValueError("total weight must be positive")
    total = sum(w for _, w in pairs)
    acc = Fraction(0)
    lo = None
    for v, w in pairs:
        acc += w
        if 2 * acc >= total:
            lo = v
            break
    acc = Fraction(0)
    hi = None
    for v, w in reversed(pairs):
        acc += w
        if 2 * acc >= total:
            hi = v
            break
    return lo, hi


def manhattan_objective(points, x: float, y: float) -> float:
    pts = _as_points(points)
    return math.fsum(p.w * (abs(x - p.x) + abs(y - p.y)) for p in pts)


def manhattan_median(points) -> OptimalRect:
    """Full optimum set of ``min sum w_m (|X - X_m| + |Y - Y_m|)``.

    The objective separates into x and y parts, each solved by a weighted
    median interval.
    """
    pts = _as_points(points)
    if not sum(p.w for p in pts) > 0:
        raise ValueError("total weight must be positive")
    ws = [p.w for p in pts]
    x_lo, x_hi = weighted_median_interval([p.x for p in pts], ws)
    y_lo, y_hi = weighted_median_interval([p.y for p in pts], ws)
    rep = ((x_lo + x_hi) / 2.0, (y_lo + y_hi) / 2.0)
    return OptimalRect(x_lo, x_hi, y_lo, y_hi, rep, manhattan_objective(pts, *rep))


def euclidean_objective(points, x: float, y: float) -> float:
    pts = _as_points(points)
    return math.fsum(p.w * math.hypot(x - p.x, y - p.y) for p in pts)


def _vertex_is_optimal(pts: list[WeightedPoint], j: int) -> bool:
    # Optimality condition at a data point: the pull of the others is at most its weight.
    pj = pts[j]
    gx = gy = 0.0
    for i, p in enumerate(pts):
        if i == j:
            continue
        d = math.hypot(p.x - pj.x, p.y - pj.y)
        if d > 0:
            gx += p.w * (p.x - pj.x) / d
            gy += p.w * (p.y - pj.y) / d
    return math.hypot(gx, gy) <= pj.w


def weiszfeld_iterates(points, tol: float = 1e-9, max_iter: int = 1000) -> Iterator[Point]:
    """Successive Weiszfeld iterates, starting from the weighted centroid.

    When an iterate lands within ``tol`` of a data point that is itself
    optimal, that point is yielded and iteration stops; at a non-optimal data
    point the step uses the Vardi-Zhang correction so the sequence can leave it.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    pts = [p for p in _as_points(points) if p.w > 0]
    if not pts:
        raise ValueError("total weight must be positive")
    xs = np.array([p.x for p in pts])
    ys = np.array([p.y for p in pts])
    ws = np.array([p.w for p in pts])
    x, y = float(ws @ xs / ws.sum()), float(ws @ ys / ws.sum())
    yield x, y
    for _ in range(max_iter):
        d = np.hypot(xs - x, ys - y)
        near = np.flatnonzero(d < tol)
        if near.size:
            j = int(near[np.argmin(d[near])])
            if _vertex_is_optimal(pts, j):
                yield pts[j].x, pts[j].y
                return
            far = d >= tol
            inv = ws[far] / d[far]
            tx, ty = float(inv @ xs[far] / inv.sum()), float(inv @ ys[far] / inv.sum())
            rx, ry = float(inv @ (xs[far] - x)), float(inv @ (ys[far] - y))
            r = math.hypot(rx, ry)
            eta = ws[near].sum()
            step = max(0.0, 1.0 - eta / r) if r > 0 else 0.0
            nx = (1.0 - step) * x + step * tx
            ny = (1.0 - step) * y + step * ty
        else:
            inv = ws / d
            nx, ny = float(inv @ xs / inv.sum()), float(inv @ ys / inv.sum())
        moved = math.hypot(nx - x, ny - y)
        x, y = nx, ny
        yield x, y
        if moved < tol:
            return


def weiszfeld(points, tol: float = 1e-9, max_iter: int = 1000) -> Point:
    """Weighted geometric median (Euclidean Weber point)."""
    pts = [p for p in _as_points(points) if p.w > 0]
    if not pts:
        raise ValueError("total weight must be positive")
    distinct = {}
    for p in pts:
        distinct[(p.x, p.y)] = distinct.get((p.x, p.y), 0.0) + p.w
    if len(distinct) == 1:
        return next(iter(distinct))
    if len(distinct) == 2:
        (a, wa), (b, wb) = distinct.items()
        if wa == wb:
            return ((a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0)
        # Objective is linear along the segment; the heavier end wins.
        return a if wa > wb else b
    last = None
    for last in weiszfeld_iterates(pts, tol, max_iter):
        pass
    # A data point can still beat the final iterate when iteration was cut short.
    best = min(pts, key=lambda p: euclidean_objective(pts, p.x, p.y))
    if euclidean_objective(pts, best.x, best.y) < euclidean_objective(pts, *last):
        return best.x, best.y
    return last


# -- convex hull ---------------------------------------------------------------------


@dataclass(frozen=True)
class Degenerate:
    """Fewer than three distinct non-collinear points; ``points`` are the distinct inputs."""

    points: tuple[Point, ...]


def _cross(o: Point, a: Point, b: Point) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def convex_hull(points: Sequence[Point]) -> list[Point] | Degenerate:
    """Counter-clockwise hull vertices (Andrew's monotone chain), no collinear vertices.

    The list starts at the lexicographically smallest point.
    """
    pts = sorted({(float(p[0]), float(p[1])) for p in points})
    if not pts:
        raise ValueError("need at least one point")
    if len(pts) < 3:
        return Degenerate(tuple(pts))
    lower: list[Point] = []
    for p in pts:
        while len(lower) >= 2 and _cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list[Point] = []
    for p in reversed(pts):
        while len(upper) >= 2 and _cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    hull = lower[:-1] + upper[:-1]
    if len(hull) < 3:
        return Degenerate(tuple(pts))
    return hull


def hull_diameter(hull: Sequence[Point]) -> tuple[Point, Point, float]:
    """Farthest vertex pair by brute force; ties go to the lexicographically smallest pair."""
    verts = sorted({(float(p[0]), float(p[1])) for p in hull})
    if len(verts) < 2:
        raise ValueError("diameter needs at least two distinct vertices")
    best = None
    for i, p in enumerate(verts):
        for q in verts[i + 1:]:
            d = math.hypot(p[0] - q[0], p[1] - q[1])
            if best is None or d > best[2]:
                best = (p, q, d)
    return best


def points_in_convex_polygon(xs, ys, hull: Sequence[Point], rel_eps: float = 1e-12) -> np.ndarray:
    """Boolean mask of points inside or on a counter-clockwise convex polygon."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    inside = np.ones(xs.shape, dtype=bool)
    span = max(max(abs(p[0]) for p in hull), max(abs(p[1]) for p in hull), 1.0)
    for i, a in enumerate(hull):
        b = hull[(i + 1) % len(hull)]
        cross = (b[0] - a[0]) * (ys - a[1]) - (b[1] - a[1]) * (xs - a[0])
        inside &= cross >= -rel_eps * span * span
    return inside


def point_in_polygon(p: Point, polygon: Sequence[Point], rel_eps: float = 1e-12) -> bool:
    """Ray casting for any simple polygon; points on the boundary count as inside."""
    x, y = p
    n = len(polygon)
    span = max(max(abs(q[0]) for q in polygon), max(abs(q[1]) for q in polygon), abs(x), abs(y), 1.0)
    eps = rel_eps * span * span
    inside = False
    for i in range(n):
        a, b = polygon[i], polygon[(i + 1) % n]
        if abs(_cross(a, b, p)) <= eps and min(a[0], b[0]) <= x <= max(a[0], b[0]) \
                and min(a[1], b[1]) <= y <= max(a[1], b[1]):
            return True
        if (a[1] > y) != (b[1] > y):
            xi = a[0] + (y - a[1]) * (b[0] - a[0]) / (b[1] - a[1])
            if x < xi:
                inside = not inside
    return inside
