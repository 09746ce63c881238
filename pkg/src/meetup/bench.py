"""Benchmark harness: seeded random cases, multi-method runs, accuracy and runtime summaries."""
from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .core import METHODS, InfeasibleError, MeetupQuery, MovingObject, solve
from .road_graph import RoadGraph
from .shortest_path import WeightView, distance_weights

log = logging.getLogger(__name__)

RESULT_COLUMNS = (
    "case_id", "method", "objective", "node_id", "elapsed_s",
    "matched_optimal", "fell_back", "candidate_count",
)
TABLE_COLUMNS = ("Methods", "Number of found optimal cases", "Number of missed cases", "Accuracy")
RUNTIME_COLUMNS = ("Infeasible cases", "Mean runtime (s)", "Median runtime (s)",
                   "P90 runtime (s)", "P99 runtime (s)")
MATCH_RTOL = 1e-9


@dataclass(frozen=True)
class CaseResult:
    case_id: int
    method: str
    objective: float
    node: int | None
    elapsed_s: float
    matched_optimal: bool
    fell_back: bool
    candidate_count: int

    @property
    def infeasible(self) -> bool:
        return math.isinf(self.objective)


def matches(objective: float, exact: float) -> bool:
    if math.isinf(exact) or math.isinf(objective):
        return False
    return abs(objective - exact) <= MATCH_RTOL * max(1.0, exact)


# -- case generation -----------------------------------------------------------------


def _components(graph: RoadGraph) -> np.ndarray:
    rows = [e.u - 1 for e in graph.edges]
    cols = [e.v - 1 for e in graph.edges]
    adj = csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(graph.n_nodes, graph.n_nodes))
    _, labels = connected_components(adj, directed=True, connection="strong")
    return labels


def gen_cases(
    graph: RoadGraph,
    n_cases: int,
    objects_per_case: int = 2,
    seed: int = 0,
    weights: WeightView | None = None,
    max_retries: int = 100,
) -> list[MeetupQuery]:
    """Random intermediate-mode queries with distinct endpoint nodes per case.

    A draw is kept only when all its endpoints lie in one strongly connected
    component, so every origin reaches every destination and back. A case that
    fails ``max_retries`` draws in a row is skipped with a warning.
    """
    if n_cases < 0:
        raise ValueError("n_cases must be >= 0")
    if objects_per_case < 2:
        raise ValueError("objects_per_case must be >= 2")
    need = 2 * objects_per_case
    if graph.n_nodes < need:
        raise ValueError(f"graph has {graph.n_nodes} nodes; {need} are needed per case")
    if n_cases == 0:
        return []
    rng = np.random.default_rng(seed)
    comp = _components(graph)
    metric = weights.metric if weights is not None else "distance"
    cases = []
    for c in range(n_cases):
        for _ in range(max_retries):
            draw = rng.choice(graph.n_nodes, size=need, replace=False) + 1
            if len(set(comp[draw - 1])) == 1:
                break
        else:
            log.warning("case %d skipped: no mutually reachable draw in %d tries", c, max_retries)
            continue
        objs = tuple(
            MovingObject(f"o{i + 1}", int(draw[2 * i]), int(draw[2 * i + 1]))
            for i in range(objects_per_case)
        )
        cases.append(MeetupQuery(objs, metric=metric))
    return cases


# -- running -------------------------------------------------------------------------


def _order(methods: Iterable[str]) -> list[str]:
    methods = set(methods) | {"exact"}
    unknown = methods - set(METHODS)
    if unknown:
        raise ValueError(f"unknown method(s) {sorted(unknown)}; choose from {', '.join(METHODS)}")
    return [m for m in METHODS if m in methods]


def _run_case(graph, weights, case_id, query, methods, ed_k, greedy_k) -> list[CaseResult]:
    raw = []
    for m in methods:
        try:
            s = solve(graph, weights, query, m, ed_k=ed_k, greedy_k=greedy_k)
            raw.append((m, s.objective, s.node, s.elapsed, s.fell_back, s.candidate_count))
        except InfeasibleError as exc:
            raw.append((m, math.inf, None, 0.0, exc.fell_back, 0))
    exact = raw[0][1]
    return [CaseResult(case_id, m, obj, node, t, matches(obj, exact), fb, cc)
            for m, obj, node, t, fb, cc in raw]


_WORKER: dict = {}


def _init_worker(graph, weights, methods, ed_k, greedy_k):
    _WORKER.update(graph=graph, weights=weights, methods=methods, ed_k=ed_k, greedy_k=greedy_k)


def _worker_case(item):
    case_id, query = item
    w = _WORKER
    return _run_case(w["graph"], w["weights"], case_id, query, w["methods"], w["ed_k"], w["greedy_k"])


def run_experiment(
    graph: RoadGraph,
    weights: WeightView | None,
    cases: Sequence[MeetupQuery],
    methods: Iterable[str] = METHODS,
    jobs: int = 1,
    warmup: bool = True,
    ed_k: int | None = None,
    greedy_k: int | None = None,
) -> list[CaseResult]:
    """One result per (case, method), ordered by case id then method.

    ``exact`` always runs first in each case since it defines a match.
    Timings cover the solver call only; with ``warmup`` each method runs once
    on the first case beforehand and that run is discarded. ``jobs > 1``
    spreads cases over worker processes; ``jobs = 1`` keeps timing sequential.
    """
    if weights is None:
        weights = distance_weights(graph)
    order = _order(methods)
    if jobs < 1:
        raise ValueError("jobs must be >= 1")
    if not cases:
        return []
    if warmup:
        _run_case(graph, weights, -1, cases[0], order, ed_k, greedy_k)
    if jobs == 1:
        results = []
        for cid, q in enumerate(cases):
            results.extend(_run_case(graph, weights, cid, q, order, ed_k, greedy_k))
        return results
    with ProcessPoolExecutor(jobs, initializer=_init_worker,
                             initargs=(graph, weights, order, ed_k, greedy_k)) as pool:
        chunks = pool.map(_worker_case, enumerate(cases), chunksize=max(1, len(cases) // (4 * jobs)))
        return [r for chunk in chunks for r in chunk]


def dominance_violations(results: Iterable[CaseResult]) -> list[CaseResult]:
    """Rows whose objective is below the exact objective of their case."""
    results = list(results)
    exact = {r.case_id: r.objective for r in results if r.method == "exact"}
    return [r for r in results if r.method != "exact" and r.objective < exact[r.case_id]]


# -- summaries -----------------------------------------------------------------------


@dataclass(frozen=True)
class MethodSummary:
    method: str
    found_optimal: int
    missed: int
    infeasible: int
    accuracy: float
    mean_s: float
    median_s: float
    p90_s: float
    p99_s: float

    @property
    def accuracy_label(self) -> str:
        return f"{self.accuracy:.1f} %"


@dataclass(frozen=True)
class Summary:
    rows: tuple[MethodSummary, ...]

    def __getitem__(self, method: str) -> MethodSummary:
        for r in self.rows:
            if r.method == method:
                return r
        raise KeyError(method)

    def accuracy_table(self) -> list[tuple]:
        """Accuracy columns only (no runtimes), for reproducibility checks."""
        return [(r.method, r.found_optimal, r.missed, r.accuracy_label) for r in self.rows]

    def header(self) -> list[str]:
        return list(TABLE_COLUMNS + RUNTIME_COLUMNS)

    def records(self) -> list[list]:
        return [[r.method, r.found_optimal, r.missed, r.accuracy_label, r.infeasible,
                 r.mean_s, r.median_s, r.p90_s, r.p99_s] for r in self.rows]

    def format(self) -> str:
        head = self.header()
        body = [[str(v) if not isinstance(v, float) else f"{v:.6f}" for v in rec] for rec in self.records()]
        widths = [max(len(h), *(len(b[i]) for b in body)) for i, h in enumerate(head)]
        lines = ["  ".join(h.ljust(w) for h, w in zip(head, widths)).rstrip()]
        lines += ["  ".join(c.ljust(w) for c, w in zip(b, widths)).rstrip() for b in body]
        return "\n".join(lines)


def summarize(results: Sequence[CaseResult]) -> Summary:
    """Per-method found/missed counts, accuracy and runtime statistics.

    Cases the exact solver finds infeasible leave every method's accuracy
    denominator and are counted under ``infeasible`` instead.
    """
    results = list(results)
    if not results:
        raise ValueError("no results to summarize")
    exact = {r.case_id: r for r in results if r.method == "exact"}
    if not exact:
        raise ValueError("results contain no exact baseline rows")
    bad = {cid for cid, r in exact.items() if r.infeasible}
    rows = []
    for m in _order({r.method for r in results}):
        mine = [r for r in results if r.method == m]
        scored = [r for r in mine if r.case_id not in bad]
        found = sum(r.matched_optimal for r in scored)
        missed = len(scored) - found
        times = np.array([r.elapsed_s for r in scored]) if scored else np.array([math.nan])
        acc = 100.0 * found / len(scored) if scored else math.nan
        rows.append(MethodSummary(
            m, found, missed, len(mine) - len(scored), acc,
            float(np.mean(times)), float(np.median(times)),
            float(np.percentile(times, 90)), float(np.percentile(times, 99)),
        ))
    return Summary(tuple(rows))


def export_cdf(results: Iterable[CaseResult], method: str) -> list[tuple[float, float]]:
    """Empirical runtime CDF for ``method``: sorted runtimes with fractions i/n."""
    times = sorted(r.elapsed_s for r in results if r.method == method and not r.infeasible)
    if not times:
        raise ValueError(f"no timed rows for method {method!r}")
    n = len(times)
    # The last fraction is set explicitly so it is exactly 1.0.
    return [(t, (i + 1) / n if i + 1 < n else 1.0) for i, t in enumerate(times)]


# -- CSV output ----------------------------------------------------------------------


def write_results_csv(results: Iterable[CaseResult], fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(RESULT_COLUMNS)
    for r in results:
        w.writerow([r.case_id, r.method, repr(r.objective), "" if r.node is None else r.node,
                    repr(r.elapsed_s), int(r.matched_optimal), int(r.fell_back), r.candidate_count])


def read_results_csv(fh) -> list[CaseResult]:
    out = []
    for row in csv.DictReader(fh):
        out.append(CaseResult(
            int(row["case_id"]), row["method"], float(row["objective"]),
            int(row["node_id"]) if row["node_id"] else None, float(row["elapsed_s"]),
            row["matched_optimal"] == "1", row["fell_back"] == "1", int(row["candidate_count"]),
        ))
    return out


def write_summary_csv(summary: Summary, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(summary.header())
    for rec in summary.records():
        w.writerow([repr(v) if isinstance(v, float) else v for v in rec])


def write_cdf_csv(rows: Iterable[tuple[float, float]], fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(("elapsed_s", "cumulative_fraction"))
    for t, f in rows:
        w.writerow((repr(t), repr(f)))
