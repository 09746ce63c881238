"""Command-line entry point.

Exit codes: 0 success, 1 usage or input error, 2 infeasible query,
3 venue-service credential or network error. Artifacts go to stdout (or
``--output``); diagnostics go to stderr.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import bench, core, poi, traffic
from .datasets import DC_NODES, DC_SEGMENTS, synthetic_city, write_dataset
from .road_graph import GraphFormatError, GraphValidationError, RoadGraph, load_csv, load_dimacs, snap_to_node
from .shortest_path import WeightView, distance_weights

log = logging.getLogger("meetup")

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_SERVICE = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad arguments; 2 is reserved for infeasible queries here.
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# -- shared loading ------------------------------------------------------------------


def load_graph_args(args) -> RoadGraph:
    dimacs = args.graph is not None or args.coords is not None
    csv_ = args.nodes is not None or args.edges is not None
    fmt = args.format
    if fmt is None:
        if dimacs == csv_:
            raise UsageError("give either --graph/--coords (dimacs) or --nodes/--edges (csv)")
        fmt = "dimacs" if dimacs else "csv"
    if fmt == "dimacs":
        if csv_ or args.graph is None or args.coords is None:
            raise UsageError("dimacs format needs --graph and --coords only")
        return load_dimacs(args.graph, args.coords, args.weight_kind)
    if dimacs or args.nodes is None or args.edges is None:
        raise UsageError("csv format needs --nodes and --edges only")
    return load_csv(args.nodes, args.edges)


def build_weights(graph: RoadGraph, metric: str, choice: str, seed: int | None) -> WeightView:
    if metric == "distance":
        if choice != "none":
            raise UsageError("--traffic applies to --metric time only")
        return distance_weights(graph)
    if choice == "none":
        scenario = traffic.TrafficScenario.free_flow(graph)
    elif choice == "hierarchical":
        scenario = traffic.hierarchical_scenario(graph)
    elif choice == "random":
        scenario = traffic.random_scenario(graph, 0 if seed is None else seed)
    else:
        scenario = traffic.load_scenario(choice, graph)
    return traffic.time_weights(graph, scenario)


def _endpoint(graph: RoadGraph, labels: dict[str, int], ref, what: str) -> int:
    if isinstance(ref, dict) and "node" in ref:
        key = str(ref["node"])
        if key not in labels:
            raise UsageError(f"{what}: node {key} is not in the graph")
        return labels[key]
    if isinstance(ref, dict) and "lonlat" in ref:
        lon, lat = (float(v) for v in ref["lonlat"])
        return snap_to_node(graph, (lon, lat))
    raise UsageError(f"{what}: expected {{\"node\": id}} or {{\"lonlat\": [lon, lat]}}")


def parse_query(data: dict, graph: RoadGraph, metric: str | None = None) -> core.MeetupQuery:
    """Query JSON -> MeetupQuery. ``node`` values are node ids as written in the graph files."""
    if not isinstance(data, dict) or not isinstance(data.get("objects"), list):
        raise UsageError("query must be an object with an 'objects' list")
    labels = {lab: i for i, lab in enumerate(graph.node_labels, 1)}
    objs = []
    for k, o in enumerate(data["objects"]):
        oid = str(o.get("id", k + 1))
        dest = o.get("destination")
        objs.append(core.MovingObject(
            oid,
            _endpoint(graph, labels, o.get("origin"), f"object {oid} origin"),
            None if dest is None else _endpoint(graph, labels, dest, f"object {oid} destination"),
            float(o.get("w_out", 1.0)),
            float(o.get("w_back", 1.0)),
        ))
    mode = data.get("mode", core.INTERMEDIATE)
    return core.MeetupQuery(tuple(objs), mode, metric or data.get("metric", "distance"))


def _read_query(path, graph, metric):
    with open(path, encoding="utf-8") as fh:
        return parse_query(json.load(fh), graph, metric)


def _weights_fingerprint(weights: WeightView) -> str:
    return hashlib.sha256(np.asarray(weights.costs).tobytes()).hexdigest()


def load_matrix(weights: WeightView, path):
    from .matrix import MAX_MATRIX_NODES, load_or_build

    if weights.graph.n_nodes > MAX_MATRIX_NODES:
        raise UsageError(f"--cache-matrix supports at most {MAX_MATRIX_NODES} nodes")
    path = Path(path)
    key_path = path.with_name(path.name + ".key")
    key = _weights_fingerprint(weights)
    # A cache built for other edge costs (metric or scenario) is stale.
    if path.exists() and (not key_path.exists() or key_path.read_text().strip() != key):
        log.warning("matrix cache %s does not match these edge costs; rebuilding", path)
        path.unlink()
    m = load_or_build(weights, path)
    key_path.write_text(key + "\n")
    return m


def _write(text: str, output) -> None:
    if not text.endswith("\n"):
        text += "\n"
    if output in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(output).write_text(text, encoding="utf-8")


def _json(obj) -> str:
    # Infinite values are not valid JSON; encode them as null.
    def clean(v):
        if isinstance(v, float) and not math.isfinite(v):
            return None
        if isinstance(v, dict):
            return {k: clean(x) for k, x in v.items()}
        if isinstance(v, (list, tuple)):
            return [clean(x) for x in v]
        return v

    return json.dumps(clean(obj), indent=2)


def _solve_from_args(args):
    graph = load_graph_args(args)
    metric = args.metric
    query = _read_query(args.query, graph, metric)
    weights = build_weights(graph, query.metric, args.traffic, args.seed)
    matrix = load_matrix(weights, args.cache_matrix) if getattr(args, "cache_matrix", None) else None
    sol = core.solve(graph, weights, query, args.method, matrix=matrix,
                     ed_k=args.ed_k, greedy_k=args.greedy_k)
    return graph, query, sol


# -- commands ------------------------------------------------------------------------


def cmd_solve(args) -> int:
    graph, query, sol = _solve_from_args(args)
    out = sol.to_dict(graph)
    out["metric"] = query.metric
    out["mode"] = query.mode
    _write(_json(out), args.output)
    return EXIT_OK


def cmd_surface(args) -> int:
    graph = load_graph_args(args)
    query = _read_query(args.query, graph, args.metric)
    weights = build_weights(graph, query.metric, args.traffic, args.seed)
    rows = core.cost_surface(graph, weights, query)
    if not rows:
        raise core.InfeasibleError("no node is reachable by every object")
    if args.output in (None, "-"):
        core.write_surface_csv(rows, sys.stdout)
    else:
        with open(args.output, "w", encoding="utf-8", newline="") as fh:
            core.write_surface_csv(rows, fh)
    return EXIT_OK


def cmd_poi(args) -> int:
    if args.venues is None and args.venue_endpoint is None:
        raise UsageError("give --venues FILE or --venue-endpoint URL")
    if args.point is not None:
        point = tuple(float(v) for v in args.point.split(","))
        if len(point) != 2:
            raise UsageError("--point must be LON,LAT")
        meetup = None
    else:
        if args.query is None:
            raise UsageError("give --query with a graph, or --point LON,LAT")
        graph, _, sol = _solve_from_args(args)
        point = graph.lonlat(sol.node)
        meetup = sol.to_dict(graph)
    if args.venues is not None:
        source = poi.VenueSource("local_file", args.venues)
    else:
        source = poi.VenueSource("remote_service", args.venue_endpoint)
    venues = poi.venues_near(source, point, args.poi_k)
    ranked = poi.rank_nearby(venues, point, args.poi_k, args.weight_popularity)
    out = {
        "point": {"lon": point[0], "lat": point[1]},
        "meetup": meetup,
        "venues": [
            {"rank": i, "id": r.venue.id, "name": r.venue.name, "lon": r.venue.lon, "lat": r.venue.lat,
             "category": r.venue.category, "popularity": r.venue.popularity,
             "distance_m": r.distance_m, "score": r.score}
            for i, r in enumerate(ranked, 1)
        ],
    }
    _write(_json(out), args.output)
    return EXIT_OK


def cmd_bench(args) -> int:
    if args.cases < 1:
        raise UsageError("--cases must be >= 1")
    if args.jobs < 1:
        raise UsageError("--jobs must be >= 1")
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    unknown = sorted(set(methods) - set(core.METHODS))
    if unknown:
        raise UsageError(f"unknown method(s) {', '.join(unknown)}")
    graph = load_graph_args(args)
    weights = build_weights(graph, args.metric or "distance", args.traffic, args.seed)
    cases = bench.gen_cases(graph, args.cases, args.objects, args.seed, weights)
    results = bench.run_experiment(graph, weights, cases, methods, jobs=args.jobs,
                                   warmup=not args.no_warmup, ed_k=args.ed_k, greedy_k=args.greedy_k)
    summary = bench.summarize(results)
    if args.out_dir is not None:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "results.csv", "w", encoding="utf-8", newline="") as fh:
            bench.write_results_csv(results, fh)
        with open(out / "summary.csv", "w", encoding="utf-8", newline="") as fh:
            bench.write_summary_csv(summary, fh)
        for row in summary.rows:
            try:
                cdf = bench.export_cdf(results, row.method)
            except ValueError:
                continue
            with open(out / f"cdf_{row.method}.csv", "w", encoding="utf-8", newline="") as fh:
                bench.write_cdf_csv(cdf, fh)
    _write(summary.format(), args.output)
    return EXIT_OK


def cmd_make_dataset(args) -> int:
    graph = synthetic_city(args.nodes, args.segments, args.seed)
    paths = write_dataset(graph, args.out_dir, args.stem)
    _write(_json({k: str(v) for k, v in paths.items()}
                 | {"nodes": graph.n_nodes, "segments": graph.segment_count, "arcs": graph.n_edges}), None)
    return EXIT_OK


# -- parser --------------------------------------------------------------------------


def _graph_args(p):
    g = p.add_argument_group("graph (dimacs: --graph/--coords, csv: --nodes/--edges)")
    g.add_argument("--graph", help="DIMACS .gr file")
    g.add_argument("--coords", help="DIMACS .co file")
    g.add_argument("--nodes", help="node CSV (node_id,lon,lat)")
    g.add_argument("--edges", help="edge CSV (edge_id,u,v,length_m,road_class,max_speed_kmh,oneway)")
    g.add_argument("--format", choices=("dimacs", "csv"), help="graph format (default: inferred)")
    g.add_argument("--weight-kind", choices=("distance", "time"), default="distance",
                   help="meaning of DIMACS arc weights (default: distance)")


def _weight_args(p, metric_default=None):
    p.add_argument("--metric", choices=("distance", "time"), default=metric_default,
                   help="cost metric (default: the query's, else distance)")
    p.add_argument("--traffic", default="none",
                   help="none, hierarchical, random, or a scenario JSON path (time metric only; default: none)")
    p.add_argument("--seed", type=int, default=None, help="seed for --traffic random (default 0)")


def _solver_args(p):
    p.add_argument("--query", help="query JSON file")
    p.add_argument("--method", choices=core.METHODS, default="exact", help="solver (default: exact)")
    p.add_argument("--ed-k", type=int, default=None, help="ED candidate count (default: ceil(|V|/10))")
    p.add_argument("--greedy-k", type=int, default=None, help="greedy neighbourhood size (default: 32)")
    p.add_argument("--cache-matrix", default=None,
                   help="all-pairs cost cache (.npy), built on first use; graphs up to 20000 nodes")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="meetup", description="Meetup location queries on road networks.")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", help="solve one meetup query and print the solution JSON")
    _graph_args(p)
    _weight_args(p)
    _solver_args(p)
    p.add_argument("--output", "-o", help="output file (default: stdout)")
    p.set_defaults(func=cmd_solve, need_query=True)

    p = sub.add_parser("surface", help="objective at every node, as CSV")
    _graph_args(p)
    _weight_args(p)
    p.add_argument("--query", help="query JSON file")
    p.add_argument("--output", "-o", help="output file (default: stdout)")
    p.set_defaults(func=cmd_surface, need_query=True)

    p = sub.add_parser("poi", help="rank venues around the meetup node (or --point)")
    _graph_args(p)
    _weight_args(p)
    _solver_args(p)
    p.add_argument("--point", help="LON,LAT to rank around instead of solving a query")
    p.add_argument("--venues", help="venue CSV (id,name,lon,lat,category,popularity)")
    p.add_argument("--venue-endpoint", help="remote venue-search URL; key from $VENUE_API_KEY")
    p.add_argument("-k", "--poi-k", type=int, default=10, help="venues to return (default: 10)")
    p.add_argument("--weight-popularity", type=float, default=0.0,
                   help="popularity weight in [0, 1] (default: 0, distance only)")
    p.add_argument("--output", "-o", help="output file (default: stdout)")
    p.set_defaults(func=cmd_poi, need_query=False)

    p = sub.add_parser("bench", help="random-case benchmark; prints the accuracy and runtime summary")
    _graph_args(p)
    _weight_args(p)
    p.add_argument("--cases", type=int, default=1000, help="number of cases (default: 1000)")
    p.add_argument("--objects", type=int, default=2, help="objects per case (default: 2)")
    p.add_argument("--methods", default="sp,ch,dp,rt,ed",
                   help="comma-separated heuristics; exact always runs (default: sp,ch,dp,rt,ed)")
    p.add_argument("--jobs", type=int, default=1, help="worker processes (default 1 = sequential timing)")
    p.add_argument("--no-warmup", action="store_true", help="skip the discarded warm-up run")
    p.add_argument("--ed-k", type=int, default=None)
    p.add_argument("--greedy-k", type=int, default=None)
    p.add_argument("--out-dir", help="write results.csv, summary.csv and cdf_<method>.csv here")
    p.add_argument("--output", "-o", help="summary table file (default: stdout)")
    p.set_defaults(func=cmd_bench, need_query=False)

    p = sub.add_parser("make-dataset", help="write a seeded synthetic road network (DIMACS and CSV)")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--stem", default="city")
    p.add_argument("--nodes", type=int, default=DC_NODES)
    p.add_argument("--segments", type=int, default=DC_SEGMENTS)
    p.add_argument("--seed", type=int, default=9559)
    p.set_defaults(func=cmd_make_dataset, need_query=False)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # --help, or a usage error already reported
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        if args.need_query and args.query is None:
            raise UsageError("--query is required")
        return args.func(args)
    except UsageError as exc:
        print(f"meetup: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except core.InfeasibleError as exc:
        print(f"meetup: infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except poi.VenueFormatError as exc:
        print(f"meetup: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except poi.VenueError as exc:
        print(f"meetup: venue service: {exc}", file=sys.stderr)
        return EXIT_SERVICE
    except (GraphFormatError, GraphValidationError, json.JSONDecodeError, OSError,
            KeyError, ValueError) as exc:
        print(f"meetup: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
