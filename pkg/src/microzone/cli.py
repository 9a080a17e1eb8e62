"""Command-line front end for the two-phase zoning pipeline.

The phases are file-mediated (instance JSON -> clique list JSON ->
solution JSON) so external MILP solvers can be swapped in through the LP
export.  Progress goes to stderr; results go to files or stdout.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from microzone import baseline as baseline_mod
from microzone import cliquegen, coverage, geometry, ingest, report, synth
from microzone.instance import (
    Instance,
    instance_from_dict,
    load_instance,
    save_instance,
    served_demand,
    total_demand,
)

log = logging.getLogger("microzone")


def _parse_floats(text: str) -> list[float]:
    return [float(t) for t in text.split(",") if t.strip()]


def _parse_ints(text: str) -> list[int]:
    return [int(t) for t in text.split(",") if t.strip()]


def cmd_synth(args: argparse.Namespace) -> int:
    params = synth.SynthParams(
        n=args.n,
        seed=args.seed,
        box=args.box,
        p_oneway=args.p_oneway,
        p_prune=args.p_prune,
        demand_law=args.demand_law,
    )
    inst = synth.generate(params)
    save_instance(inst, args.out)
    log.info("wrote %d-node instance to %s", inst.num_nodes, args.out)
    return 0


def cmd_ingest(args: argparse.Namespace) -> int:
    trips, rejected = ingest.read_trips_csv(args.trips)
    log.info("read %d trips (%d rejected)", len(trips), rejected)
    boundary = None
    if args.boundary:
        boundary = ingest.load_boundary(args.boundary)
        trips = ingest.geofence_filter(trips, boundary)
        log.info("%d trips inside the boundary", len(trips))
    trips = ingest.short_trip_filter(trips, args.min_trip_distance)
    log.info("%d trips after the short-trip filter", len(trips))
    if not trips:
        log.error("no trips survive filtering")
        return 1

    if args.anchor:
        lat, lon = (float(t) for t in args.anchor.split(","))
    elif boundary is not None:
        lon, lat = boundary.centroid.x, boundary.centroid.y
    else:
        lat = sum(t.origin_lat for t in trips) / len(trips)
        lon = sum(t.origin_lon for t in trips) / len(trips)
    grid = ingest.HexGrid(anchor_lat=lat, anchor_lon=lon, circumradius_m=args.hex_radius)

    nodes, demand = ingest.hex_aggregate(trips, grid)
    edges = ingest.hex_adjacency_edges(nodes, grid)
    distances = None
    units = "meters"
    if args.distances:
        distances = ingest.load_distance_matrix(args.distances, len(nodes))
        units = "seconds"
    inst = Instance(
        nodes=nodes,
        edges=edges,
        demand=demand,
        max_diameter=1.0,  # placeholder; D is a run parameter, not stored
        num_zones=1,
        units=units,
        distances=distances,
    )
    save_instance(inst, args.out)
    log.info("wrote %d hex-cell nodes, %d edges to %s", len(nodes), len(edges), args.out)
    return 0


def cmd_cliques(args: argparse.Namespace) -> int:
    inst = load_instance(args.instance, max_diameter=args.max_diameter, num_zones=1)
    cliques = cliquegen.clique_gen(
        inst,
        eps=args.eps,
        max_cliques=args.max_cliques,
        connectivity_filter=args.connectivity_filter,
    )
    cliquegen.save_cliques(cliques, args.out)
    counts = cliquegen.clique_count_by_cardinality(cliques)
    log.info(
        "generated %d cliques in %.2fs (by cardinality: %s)",
        len(cliques),
        cliques.wall_time_s,
        counts,
    )
    print(f"{len(cliques)} cliques, wall time {cliques.wall_time_s:.2f}s")
    for card, count in counts.items():
        print(f"  cardinality {card}: {count}")
    return 0


def cmd_solve(args: argparse.Namespace) -> int:
    cliques = cliquegen.load_cliques(args.cliques)
    inst = load_instance(
        args.instance, max_diameter=cliques.max_diameter, num_zones=args.zones
    )
    if cliques.num_nodes != inst.num_nodes:
        log.error(
            "clique list was generated for %d nodes but instance has %d",
            cliques.num_nodes,
            inst.num_nodes,
        )
        return 1
    model = coverage.build_model(inst, cliques, prune_dominated=not args.no_dominance)
    if args.export_lp:
        coverage.export_lp(model, args.export_lp)
        log.info("wrote LP model to %s", args.export_lp)
    solution = coverage.solve_exact(
        model, time_limit=args.time_limit, gap_tolerance=args.gap
    )
    coverage.save_solution(solution, args.out)
    total = total_demand(inst.demand)
    ratio = solution.objective / total if total > 0 else 0.0
    log.info(
        "%s: objective %.6f (%.2f%% of demand) in %.2fs",
        solution.status,
        solution.objective,
        100 * ratio,
        solution.wall_time_s,
    )
    print(
        f"status={solution.status} objective={solution.objective:.6f} "
        f"served_ratio={ratio:.4f} gap={solution.gap:.6f}"
    )
    return 0


def cmd_baseline(args: argparse.Namespace) -> int:
    inst = load_instance(
        args.instance, max_diameter=args.max_diameter, num_zones=args.zones
    )
    zones = baseline_mod.simple_zoning(inst)
    served = served_demand(inst.demand, zones)
    solution = coverage.Solution(
        selected=[],
        zones=zones,
        objective=served,
        status="heuristic",
    )
    coverage.save_solution(solution, args.out)
    total = total_demand(inst.demand)
    ratio = served / total if total > 0 else 0.0
    print(f"status=heuristic objective={served:.6f} served_ratio={ratio:.4f}")
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    rows = synth.experiment_grid(
        n_values=_parse_ints(args.n_values),
        d_values=_parse_floats(args.d_values),
        num_zones=args.zones,
        seeds=_parse_ints(args.seeds),
        workers=args.threads,
        time_limit=args.time_limit,
    )
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    report.write_grid_csv(rows, out_dir / "grid.csv")
    report.write_summary_md(rows, out_dir / "summary.md")
    figures = report.render_heatmaps(rows, out_dir)
    stats = report.summarize(rows)
    print(
        f"{stats['rows']} grid rows; mean improvement "
        f"{100 * stats['mean_improvement']:.2f}%, max "
        f"{100 * stats['max_improvement']:.2f}%, exact>=baseline in "
        f"{stats['rows'] - stats['violations']}/{stats['rows']} cells"
    )
    print(f"wrote {out_dir / 'grid.csv'}, {out_dir / 'summary.md'}")
    for fig in figures:
        print(f"wrote {fig}")
    return 0


def node_incident_demand(inst: Instance, node_id: int) -> float:
    out_d = sum(d for (i, _), d in inst.demand.items() if i == node_id)
    in_d = sum(d for (_, j), d in inst.demand.items() if j == node_id)
    return out_d + in_d - inst.demand.get((node_id, node_id), 0.0)


def solution_geojson(inst: Instance, zones: list[tuple[int, ...]]) -> dict:
    """FeatureCollection: one hull feature per zone plus one point per
    node carrying its total incident demand.  Zones with fewer than three
    non-collinear members degrade to LineString/Point features."""
    features = []
    for zi, zone in enumerate(zones):
        pts = [(inst.nodes[i].x, inst.nodes[i].y) for i in zone]
        hull = geometry.convex_hull(pts)
        verts = [list(v) for v in hull.vertices]
        if len(verts) >= 3:
            geom = {"type": "Polygon", "coordinates": [verts + [verts[0]]]}
        elif len(verts) == 2:
            geom = {"type": "LineString", "coordinates": verts}
        else:
            geom = {"type": "Point", "coordinates": verts[0]}
        features.append(
            {
                "type": "Feature",
                "geometry": geom,
                "properties": {
                    "zone": zi,
                    "members": list(zone),
                    "demand_served": served_demand(inst.demand, [zone]),
                },
            }
        )
    for node in inst.nodes:
        features.append(
            {
                "type": "Feature",
                "geometry": {"type": "Point", "coordinates": [node.x, node.y]},
                "properties": {
                    "node": node.id,
                    "label": node.label,
                    "incident_demand": node_incident_demand(inst, node.id),
                },
            }
        )
    return {"type": "FeatureCollection", "features": features}


def cmd_export_geojson(args: argparse.Namespace) -> int:
    solution = coverage.load_solution(args.solution)
    doc = json.loads(Path(args.instance).read_text())
    inst = instance_from_dict(doc, max_diameter=1.0, num_zones=1)  # D/m unused here
    for zone in solution.zones:
        for i in zone:
            if not 0 <= i < inst.num_nodes:
                log.error("solution references unknown node %d", i)
                return 1
    collection = solution_geojson(inst, solution.zones)
    Path(args.out).write_text(json.dumps(collection) + "\n")
    log.info("wrote %d features to %s", len(collection["features"]), args.out)
    return 0


def build_parser(config: dict | None = None) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="microzone",
        description="Design micro-transit service zones by candidate-zone "
        "enumeration and exact weighted maximum coverage.",
    )
    parser.add_argument("--config", help="JSON file with per-subcommand flag defaults")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)
    config = config or {}

    configured: list[tuple[argparse.ArgumentParser, dict]] = []

    def add(name: str, func, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text)
        p.set_defaults(func=func)
        if name in config:
            p.set_defaults(**config[name])
            configured.append((p, config[name]))
        return p

    p = add("synth", cmd_synth, "generate a synthetic pruned-Delaunay instance")
    p.add_argument("--n", type=int, required=True, help="node count (>= 3)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--box", type=float, default=10.0)
    p.add_argument("--p-oneway", type=float, default=0.2)
    p.add_argument("--p-prune", type=float, default=0.2)
    p.add_argument("--demand-law", default="uniform(0,1)")
    p.add_argument("--out", required=True)

    p = add("ingest", cmd_ingest, "build an instance from trip records")
    p.add_argument("--trips", required=True, help="trip CSV")
    p.add_argument("--boundary", help="GeoJSON polygon geofence")
    p.add_argument("--distances", help="driving-time matrix CSV")
    p.add_argument("--hex-radius", type=float, default=ingest.DEFAULT_HEX_RADIUS_M)
    p.add_argument("--anchor", help="projection anchor 'lat,lon'")
    p.add_argument("--min-trip-distance", type=float, default=500.0)
    p.add_argument("--out", required=True)

    p = add("cliques", cmd_cliques, "enumerate candidate zones")
    p.add_argument("--instance", required=True)
    p.add_argument("--max-diameter", type=float, required=True)
    p.add_argument("--eps", type=float, default=geometry.DEFAULT_EPS)
    p.add_argument("--max-cliques", type=int, default=10_000_000)
    p.add_argument("--connectivity-filter", action="store_true")
    p.add_argument("--out", required=True)

    p = add("solve", cmd_solve, "select optimal zones from a clique list")
    p.add_argument("--instance", required=True)
    p.add_argument("--cliques", required=True)
    p.add_argument("--zones", type=int, required=True)
    p.add_argument("--time-limit", type=float, default=600.0)
    p.add_argument("--gap", type=float, default=0.0)
    p.add_argument("--no-dominance", action="store_true")
    p.add_argument("--export-lp", help="also write the model in LP format")
    p.add_argument("--out", required=True)

    p = add("baseline", cmd_baseline, "run the SimpleZoning heuristic")
    p.add_argument("--instance", required=True)
    p.add_argument("--zones", type=int, required=True)
    p.add_argument("--max-diameter", type=float, required=True)
    p.add_argument("--out", required=True)

    p = add("report", cmd_report, "run the sensitivity grid and render reports")
    p.add_argument("--n-values", default="50,100,150,200")
    p.add_argument("--d-values", default="1.5,2,2.5,3")
    p.add_argument("--zones", type=int, default=4)
    p.add_argument("--seeds", default="0,1,2,3,4")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--time-limit", type=float, default=600.0)
    p.add_argument("--out-dir", required=True)

    p = add("export-geojson", cmd_export_geojson, "render zones as GeoJSON")
    p.add_argument("--instance", required=True)
    p.add_argument("--solution", required=True)
    p.add_argument("--out", required=True)

    # a value supplied through --config satisfies a required option
    for p, section in configured:
        for action in p._actions:
            if action.required and action.dest in section:
                action.required = False

    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    config = {}
    if "--config" in argv:
        cfg_path = argv[argv.index("--config") + 1]
        config = json.loads(Path(cfg_path).read_text())
    parser = build_parser(config)
    args = parser.parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except Exception as exc:  # CLI boundary: fail with a diagnostic, not a traceback
        log.error("%s", exc, exc_info=args.verbose)
        return 1


if __name__ == "__main__":
    sys.exit(main())
