"""Real-world data pipeline: trip filtering, hexagonal aggregation into
graph nodes, and external distance-matrix loading.

Trips arrive as lat/lon OD rows; after geofencing and the short-trip
filter they are binned into a flat-top hexagonal grid laid out on a local
azimuthal-equidistant plane around an anchor point.  Non-empty cells
become instance nodes (positions in projected meters), and trip counts
accumulate into the demand table.  Driving-time matrices, when available,
replace the internal distance computation.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from shapely.geometry import Point as ShapelyPoint
from shapely.geometry import Polygon, shape

from microzone.instance import DemandTable, Edge, Node

log = logging.getLogger(__name__)

EARTH_RADIUS_M = 6371008.8
# circumradius approximating the H3 resolution-7 edge length
DEFAULT_HEX_RADIUS_M = 1220.0


@dataclass(frozen=True)
class TripRecord:
    origin_lat: float
    origin_lon: float
    dest_lat: float
    dest_lon: float
    count: float = 1.0


def haversine_m(lat1: float, lon1: float, lat2: float, lon2: float) -> float:
    p1, p2 = math.radians(lat1), math.radians(lat2)
    dlat = math.radians(lat2 - lat1)
    dlon = math.radians(lon2 - lon1)
    a = math.sin(dlat / 2) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dlon / 2) ** 2
    return 2 * EARTH_RADIUS_M * math.asin(math.sqrt(a))


def read_trips_csv(path: str | Path) -> tuple[list[TripRecord], int]:
    """Read `origin_lat,origin_lon,dest_lat,dest_lon[,count]` rows.

    Returns (trips, rejected_count); malformed rows are logged and
    counted, never silently dropped.
    """
    trips: list[TripRecord] = []
    rejected = 0
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.DictReader(fh), start=2):
            try:
                trip = TripRecord(
                    origin_lat=float(row["origin_lat"]),
                    origin_lon=float(row["origin_lon"]),
                    dest_lat=float(row["dest_lat"]),
                    dest_lon=float(row["dest_lon"]),
                    count=float(row["count"]) if row.get("count") not in (None, "") else 1.0,
                )
            except (KeyError, TypeError, ValueError):
                rejected += 1
                log.warning("rejecting malformed trip row %d: %r", lineno, row)
                continue
            if not _coords_valid(trip) or trip.count <= 0:
                rejected += 1
                log.warning("rejecting out-of-range trip row %d: %r", lineno, row)
                continue
            trips.append(trip)
    if rejected:
        log.info("rejected %d of %d trip rows", rejected, rejected + len(trips))
    return trips, rejected


def _coords_valid(t: TripRecord) -> bool:
    return (
        -90 <= t.origin_lat <= 90
        and -90 <= t.dest_lat <= 90
        and -180 <= t.origin_lon <= 180
        and -180 <= t.dest_lon <= 180
    )


def load_boundary(path: str | Path) -> Polygon:
    """Load a GeoJSON Polygon (bare geometry, Feature, or single-feature
    FeatureCollection); coordinates are (lon, lat) per GeoJSON."""
    import json

    doc = json.loads(Path(path).read_text())
    if doc.get("type") == "FeatureCollection":
        doc = doc["features"][0]
    if doc.get("type") == "Feature":
        doc = doc["geometry"]
    poly = shape(doc)
    if not isinstance(poly, Polygon):
        raise ValueError(f"boundary must be a Polygon, got {doc.get('type')}")
    return validate_boundary(poly)


def validate_boundary(poly: Polygon) -> Polygon:
    if not poly.is_valid:
        raise ValueError("boundary polygon is invalid (self-intersecting?)")
    return poly


def geofence_filter(trips: list[TripRecord], boundary: Polygon) -> list[TripRecord]:
    """Keep trips with both endpoints inside or on the boundary."""
    validate_boundary(boundary)
    kept = []
    for t in trips:
        o = ShapelyPoint(t.origin_lon, t.origin_lat)
        d = ShapelyPoint(t.dest_lon, t.dest_lat)
        if boundary.covers(o) and boundary.covers(d):
            kept.append(t)
    return kept


def short_trip_filter(
    trips: list[TripRecord], min_distance_m: float = 500.0
) -> list[TripRecord]:
    """Drop walkable trips: great-circle OD distance strictly below the
    threshold (a trip of exactly 500 m survives)."""
    return [
        t
        for t in trips
        if haversine_m(t.origin_lat, t.origin_lon, t.dest_lat, t.dest_lon)
        >= min_distance_m
    ]


@dataclass(frozen=True)
class HexGrid:
    """Flat-top axial hex grid on a local planar projection.

    The projection is azimuthal-equidistant around the anchor, so cell
    positions come out in meters.  ``circumradius_m`` is the
    center-to-corner distance.
    """

    anchor_lat: float
    anchor_lon: float
    circumradius_m: float = DEFAULT_HEX_RADIUS_M

    def __post_init__(self) -> None:
        if self.circumradius_m <= 0:
            raise ValueError("circumradius must be positive")

    def project(self, lat: float, lon: float) -> tuple[float, float]:
        d = haversine_m(self.anchor_lat, self.anchor_lon, lat, lon)
        if d == 0.0:
            return (0.0, 0.0)
        p1 = math.radians(self.anchor_lat)
        p2 = math.radians(lat)
        dlon = math.radians(lon - self.anchor_lon)
        theta = math.atan2(
            math.sin(dlon) * math.cos(p2),
            math.cos(p1) * math.sin(p2) - math.sin(p1) * math.cos(p2) * math.cos(dlon),
        )
        return (d * math.sin(theta), d * math.cos(theta))

    def cell_of(self, lat: float, lon: float) -> tuple[int, int]:
        x, y = self.project(lat, lon)
        return self.cell_of_xy(x, y)

    def cell_of_xy(self, x: float, y: float) -> tuple[int, int]:
        r = self.circumradius_m
        qf = (2.0 / 3.0) * x / r
        rf = (-x / 3.0 + math.sqrt(3.0) / 3.0 * y) / r
        return _axial_round(qf, rf)

    def cell_center(self, q: int, r: int) -> tuple[float, float]:
        size = self.circumradius_m
        return (size * 1.5 * q, size * math.sqrt(3.0) * (r + q / 2.0))

    @staticmethod
    def neighbors(q: int, r: int) -> list[tuple[int, int]]:
        return [(q + dq, r + dr) for dq, dr in ((1, 0), (1, -1), (0, -1), (-1, 0), (-1, 1), (0, 1))]


def _axial_round(qf: float, rf: float) -> tuple[int, int]:
    # cube rounding: fix whichever coordinate rounded worst
    x, z = qf, rf
    y = -x - z
    rx, ry, rz = round(x), round(y), round(z)
    dx, dy, dz = abs(rx - x), abs(ry - y), abs(rz - z)
    if dx > dy and dx > dz:
        rx = -ry - rz
    elif dy > dz:
        pass  # y is derived; nothing to fix
    else:
        rz = -rx - ry
    return (int(rx), int(rz))


def hex_aggregate(
    trips: list[TripRecord], grid: HexGrid
) -> tuple[list[Node], DemandTable]:
    """Bin trip endpoints into hex cells; non-empty cells become nodes.

    Node ids are assigned in sorted (q, r) order so identical inputs
    always produce identical ids; positions are cell centers in projected
    meters and labels record the axial coordinates.
    """
    volume: dict[tuple[tuple[int, int], tuple[int, int]], float] = {}
    cells: set[tuple[int, int]] = set()
    for t in trips:
        co = grid.cell_of(t.origin_lat, t.origin_lon)
        cd = grid.cell_of(t.dest_lat, t.dest_lon)
        cells.add(co)
        cells.add(cd)
        key = (co, cd)
        volume[key] = volume.get(key, 0.0) + t.count

    ordered = sorted(cells)
    ids = {cell: i for i, cell in enumerate(ordered)}
    nodes = []
    for cell in ordered:
        x, y = grid.cell_center(*cell)
        nodes.append(Node(ids[cell], x, y, label=f"{cell[0]},{cell[1]}"))
    demand: DemandTable = {(ids[o], ids[d]): v for (o, d), v in volume.items()}
    return nodes, demand


def hex_adjacency_edges(nodes: list[Node], grid: HexGrid) -> list[Edge]:
    """Bidirectional edges between axially adjacent occupied cells,
    weighted by center-to-center distance.  Used when no external
    distance matrix is supplied."""
    by_cell = {}
    for node in nodes:
        q, r = (int(t) for t in node.label.split(","))
        by_cell[(q, r)] = node
    edges = []
    for (q, r), node in sorted(by_cell.items()):
        for nq, nr in HexGrid.neighbors(q, r):
            other = by_cell.get((nq, nr))
            if other is None:
                continue
            w = math.dist((node.x, node.y), (other.x, other.y))
            edges.append(Edge(node.id, other.id, w))
    return sorted(edges, key=lambda e: (e.src, e.dst))


def load_distance_matrix(path: str | Path, num_nodes: int) -> np.ndarray:
    """Dense row-major CSV; empty cells mean unreachable (inf).

    Dimensions must match the node count; negative entries are rejected;
    a nonzero diagonal is forced to 0 with a warning.
    """
    rows = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or all(c.strip() == "" for c in row):
                continue
            rows.append([math.inf if c.strip() == "" else float(c) for c in row])
    mat = np.array(rows)
    if mat.shape != (num_nodes, num_nodes):
        raise ValueError(
            f"distance matrix is {mat.shape[0]}x{mat.shape[1]}, expected "
            f"{num_nodes}x{num_nodes}"
        )
    if np.any(mat < 0):
        raise ValueError("distance matrix has negative entries")
    diag = np.diagonal(mat)
    if np.any(diag != 0):
        log.warning("forcing %d nonzero diagonal entries to 0", int(np.sum(diag != 0)))
        np.fill_diagonal(mat, 0.0)
    return mat
