"""Problem instance: road graph, demand table, distances, and the
served-demand objective.

Nodes are dense integer ids ``0..n-1``.  The demand table is a sparse
``{(origin, dest): volume}`` map over ordered pairs (self pairs allowed).
Distances are an ``n x n`` float matrix of shortest-path distances with
``inf`` for unreachable pairs; it may be asymmetric and can either be
computed from the edge list or supplied externally (e.g. driving times).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.sparse.csgraph import csgraph_from_dense, dijkstra

DemandTable = dict[tuple[int, int], float]


@dataclass(frozen=True)
class Node:
    id: int
    x: float
    y: float
    label: str | None = None


@dataclass(frozen=True)
class Edge:
    src: int
    dst: int
    weight: float


@dataclass(eq=False)
class Instance:
    """The full problem input: graph, demand, diameter bound D, budget m.

    ``distances`` holds an externally supplied matrix; when absent the
    matrix is computed from the edges on first use and cached.  Treat
    instances as immutable after construction.
    """

    nodes: list[Node]
    edges: list[Edge]
    demand: DemandTable
    max_diameter: float
    num_zones: int
    units: str = "units"
    distances: np.ndarray | None = None
    _dist_cache: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self) -> None:
        n = len(self.nodes)
        ids = [node.id for node in self.nodes]
        if ids != list(range(n)):
            raise ValueError("node ids must be dense 0..n-1 in order")
        for node in self.nodes:
            if not (math.isfinite(node.x) and math.isfinite(node.y)):
                raise ValueError(f"node {node.id} has non-finite position")
        seen: set[tuple[int, int]] = set()
        for e in self.edges:
            if e.src == e.dst:
                raise ValueError(f"self-loop edge at node {e.src}")
            if not 0 <= e.src < n or not 0 <= e.dst < n:
                raise ValueError(f"edge ({e.src},{e.dst}) references unknown node")
            if e.weight < 0:
                raise ValueError(f"negative edge weight on ({e.src},{e.dst})")
            if (e.src, e.dst) in seen:
                raise ValueError(f"duplicate edge ({e.src},{e.dst})")
            seen.add((e.src, e.dst))
        for (i, j), d in self.demand.items():
            if not 0 <= i < n or not 0 <= j < n:
                raise ValueError(f"demand entry ({i},{j}) references unknown node")
            if d < 0:
                raise ValueError(f"negative demand on ({i},{j})")
        if not self.max_diameter > 0:
            raise ValueError("max_diameter must be positive")
        if self.num_zones < 1:
            raise ValueError("num_zones must be >= 1")
        if self.distances is not None:
            mat = np.asarray(self.distances, dtype=float)
            if mat.shape != (n, n):
                raise ValueError(f"distance matrix shape {mat.shape} != ({n},{n})")
            if np.any(mat < 0):
                raise ValueError("distance matrix has negative entries")
            mat = mat.copy()
            np.fill_diagonal(mat, 0.0)
            mat.setflags(write=False)
            object.__setattr__(self, "distances", mat)

    @property
    def num_nodes(self) -> int:
        return len(self.nodes)

    def positions(self) -> np.ndarray:
        return np.array([[node.x, node.y] for node in self.nodes], dtype=float)

    def distance_matrix(self) -> np.ndarray:
        """Supplied distances if present, else shortest paths over the edges."""
        if self.distances is not None:
            return self.distances
        if self._dist_cache is None:
            self._dist_cache = all_pairs_shortest_paths(self)
        return self._dist_cache


def all_pairs_shortest_paths(instance: Instance) -> np.ndarray:
    """Directed all-pairs shortest-path distances over the instance edges.

    Entry (i, j) is the minimum total weight of any directed path i -> j,
    ``inf`` when unreachable, 0 on the diagonal.  Rejects negative weights
    (already enforced by Instance validation).
    """
    n = instance.num_nodes
    dense = np.full((n, n), np.inf)
    for e in instance.edges:
        if e.weight < 0:
            raise ValueError(f"negative edge weight on ({e.src},{e.dst})")
        dense[e.src, e.dst] = min(dense[e.src, e.dst], e.weight)
    graph = csgraph_from_dense(dense, null_value=np.inf)
    dist = dijkstra(graph, directed=True)
    np.fill_diagonal(dist, 0.0)
    dist.setflags(write=False)
    return dist


def total_demand(demand: DemandTable) -> float:
    """Sum of all demand entries."""
    return float(sum(demand.values()))


def served_demand(demand: DemandTable, zones: Iterable[Sequence[int]]) -> float:
    """Demand over ordered pairs (i, j), including i=j, that are jointly
    covered by at least one zone; each pair counts once even when several
    zones cover it."""
    zone_sets = [frozenset(z) for z in zones]
    if not zone_sets:
        return 0.0
    covered: set[tuple[int, int]] = set()
    for zs in zone_sets:
        for i in zs:
            for j in zs:
                covered.add((i, j))
    return float(sum(d for pair, d in demand.items() if pair in covered))


def zone_diameter(zone: Sequence[int], distances: np.ndarray) -> float:
    """Longest pairwise distance within the zone, taking the worse of the
    two directions for each pair; 0 for singletons."""
    ids = list(zone)
    if not ids:
        raise ValueError("zone must be nonempty")
    if len(ids) == 1:
        return 0.0
    sub = distances[np.ix_(ids, ids)]
    return float(np.maximum(sub, sub.T).max())


# ---------------------------------------------------------------------------
# Instance JSON format
#
# {"units": "meters",
#  "nodes": [{"id": 0, "x": 1.0, "y": 2.0, "label": "0,1"}, ...],
#  "edges": [{"from": 0, "to": 1, "weight": 1.5}, ...],
#  "demand": [[0, 1, 2.5], ...],
#  "distances": [[0, null, ...], ...]}     # optional, null = unreachable
#
# The diameter bound D and zone budget m are run parameters, not part of
# the file.
# ---------------------------------------------------------------------------


def instance_to_dict(instance: Instance) -> dict:
    doc: dict = {
        "units": instance.units,
        "nodes": [
            {"id": n.id, "x": n.x, "y": n.y, **({"label": n.label} if n.label is not None else {})}
            for n in instance.nodes
        ],
        "edges": [{"from": e.src, "to": e.dst, "weight": e.weight} for e in instance.edges],
        "demand": [[i, j, d] for (i, j), d in sorted(instance.demand.items())],
    }
    if instance.distances is not None:
        doc["distances"] = [
            [None if math.isinf(v) else v for v in row] for row in instance.distances.tolist()
        ]
    return doc


def instance_from_dict(doc: dict, max_diameter: float, num_zones: int) -> Instance:
    nodes = [Node(n["id"], float(n["x"]), float(n["y"]), n.get("label")) for n in doc["nodes"]]
    edges = [Edge(e["from"], e["to"], float(e["weight"])) for e in doc["edges"]]
    demand = {(int(i), int(j)): float(d) for i, j, d in doc["demand"]}
    distances = None
    if doc.get("distances") is not None:
        distances = np.array(
            [[np.inf if v is None else float(v) for v in row] for row in doc["distances"]]
        )
    return Instance(
        nodes=nodes,
        edges=edges,
        demand=demand,
        max_diameter=max_diameter,
        num_zones=num_zones,
        units=doc.get("units", "units"),
        distances=distances,
    )


def save_instance(instance: Instance, path: str | Path) -> None:
    Path(path).write_text(json.dumps(instance_to_dict(instance)) + "\n")


def load_instance(path: str | Path, max_diameter: float, num_zones: int) -> Instance:
    doc = json.loads(Path(path).read_text())
    return instance_from_dict(doc, max_diameter=max_diameter, num_zones=num_zones)
