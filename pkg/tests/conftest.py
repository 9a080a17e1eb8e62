"""Shared fixtures and independent oracles used across the test suite."""

from __future__ import annotations

import itertools
import math

import numpy as np
import pytest

from microzone import geometry
from microzone.instance import Edge, Instance, Node


def complete_euclidean_instance(
    points: np.ndarray,
    max_diameter: float,
    demand: dict | None = None,
    num_zones: int = 1,
) -> Instance:
    """Complete bidirectional graph with Euclidean weights: shortest-path
    distances equal straight-line distances, so hull containment implies
    shareability (Euclidean-consistent)."""
    n = len(points)
    nodes = [Node(i, float(points[i][0]), float(points[i][1])) for i in range(n)]
    edges = [
        Edge(i, j, float(math.dist(points[i], points[j])))
        for i in range(n)
        for j in range(n)
        if i != j
    ]
    return Instance(
        nodes=nodes,
        edges=edges,
        demand=demand or {},
        max_diameter=max_diameter,
        num_zones=num_zones,
    )


def line_instance(max_diameter: float, demand: dict | None = None, num_zones: int = 1) -> Instance:
    """Four nodes at x = 0, 1, 2, 3, complete bidirectional, Euclidean."""
    pts = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [3.0, 0.0]])
    return complete_euclidean_instance(pts, max_diameter, demand, num_zones)


def floyd_warshall(num_nodes: int, edges: list[Edge]) -> np.ndarray:
    """Independent all-pairs shortest-path oracle."""
    dist = np.full((num_nodes, num_nodes), np.inf)
    np.fill_diagonal(dist, 0.0)
    for e in edges:
        dist[e.src, e.dst] = min(dist[e.src, e.dst], e.weight)
    for k in range(num_nodes):
        for i in range(num_nodes):
            for j in range(num_nodes):
                via = dist[i, k] + dist[k, j]
                if via < dist[i, j]:
                    dist[i, j] = via
    return dist


def brute_force_cliques(inst: Instance, eps: float = 1e-9) -> set[tuple[int, ...]]:
    """Every nonempty subset that is D-bounded and hull-closed, by direct
    enumeration (usable up to |V| ~ 14)."""
    n = inst.num_nodes
    dist = inst.distance_matrix()
    sym = np.maximum(dist, dist.T)
    pos = [(node.x, node.y) for node in inst.nodes]
    D = inst.max_diameter
    result = set()
    for r in range(1, n + 1):
        for combo in itertools.combinations(range(n), r):
            if sym[np.ix_(combo, combo)].max() > D:
                continue
            hull = geometry.convex_hull([pos[i] for i in combo])
            closed = True
            for v in range(n):
                if v in combo:
                    continue
                if all(sym[v, u] <= D for u in combo) and geometry.point_in_hull(
                    pos[v], hull, eps
                ):
                    closed = False
                    break
            if closed:
                result.add(combo)
    return result


def random_coverage_model_inputs(rng: np.random.Generator, max_candidates: int = 25):
    """Random instance + candidate list for solver cross-checks."""
    n = int(rng.integers(5, 15))
    ncand = int(rng.integers(2, max_candidates + 1))
    m = int(rng.integers(1, 5))
    nodes = [Node(i, float(rng.random()), float(rng.random())) for i in range(n)]
    demand = {}
    for i in range(n):
        for j in range(n):
            if i != j and rng.random() < 0.4:
                demand[(i, j)] = float(rng.random())
    inst = Instance(
        nodes=nodes, edges=[], demand=demand, max_diameter=1.0, num_zones=m
    )
    candidates = []
    for _ in range(ncand):
        size = int(rng.integers(1, max(2, n // 2) + 1))
        candidates.append(tuple(sorted(rng.choice(n, size=size, replace=False).tolist())))
    return inst, candidates


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240811)
