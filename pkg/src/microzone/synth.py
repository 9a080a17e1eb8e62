"""Seeded synthetic instances: pruned Delaunay road networks with random
demand, plus the sensitivity-experiment grid runner.

Generation protocol for ``generate``:

1. ``n`` points i.i.d. uniform in a square box (default 10 x 10).
2. Delaunay triangulation of the points.
3. Each undirected Delaunay edge (in sorted (i, j) order) becomes a pair
   of opposed arcs, except that with probability ``p_oneway`` it turns
   into a single one-way arc whose direction is a fair coin flip.
4. Every directed arc (again in sorted order) is removed independently
   with probability ``p_prune``.
5. Arc weights are Euclidean endpoint distances; demand for every ordered
   pair i != j is drawn from ``demand_law`` (one n x n draw block, diagonal
   zeroed).

All draws come from one ``numpy`` Generator in the order above, so a fixed
seed reproduces the instance bit for bit.
"""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.spatial import Delaunay, QhullError

from microzone import baseline, cliquegen, coverage
from microzone.instance import Edge, Instance, Node, served_demand, total_demand

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SynthParams:
    n: int
    seed: int
    box: float = 10.0
    p_oneway: float = 0.2
    p_prune: float = 0.2
    demand_law: str = "uniform(0,1)"
    max_diameter: float = 2.0
    num_zones: int = 4

    def __post_init__(self) -> None:
        if self.n < 3:
            raise ValueError("n must be >= 3")
        for name in ("p_oneway", "p_prune"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must be in [0, 1]")


def _parse_demand_law(spec: str) -> Callable[[np.random.Generator, int], np.ndarray]:
    """Parse 'uniform(a,b)' or 'exponential(scale)' into a sampler of an
    n x n demand block."""
    spec = spec.strip().lower().replace(" ", "")
    if spec.startswith("uniform(") and spec.endswith(")"):
        lo, hi = (float(t) for t in spec[8:-1].split(","))
        if lo < 0 or hi < lo:
            raise ValueError(f"invalid uniform bounds in {spec!r}")
        return lambda rng, n: rng.uniform(lo, hi, size=(n, n))
    if spec.startswith("exponential(") and spec.endswith(")"):
        scale = float(spec[12:-1])
        if scale <= 0:
            raise ValueError(f"invalid exponential scale in {spec!r}")
        return lambda rng, n: rng.exponential(scale, size=(n, n))
    raise ValueError(f"unsupported demand law {spec!r}")


def _delaunay_edges(points: np.ndarray) -> list[tuple[int, int]]:
    tri = Delaunay(points)
    edges = set()
    for simplex in tri.simplices:
        a, b, c = (int(x) for x in simplex)
        edges.add((min(a, b), max(a, b)))
        edges.add((min(b, c), max(b, c)))
        edges.add((min(a, c), max(a, c)))
    return sorted(edges)


def generate(params: SynthParams) -> Instance:
    """Build one synthetic instance; deterministic for a fixed seed."""
    sampler = _parse_demand_law(params.demand_law)
    rng = np.random.default_rng(params.seed)
    n = params.n

    points = rng.uniform(0.0, params.box, size=(n, 2))
    for attempt in range(8):
        try:
            undirected = _delaunay_edges(points)
            break
        except QhullError:
            log.warning("degenerate point set (attempt %d); perturbing and retrying", attempt + 1)
            points = points + rng.normal(0.0, 1e-9 * params.box, size=points.shape)
    else:
        raise RuntimeError("Delaunay triangulation failed after 8 perturbation attempts")

    arcs: list[tuple[int, int]] = []
    for i, j in undirected:
        if rng.random() < params.p_oneway:
            arcs.append((i, j) if rng.random() < 0.5 else (j, i))
        else:
            arcs.append((i, j))
            arcs.append((j, i))

    kept = [a for a in arcs if rng.random() >= params.p_prune]

    demand_block = sampler(rng, n)
    np.fill_diagonal(demand_block, 0.0)
    demand = {
        (i, j): float(demand_block[i, j]) for i in range(n) for j in range(n) if i != j
    }

    nodes = [Node(i, float(points[i, 0]), float(points[i, 1])) for i in range(n)]
    edges = [
        Edge(i, j, float(math.dist(points[i], points[j]))) for i, j in sorted(set(kept))
    ]
    return Instance(
        nodes=nodes,
        edges=edges,
        demand=demand,
        max_diameter=params.max_diameter,
        num_zones=params.num_zones,
        units="box-units",
    )


def cell_seed(seed: int, n: int) -> int:
    """Instance seed for one grid cell.

    Derived from (seed, n) only: all D values in a row share the same
    instance, which is what makes served-demand comparisons across D
    meaningful.
    """
    return int(np.random.SeedSequence([seed, n]).generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class GridRow:
    n: int
    max_diameter: float
    num_zones: int
    seed: int
    num_cliques: int
    exact_ratio: float
    baseline_ratio: float
    clique_time_s: float
    solve_time_s: float
    exact_objective: float = 0.0
    baseline_objective: float = 0.0
    total_demand: float = 0.0


def run_cell(
    n: int,
    max_diameter: float,
    num_zones: int,
    seed: int,
    time_limit: float = 600.0,
    max_cliques: int = 10_000_000,
) -> GridRow:
    """Run the full pipeline (cliques, exact solve, baseline) on one cell."""
    params = SynthParams(
        n=n, seed=cell_seed(seed, n), max_diameter=max_diameter, num_zones=num_zones
    )
    inst = generate(params)
    total = total_demand(inst.demand)

    t0 = time.perf_counter()
    cliques = cliquegen.clique_gen(inst, max_cliques=max_cliques)
    clique_time = time.perf_counter() - t0

    t0 = time.perf_counter()
    model = coverage.build_model(inst, cliques)
    solution = coverage.solve_exact(model, time_limit=time_limit)
    solve_time = time.perf_counter() - t0

    base_zones = baseline.simple_zoning(inst)
    base_served = served_demand(inst.demand, base_zones)

    return GridRow(
        n=n,
        max_diameter=max_diameter,
        num_zones=num_zones,
        seed=seed,
        num_cliques=len(cliques),
        exact_ratio=solution.objective / total if total > 0 else 0.0,
        baseline_ratio=base_served / total if total > 0 else 0.0,
        clique_time_s=clique_time,
        solve_time_s=solve_time,
        exact_objective=solution.objective,
        baseline_objective=base_served,
        total_demand=total,
    )


def _run_cell_args(args: tuple) -> GridRow:
    return run_cell(*args)


def experiment_grid(
    n_values: Sequence[int],
    d_values: Sequence[float],
    num_zones: int,
    seeds: Sequence[int],
    workers: int = 1,
    time_limit: float = 600.0,
) -> list[GridRow]:
    """Run the sensitivity grid; cells are independent and may run in
    parallel without changing any result (per-cell RNG streams).  Failed
    cells are logged and skipped."""
    tasks = [
        (n, d, num_zones, seed, time_limit)
        for seed in seeds
        for n in n_values
        for d in d_values
    ]
    # largest cells first so the pool tail stays busy
    tasks.sort(key=lambda t: (t[0] * t[1], t[0]), reverse=True)
    rows: list[GridRow] = []
    if workers <= 1:
        for task in tasks:
            try:
                rows.append(_run_cell_args(task))
            except Exception:
                log.exception("grid cell %s failed; continuing", task[:4])
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {pool.submit(_run_cell_args, task): task for task in tasks}
            for fut, task in futures.items():
                try:
                    rows.append(fut.result())
                except Exception:
                    log.exception("grid cell %s failed; continuing", task[:4])
    rows.sort(key=lambda r: (r.n, r.max_diameter, r.seed))
    return rows
