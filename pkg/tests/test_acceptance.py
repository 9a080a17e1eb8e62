"""Acceptance criteria, one test per criterion.

Each criterion prints a `[criterion N] PASS/FAIL` line (run with -s to see
them live).  The sensitivity grid is computed once and shared by the
criteria that read it.
"""

import math
import time
from contextlib import contextmanager

import numpy as np
import pytest

from conftest import (
    brute_force_cliques,
    complete_euclidean_instance,
    random_coverage_model_inputs,
)
from microzone import report
from microzone.baseline import simple_zoning
from microzone.cliquegen import clique_gen, convex_hull_extend
from microzone.coverage import (
    brute_force_select,
    build_model,
    export_lp,
    greedy_select,
    solve_exact,
)
from microzone.ingest import HexGrid, TripRecord, hex_aggregate
from microzone.instance import (
    instance_to_dict,
    served_demand,
    total_demand,
    zone_diameter,
)
from microzone.synth import SynthParams, cell_seed, experiment_grid, generate

N_VALUES = [50, 100, 150, 200]
D_VALUES = [1.5, 2.0, 2.5, 3.0]
SEEDS = [0, 1, 2, 3, 4]


@contextmanager
def criterion(number: int, label: str):
    try:
        yield
    except BaseException:
        print(f"[criterion {number}] FAIL - {label}")
        raise
    print(f"[criterion {number}] PASS - {label}")


@pytest.fixture(scope="module")
def grid_rows():
    return experiment_grid(N_VALUES, D_VALUES, num_zones=4, seeds=SEEDS, workers=2)


@pytest.mark.acceptance
def test_criterion_1_clique_oracle_equivalence():
    with criterion(1, "clique_gen equals brute-force enumeration on 50 instances"):
        rng = np.random.default_rng(101)
        t0 = time.perf_counter()
        for trial in range(50):
            n = 6 + trial % 7  # |V| in {6..12}
            pts = rng.uniform(0, 10, size=(n, 2))
            probe = complete_euclidean_instance(pts, 1.0)
            sym = probe.distance_matrix()
            iu = np.triu_indices(n, 1)
            quantile = 0.06 + 0.88 * trial / 49  # sparse through dense
            D = float(np.quantile(np.maximum(sym, sym.T)[iu], quantile))
            inst = complete_euclidean_instance(pts, D)
            generated = set(clique_gen(inst).member_sets())
            oracle = brute_force_cliques(inst)
            assert generated == oracle, f"trial {trial}: n={n} D={D:.3f}"
        elapsed = time.perf_counter() - t0
        assert elapsed < 60.0, f"oracle sweep took {elapsed:.1f}s"


@pytest.mark.acceptance
def test_criterion_2_solver_oracle_equivalence():
    with criterion(2, "solve_exact equals brute force on 100 random models"):
        rng = np.random.default_rng(202)
        t0 = time.perf_counter()
        for _ in range(100):
            inst, candidates = random_coverage_model_inputs(rng, max_candidates=25)
            model = build_model(inst, candidates)
            assert solve_exact(model).objective == brute_force_select(model).objective
        elapsed = time.perf_counter() - t0
        assert elapsed < 60.0, f"solver sweep took {elapsed:.1f}s"


@pytest.mark.acceptance
def test_criterion_3_exact_dominates_baseline(grid_rows):
    with criterion(3, "exact >= baseline on the 4x4x5 grid with positive margin"):
        assert len(grid_rows) == 80, "grid cells failed to run"
        for r in grid_rows:
            assert r.exact_ratio >= r.baseline_ratio - 1e-12, (
                f"baseline beats exact at n={r.n} D={r.max_diameter} seed={r.seed}"
            )
        imps = report.improvements(grid_rows)
        assert np.mean(imps) > 0.0
        improved = sum(1 for r in grid_rows if r.exact_ratio > r.baseline_ratio)
        assert improved >= 0.8 * len(grid_rows), f"improvement in only {improved}/80 cells"


@pytest.mark.acceptance
def test_criterion_4_monotonicity(grid_rows):
    with criterion(4, "served demand non-decreasing in D and in m"):
        # D sweep: same instance per (n, seed) across the D column
        for n in N_VALUES:
            for seed in SEEDS:
                chain = sorted(
                    (r for r in grid_rows if r.n == n and r.seed == seed),
                    key=lambda r: r.max_diameter,
                )
                objs = [r.exact_objective for r in chain]
                assert all(
                    b >= a - 1e-9 for a, b in zip(objs, objs[1:])
                ), f"D-monotonicity violated at n={n} seed={seed}: {objs}"
        # m sweep on a fixed instance
        for seed in (0, 1):
            inst = generate(
                SynthParams(n=50, seed=cell_seed(seed, 50), max_diameter=2.0)
            )
            cliques = clique_gen(inst)
            prev = -1.0
            for m in range(1, 7):
                inst.num_zones = m
                obj = solve_exact(build_model(inst, cliques)).objective
                assert obj >= prev - 1e-9, f"m-monotonicity violated at m={m}"
                prev = obj


@pytest.mark.acceptance
def test_criterion_5_clique_count_trends(grid_rows):
    with criterion(5, "clique counts grow with D and n; (200, 3) reaches 1e4..1e6"):
        for n in N_VALUES:
            for seed in SEEDS:
                chain = sorted(
                    (r for r in grid_rows if r.n == n and r.seed == seed),
                    key=lambda r: r.max_diameter,
                )
                counts = [r.num_cliques for r in chain]
                assert all(b >= a for a, b in zip(counts, counts[1:])), (n, seed, counts)
        for d in D_VALUES:
            for seed in SEEDS:
                chain = sorted(
                    (r for r in grid_rows if r.max_diameter == d and r.seed == seed),
                    key=lambda r: r.n,
                )
                counts = [r.num_cliques for r in chain]
                assert all(b >= a for a, b in zip(counts, counts[1:])), (d, seed, counts)
        big = [r.num_cliques for r in grid_rows if r.n == 200 and r.max_diameter == 3.0]
        assert big, "missing (200, 3.0) cells"
        for count in big:
            assert 10**4 <= count <= 10**6, f"(200, 3.0) count {count} out of range"


@pytest.mark.acceptance
def test_criterion_6_performance_envelope():
    with criterion(6, "n=100/D=2 and n=200/D=2 runtimes within budget"):
        inst100 = generate(SynthParams(n=100, seed=cell_seed(0, 100), max_diameter=2.0))
        t0 = time.perf_counter()
        cliques100 = clique_gen(inst100)
        t_cliques = time.perf_counter() - t0
        assert t_cliques <= 60.0, f"clique_gen took {t_cliques:.1f}s"
        t0 = time.perf_counter()
        sol = solve_exact(build_model(inst100, cliques100))
        t_solve = time.perf_counter() - t0
        assert sol.status == "optimal" and sol.gap == 0.0
        assert t_solve <= 300.0, f"solve_exact took {t_solve:.1f}s"

        t0 = time.perf_counter()
        inst200 = generate(SynthParams(n=200, seed=cell_seed(0, 200), max_diameter=2.0))
        cliques200 = clique_gen(inst200)
        sol200 = solve_exact(build_model(inst200, cliques200))
        zones200 = simple_zoning(inst200)
        t_pipeline = time.perf_counter() - t0
        assert sol200.status == "optimal"
        assert zones200
        assert t_pipeline <= 900.0, f"n=200 pipeline took {t_pipeline:.1f}s"


def _parse_lp(text: str) -> dict:
    """Minimal CPLEX-LP reader covering the exported grammar; used as an
    independent route from the file text back to a solvable model."""
    lines = [ln for ln in text.splitlines() if not ln.lstrip().startswith("\\")]
    section = None
    stream: dict[str, list[str]] = {"objective": [], "constraints": [], "binary": []}
    for ln in lines:
        stripped = ln.strip()
        if stripped in ("Maximize", "Minimize"):
            section = "objective"
            continue
        if stripped == "Subject To":
            section = "constraints"
            continue
        if stripped == "Binary":
            section = "binary"
            continue
        if stripped == "End":
            break
        if section:
            stream[section].extend(stripped.split())

    def parse_terms(tokens):
        label = None
        if tokens and tokens[0].endswith(":"):
            label = tokens[0][:-1]
            tokens = tokens[1:]
        coeffs: dict[str, float] = {}
        sense = None
        rhs = None
        sign = 1.0
        pending: float | None = None
        for tok in tokens:
            if tok in ("<=", ">=", "="):
                sense = tok
                pending = None
            elif tok == "+":
                sign = 1.0
            elif tok == "-":
                sign = -1.0
            elif tok[0].isdigit() or tok[0] == ".":
                if sense is not None:
                    rhs = sign * float(tok)
                    sign = 1.0
                else:
                    pending = float(tok)
            else:
                coeffs[tok] = coeffs.get(tok, 0.0) + sign * (
                    pending if pending is not None else 1.0
                )
                sign = 1.0
                pending = None
        return label, coeffs, sense, rhs

    _, objective, _, _ = parse_terms(stream["objective"])
    constraints = []
    row: list[str] = []
    for tok in stream["constraints"]:
        if tok.endswith(":") and row:
            constraints.append(parse_terms(row))
            row = []
        row.append(tok)
    if row:
        constraints.append(parse_terms(row))
    return {
        "objective": objective,
        "constraints": constraints,
        "binary": stream["binary"],
    }


def _solve_lp_with_highs(parsed: dict) -> float:
    from scipy.optimize import Bounds, LinearConstraint, milp

    variables = sorted(set(parsed["binary"]) | set(parsed["objective"]))
    index = {v: i for i, v in enumerate(variables)}
    c = np.zeros(len(variables))
    for var, coeff in parsed["objective"].items():
        c[index[var]] = -coeff  # HiGHS minimizes
    rows, lbs, ubs = [], [], []
    for _, coeffs, sense, rhs in parsed["constraints"]:
        row = np.zeros(len(variables))
        for var, coeff in coeffs.items():
            row[index[var]] = coeff
        rows.append(row)
        lbs.append(-np.inf if sense == "<=" else rhs)
        ubs.append(rhs if sense in ("<=", "=") else np.inf)
    result = milp(
        c,
        constraints=LinearConstraint(np.array(rows), lbs, ubs),
        integrality=np.ones(len(variables)),
        bounds=Bounds(0, 1),
    )
    assert result.success, result.message
    return -result.fun


@pytest.mark.acceptance
def test_criterion_7_invariant_suites(tmp_path):
    with criterion(7, "clique/solution/baseline/determinism/LP-round-trip invariants"):
        # clique invariants on a midsize pipeline instance
        inst = generate(SynthParams(n=60, seed=cell_seed(1, 60), max_diameter=2.5))
        cliques = clique_gen(inst)
        dist = inst.distance_matrix()
        members = cliques.member_sets()
        assert len(set(members)) == len(members), "duplicate cliques"
        positions = inst.positions()
        for clique in cliques:
            assert zone_diameter(clique.members, dist) <= inst.max_diameter + 1e-12
            assert (
                convex_hull_extend(clique.members, positions, dist, inst.max_diameter)
                == clique.members
            ), f"clique {clique.members} is not hull-closed"

        # solution objective recomputation
        model = build_model(inst, cliques)
        for sol in (greedy_select(model), solve_exact(model)):
            assert sol.objective == pytest.approx(
                served_demand(inst.demand, sol.zones), abs=1e-9
            )

        # baseline zones disjoint and diameter-valid
        zones = simple_zoning(inst)
        taken: set[int] = set()
        for z in zones:
            assert zone_diameter(z, dist) <= inst.max_diameter + 1e-12
            assert not (taken & set(z))
            taken |= set(z)

        # synthetic generation deterministic per seed
        params = SynthParams(n=40, seed=77, max_diameter=2.0)
        assert instance_to_dict(generate(params)) == instance_to_dict(generate(params))

        # LP export round-trip through an external MILP engine
        try:
            from scipy.optimize import milp  # noqa: F401
        except ImportError:
            print("[criterion 7] NOTICE - no external MILP solver; LP round-trip skipped")
        else:
            rng = np.random.default_rng(303)
            for trial in range(10):
                small_inst, candidates = random_coverage_model_inputs(rng, max_candidates=10)
                small_model = build_model(small_inst, candidates)
                path = tmp_path / f"model_{trial}.lp"
                export_lp(small_model, path)
                external = _solve_lp_with_highs(_parse_lp(path.read_text()))
                internal = solve_exact(small_model).objective
                assert external == pytest.approx(internal, abs=1e-6), (
                    f"trial {trial}: external {external} vs internal {internal}"
                )


@pytest.mark.acceptance
def test_criterion_8_ingest_fixture():
    with criterion(8, "ingest validated on a hand-computable synthetic trip fixture"):
        # Real-world trip datasets are proprietary and cannot ship with the
        # repository, so the ingest pipeline is validated on a synthetic
        # fixture whose hex assignment is computable by hand.
        anchor = (35.05, -85.31)
        grid = HexGrid(*anchor, circumradius_m=2000.0)

        def inverse_project(x: float, y: float) -> tuple[float, float]:
            # spherical direct geodesic from the anchor (test-local inverse
            # of the grid's azimuthal-equidistant projection)
            from microzone.ingest import EARTH_RADIUS_M

            d = math.hypot(x, y)
            if d == 0.0:
                return anchor
            theta = math.atan2(x, y)
            delta = d / EARTH_RADIUS_M
            p1 = math.radians(anchor[0])
            lat = math.asin(
                math.sin(p1) * math.cos(delta)
                + math.cos(p1) * math.sin(delta) * math.cos(theta)
            )
            lon = math.radians(anchor[1]) + math.atan2(
                math.sin(theta) * math.sin(delta) * math.cos(p1),
                math.cos(delta) - math.sin(p1) * math.sin(lat),
            )
            return math.degrees(lat), math.degrees(lon)

        # trips between exact cell centers of (0,0), (1,0) and (0,1)
        c00 = inverse_project(*grid.cell_center(0, 0))
        c10 = inverse_project(*grid.cell_center(1, 0))
        c01 = inverse_project(*grid.cell_center(0, 1))
        assert grid.cell_of(*c00) == (0, 0)
        assert grid.cell_of(*c10) == (1, 0)
        assert grid.cell_of(*c01) == (0, 1)

        trips = [
            TripRecord(*c00, *c10, count=2.0),
            TripRecord(*c00, *c10, count=1.0),
            TripRecord(*c10, *c01, count=4.0),
            TripRecord(*c01, *c01, count=0.5),
        ]
        nodes, demand = hex_aggregate(trips, grid)
        # ids follow sorted (q, r): (0,0) -> 0, (0,1) -> 1, (1,0) -> 2
        assert [n.label for n in nodes] == ["0,0", "0,1", "1,0"]
        assert demand == {(0, 2): 3.0, (2, 1): 4.0, (1, 1): 0.5}
        assert sum(demand.values()) == sum(t.count for t in trips)
        for node in nodes:
            q, r = (int(t) for t in node.label.split(","))
            assert (node.x, node.y) == pytest.approx(grid.cell_center(q, r), abs=1e-6)
        assert total_demand(demand) == 7.5
