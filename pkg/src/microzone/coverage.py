"""Phase 2: pick the best m candidate zones by weighted maximum coverage.

The model maps each candidate zone to the set of demand pairs it covers
(ordered pairs, self-pairs included).  ``solve_exact`` is a
branch-and-bound over candidate inclusion: the incumbent starts from the
greedy solution, candidates are scanned in static weight order, and a
node is cut when its covered demand plus the sum of the r largest
residual candidate gains (r = remaining budget) cannot beat the
incumbent.  ``brute_force_select`` is the testing oracle, and
``export_lp`` writes the equivalent 0/1 program in CPLEX LP format for
external solvers.
"""

from __future__ import annotations

import itertools
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from microzone.cliquegen import CliqueList
from microzone.instance import Instance

_DENSE_DEMAND_LIMIT = 4000  # build an n x n demand matrix up to this n


@dataclass
class CoverageModel:
    """Candidate zones, the demand pairs they cover, and the budget m.

    ``member_masks[k]`` is the membership vector of candidate k packed as
    an int bitmask over nodes.  ``pair_nodes[p]`` is the ordered node pair
    of coverable pair p and ``pair_weights[p]`` its demand (> 0).
    ``cand_pairs[k]`` lists the pair indices candidate k covers.
    """

    candidates: list[tuple[int, ...]]
    member_masks: list[int]
    weights: np.ndarray
    pair_nodes: list[tuple[int, int]]
    pair_weights: np.ndarray
    cand_pairs: list[np.ndarray]
    budget: int
    num_nodes: int

    @property
    def num_candidates(self) -> int:
        return len(self.candidates)

    @property
    def num_pairs(self) -> int:
        return len(self.pair_nodes)

    def coverage_matrix(self) -> sp.csr_matrix:
        """0/1 candidate-by-pair incidence matrix."""
        indptr = np.zeros(len(self.cand_pairs) + 1, dtype=np.int64)
        np.cumsum([len(p) for p in self.cand_pairs], out=indptr[1:])
        indices = (
            np.concatenate(self.cand_pairs)
            if self.cand_pairs and indptr[-1] > 0
            else np.zeros(0, dtype=np.int64)
        )
        data = np.ones(len(indices))
        return sp.csr_matrix(
            (data, indices, indptr), shape=(self.num_candidates, self.num_pairs)
        )

    def membership_vector(self, k: int) -> np.ndarray:
        vec = np.zeros(self.num_nodes, dtype=bool)
        for i in self.candidates[k]:
            vec[i] = True
        return vec


@dataclass
class Solution:
    """A zone selection with its audited objective value."""

    selected: list[int]
    zones: list[tuple[int, ...]]
    objective: float
    status: str  # optimal | feasible | timeout | heuristic
    gap: float = 0.0
    wall_time_s: float = 0.0
    covered_pairs: list[tuple[int, int]] = field(default_factory=list)


def _drop_dominated(masks: list[int]) -> list[int]:
    """Indices of candidates that are not a strict subset of any other.

    Candidates are scanned by decreasing cardinality and only maximal ones
    are registered, so each subset test touches the registered cliques of
    a single member node.
    """
    order = sorted(range(len(masks)), key=lambda k: (-masks[k].bit_count(), masks[k]))
    by_node: dict[int, list[int]] = {}
    kept: list[int] = []
    for k in order:
        mask = masks[k]
        lists = []
        m = mask
        while m:
            lsb = m & -m
            lists.append(by_node.setdefault(lsb.bit_length() - 1, []))
            m ^= lsb
        probe = min(lists, key=len)
        if any(mask & t == mask for t in probe):
            continue
        kept.append(k)
        for lst in lists:
            lst.append(mask)
    return sorted(kept)


def build_model(
    instance: Instance,
    cliques: CliqueList | Iterable[Sequence[int]],
    prune_dominated: bool = True,
) -> CoverageModel:
    """Assemble the coverage model from an instance and its candidate list.

    Exact duplicates are merged; with ``prune_dominated`` (default) any
    candidate that is a strict subset of another is dropped, which never
    changes the optimum since demand is nonnegative.  Pairs with zero
    demand are left out of the model entirely.
    """
    member_lists = (
        cliques.member_sets() if isinstance(cliques, CliqueList) else [tuple(sorted(c)) for c in cliques]
    )
    if not member_lists:
        raise ValueError("candidate list is empty")
    n = instance.num_nodes

    seen: set[tuple[int, ...]] = set()
    candidates: list[tuple[int, ...]] = []
    for members in member_lists:
        if members not in seen:
            seen.add(members)
            candidates.append(members)

    masks = []
    for members in candidates:
        m = 0
        for i in members:
            m |= 1 << i
        masks.append(m)

    if prune_dominated:
        keep = _drop_dominated(masks)
        candidates = [candidates[k] for k in keep]
        masks = [masks[k] for k in keep]

    if n > _DENSE_DEMAND_LIMIT:
        raise ValueError(f"instance too large for dense demand matrix ({n} nodes)")
    dmat = np.zeros((n, n))
    for (i, j), d in instance.demand.items():
        dmat[i, j] = d

    weights = np.zeros(len(candidates))
    raw_pairs: list[np.ndarray] = []
    for k, members in enumerate(candidates):
        ids = np.fromiter(members, dtype=np.int64)
        sub = dmat[np.ix_(ids, ids)]
        weights[k] = sub.sum()
        r, c = np.nonzero(sub)
        raw_pairs.append(ids[r] * n + ids[c])

    all_codes = np.unique(np.concatenate(raw_pairs)) if raw_pairs else np.zeros(0, dtype=np.int64)
    pair_nodes = [(int(code // n), int(code % n)) for code in all_codes]
    pair_weights = np.array([dmat[i, j] for i, j in pair_nodes])
    cand_pairs = [np.searchsorted(all_codes, codes) for codes in raw_pairs]

    return CoverageModel(
        candidates=candidates,
        member_masks=masks,
        weights=weights,
        pair_nodes=pair_nodes,
        pair_weights=pair_weights,
        cand_pairs=cand_pairs,
        budget=instance.num_zones,
        num_nodes=n,
    )


def _objective(model: CoverageModel, covered: np.ndarray) -> float:
    """Canonical objective of a covered-pair indicator vector.

    Every solver in this module reports objectives through this one
    expression so equal selections produce bit-identical floats.
    """
    if model.num_pairs == 0:
        return 0.0
    return float(np.dot(model.pair_weights, covered))


def _covered_of(model: CoverageModel, selected: Iterable[int]) -> np.ndarray:
    covered = np.zeros(model.num_pairs, dtype=bool)
    for k in selected:
        covered[model.cand_pairs[k]] = True
    return covered


def solution_from_selection(
    model: CoverageModel,
    selected: Sequence[int],
    status: str,
    gap: float = 0.0,
    wall_time_s: float = 0.0,
) -> Solution:
    covered = _covered_of(model, selected)
    return Solution(
        selected=list(selected),
        zones=[model.candidates[k] for k in selected],
        objective=_objective(model, covered),
        status=status,
        gap=gap,
        wall_time_s=wall_time_s,
        covered_pairs=[model.pair_nodes[p] for p in np.flatnonzero(covered)],
    )


def greedy_select(model: CoverageModel) -> Solution:
    """Classical greedy: m rounds of max marginal covered demand.

    Ties go to the smallest candidate index; rounds stop early once no
    candidate adds positive demand.
    """
    if model.budget < 1:
        raise ValueError("budget must be >= 1")
    t0 = time.perf_counter()
    mat = model.coverage_matrix()
    covered = np.zeros(model.num_pairs, dtype=bool)
    selected: list[int] = []
    for _ in range(model.budget):
        if model.num_pairs == 0:
            break
        gains = mat @ (model.pair_weights * ~covered)
        best = int(np.argmax(gains))
        if gains[best] <= 0.0:
            break
        selected.append(best)
        covered[model.cand_pairs[best]] = True
    sol = solution_from_selection(model, selected, status="feasible")
    sol.wall_time_s = time.perf_counter() - t0
    return sol


def solve_exact(
    model: CoverageModel,
    time_limit: float = 600.0,
    gap_tolerance: float = 0.0,
) -> Solution:
    """Exact weighted maximum coverage by branch-and-bound.

    Candidates are ordered by intra-zone weight descending (ties by
    index) and the include branch is explored first.  Bounds: the greedy
    incumbent from below; covered demand plus the top-r residual gains
    from above (valid since coverage gains are submodular), with the
    sorted static weights as a cheaper pre-bound.  With gap_tolerance = 0
    the search is exhaustive and the result deterministic; on timeout the
    best incumbent is returned with the largest abandoned bound as gap.
    """
    if model.budget < 1:
        raise ValueError("budget must be >= 1")
    t0 = time.perf_counter()
    deadline = t0 + time_limit

    start = greedy_select(model)
    best_val = start.objective
    best_sel = list(start.selected)

    ncand = model.num_candidates
    order = np.argsort(-model.weights, kind="stable")
    mat = model.coverage_matrix()[order]
    pair_sets = [model.cand_pairs[k] for k in order]
    w_sorted = model.weights[order]
    static_prefix = np.concatenate([[0.0], np.cumsum(w_sorted)])
    budget = min(model.budget, ncand)

    timed_out = False
    abandoned = 0.0  # largest bound of any subtree cut by time or gap tolerance

    def static_bound(pos: int, r: int) -> float:
        hi = min(pos + r, ncand)
        return float(static_prefix[hi] - static_prefix[pos])

    def safety(val: float) -> float:
        return 1e-9 * max(1.0, abs(val))

    def search(pos: int, covered: np.ndarray, value: float, chosen: list[int], r: int) -> None:
        nonlocal best_val, best_sel, timed_out, abandoned
        if value > best_val:
            best_val = value
            best_sel = chosen.copy()
        if r == 0 or pos >= ncand:
            return
        bound = value + static_bound(pos, r)
        if bound <= best_val - safety(best_val):
            return
        if gap_tolerance > 0.0 and bound <= best_val * (1.0 + gap_tolerance):
            abandoned = max(abandoned, bound)
            return
        if time.perf_counter() > deadline:
            timed_out = True
            abandoned = max(abandoned, bound)
            return
        gains = mat @ (model.pair_weights * ~covered)
        # top-r residual gain sums for every suffix, non-increasing in pos
        topr = np.zeros(ncand - pos + 1)
        heap: list[float] = []
        for i in range(ncand - 1, pos - 1, -1):
            g = float(gains[i])
            if len(heap) < r:
                heap.append(g)
                heap.sort()
            elif g > heap[0]:
                heap[0] = g
                heap.sort()
            topr[i - pos] = math.fsum(heap)
        for i in range(pos, ncand):
            bound = value + topr[i - pos]
            if bound <= best_val - safety(best_val):
                return
            if gap_tolerance > 0.0 and bound <= best_val * (1.0 + gap_tolerance):
                abandoned = max(abandoned, bound)
                return
            if gains[i] > 0.0:
                new_covered = covered.copy()
                new_covered[pair_sets[i]] = True
                chosen.append(int(order[i]))
                search(i + 1, new_covered, _objective(model, new_covered), chosen, r - 1)
                chosen.pop()
                if timed_out:
                    return

    search(0, np.zeros(model.num_pairs, dtype=bool), 0.0, [], budget)

    if timed_out:
        status = "timeout"
    else:
        status = "optimal"
    gap = 0.0
    if abandoned > best_val and best_val > 0:
        gap = (abandoned - best_val) / best_val
    elif abandoned > best_val:
        gap = math.inf
    sol = solution_from_selection(model, best_sel, status=status, gap=gap)
    sol.wall_time_s = time.perf_counter() - t0
    return sol


def brute_force_select(model: CoverageModel, max_combinations: int = 10**6) -> Solution:
    """Exhaustive optimum over all selections of at most m candidates.

    Testing oracle; rejects models where C(num_candidates, m) exceeds the
    cap.  Ties resolve to the lexicographically first combination.
    """
    if model.budget < 1:
        raise ValueError("budget must be >= 1")
    t0 = time.perf_counter()
    ncand = model.num_candidates
    k = min(model.budget, ncand)
    if math.comb(ncand, k) > max_combinations:
        raise ValueError(
            f"C({ncand},{k}) exceeds the {max_combinations} combination cap"
        )
    if model.num_pairs == 0:
        return solution_from_selection(model, [], status="optimal")

    dense = np.zeros((ncand, model.num_pairs), dtype=bool)
    for i, pairs in enumerate(model.cand_pairs):
        dense[i, pairs] = True

    combos = np.array(list(itertools.combinations(range(ncand), k)), dtype=np.int64)
    covered = dense[combos].any(axis=1)
    objectives = covered.astype(float) @ model.pair_weights
    winner = combos[int(np.argmax(objectives))]
    sol = solution_from_selection(model, [int(i) for i in winner], status="optimal")
    sol.wall_time_s = time.perf_counter() - t0
    return sol


# ---------------------------------------------------------------------------
# LP export (CPLEX LP text format)
# ---------------------------------------------------------------------------


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _write_wrapped(out: IO[str], prefix: str, terms: list[str], width: int = 200) -> None:
    line = prefix
    for t in terms:
        if len(line) + len(t) + 1 > width:
            out.write(line + "\n")
            line = " " + t
        else:
            line = line + " " + t
    out.write(line + "\n")


def export_lp(model: CoverageModel, destination: str | Path | IO[str]) -> None:
    """Write the zone-selection 0/1 program in LP format.

    maximize sum d_ij y_i_j, one budget row, one linking row per
    coverable pair (y_i_j - sum of covering x_k <= 0), all variables
    binary.  Variable names: x_<candidate index>, y_<i>_<j>.
    """
    own = isinstance(destination, (str, Path))
    out: IO[str] = open(destination, "w") if own else destination  # type: ignore[arg-type]
    try:
        out.write("\\ weighted maximum coverage zone selection\n")
        out.write("Maximize\n")
        if model.num_pairs:
            terms = []
            for p, (i, j) in enumerate(model.pair_nodes):
                coeff = _fmt(model.pair_weights[p])
                sign = "+" if p else ""
                terms.append(f"{sign} {coeff} y_{i}_{j}".strip())
            _write_wrapped(out, " obj:", terms)
        else:
            out.write(" obj: 0 x_0\n")
        out.write("Subject To\n")
        budget_terms = [("+ " if k else "") + f"x_{k}" for k in range(model.num_candidates)]
        _write_wrapped(out, " budget:", budget_terms + [f"<= {model.budget}"])
        covering: dict[int, list[int]] = {p: [] for p in range(model.num_pairs)}
        for k, pairs in enumerate(model.cand_pairs):
            for p in pairs:
                covering[int(p)].append(k)
        for p, (i, j) in enumerate(model.pair_nodes):
            terms = [f"y_{i}_{j}"] + [f"- x_{k}" for k in covering[p]] + ["<= 0"]
            _write_wrapped(out, f" link_{i}_{j}:", terms)
        out.write("Binary\n")
        for k in range(model.num_candidates):
            out.write(f" x_{k}\n")
        for i, j in model.pair_nodes:
            out.write(f" y_{i}_{j}\n")
        out.write("End\n")
    finally:
        if own:
            out.close()


# ---------------------------------------------------------------------------
# Solution JSON
# ---------------------------------------------------------------------------


def save_solution(solution: Solution, path: str | Path) -> None:
    doc = {
        "objective": solution.objective,
        "status": solution.status,
        "gap": solution.gap,
        "wall_time_s": solution.wall_time_s,
        "selected": solution.selected,
        "zones": [list(z) for z in solution.zones],
    }
    Path(path).write_text(json.dumps(doc) + "\n")


def load_solution(path: str | Path) -> Solution:
    doc = json.loads(Path(path).read_text())
    return Solution(
        selected=[int(k) for k in doc["selected"]],
        zones=[tuple(int(i) for i in z) for z in doc["zones"]],
        objective=float(doc["objective"]),
        status=str(doc["status"]),
        gap=float(doc.get("gap", 0.0)),
        wall_time_s=float(doc.get("wall_time_s", 0.0)),
    )
