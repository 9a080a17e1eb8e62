"""SimpleZoning: the greedy construction baseline.

Each round seeds a zone with the shareable node pair of highest two-way
demand, grows it by the node with the largest demand gain toward the
current members among those still shareable with all of them, then
retires the zone's nodes.  Zones are therefore pairwise disjoint, unlike
the overlapping selections the exact method may produce.
"""

from __future__ import annotations

import logging

import numpy as np

from microzone.instance import Instance

log = logging.getLogger(__name__)


def simple_zoning(instance: Instance) -> list[tuple[int, ...]]:
    """Construct up to ``instance.num_zones`` disjoint zones.

    Seed pairs must themselves be shareable; when none remains, the zone
    seeds with the single remaining node of highest total incident
    demand.  Expansion keeps adding the best shareable node (largest
    two-way demand toward the zone, ties to the smallest id) until the
    diameter constraint blocks every remaining node.  Returns fewer than
    m zones, with a warning, when nodes run out.
    """
    n = instance.num_nodes
    if instance.num_zones < 1:
        raise ValueError("num_zones must be >= 1")
    dist = instance.distance_matrix()
    sym = np.maximum(dist, dist.T)
    D = instance.max_diameter

    dmat = np.zeros((n, n))
    for (i, j), d in instance.demand.items():
        dmat[i, j] = d
    two_way = dmat + dmat.T  # two_way[i, j] = d(i,j) + d(j,i)
    incident = dmat.sum(axis=0) + dmat.sum(axis=1)

    remaining = np.ones(n, dtype=bool)
    zones: list[tuple[int, ...]] = []
    for _ in range(instance.num_zones):
        if not remaining.any():
            log.warning(
                "ran out of nodes after %d of %d zones", len(zones), instance.num_zones
            )
            break
        seed = _best_seed_pair(remaining, two_way, sym, D)
        if seed is None:
            masked = np.where(remaining, incident, -np.inf)
            zone = [int(np.argmax(masked))]
        else:
            zone = list(seed)

        # shareable-with-every-member and gain toward the zone, kept incremental
        ok = remaining.copy()
        gain = np.zeros(n)
        for v in zone:
            ok &= sym[v] <= D
            gain += two_way[v]
            ok[v] = False
        while ok.any():
            candidate_gain = np.where(ok, gain, -np.inf)
            best = int(np.argmax(candidate_gain))  # first max = smallest id
            zone.append(best)
            ok &= sym[best] <= D
            ok[best] = False
            gain += two_way[best]
        zones.append(tuple(sorted(zone)))
        remaining[zone] = False
    return zones


def _best_seed_pair(
    remaining: np.ndarray, two_way: np.ndarray, sym: np.ndarray, D: float
) -> tuple[int, int] | None:
    """Shareable pair (u, v), u < v, of maximum d(u,v)+d(v,u); ties go to
    the lexicographically smallest pair.  None when no pair is shareable."""
    idx = np.flatnonzero(remaining)
    if len(idx) < 2:
        return None
    sub_ok = sym[np.ix_(idx, idx)] <= D
    np.fill_diagonal(sub_ok, False)
    sub_ok &= np.triu(np.ones_like(sub_ok), k=1).astype(bool)
    if not sub_ok.any():
        return None
    scores = np.where(sub_ok, two_way[np.ix_(idx, idx)], -np.inf)
    flat = int(np.argmax(scores))  # row-major first max = lex smallest (u, v)
    u, v = divmod(flat, len(idx))
    return int(idx[u]), int(idx[v])
