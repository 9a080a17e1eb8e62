"""Phase 1: enumerate every candidate zone as a diameter-bounded convex
clique.

A clique is a node set whose pairwise shortest-path distances (worse of
the two directions) all stay within the diameter bound D.  Cliques are
grown one node at a time from singletons; every new candidate is closed
under convex-hull extension, i.e. any node inside the candidate's convex
hull that is shareable with all current members gets pulled in.  A
``visited`` set over canonical member sets guarantees each combination is
expanded once no matter how many parents reach it.

Node sets are manipulated as integer bitmasks throughout; the public
types expose sorted member tuples.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from microzone.geometry import DEFAULT_EPS, convex_hull, hull_contained_candidates
from microzone.instance import Instance


class CliqueLimitError(RuntimeError):
    """Raised when enumeration exceeds the configured clique cap."""


@dataclass(frozen=True)
class Clique:
    members: tuple[int, ...]
    diameter: float

    @property
    def cardinality(self) -> int:
        return len(self.members)


class CliqueList:
    """Canonically ordered clique list with a by-cardinality index."""

    def __init__(
        self,
        cliques: Sequence[Clique],
        max_diameter: float,
        num_nodes: int,
        wall_time_s: float = 0.0,
    ):
        self.cliques = sorted(cliques, key=lambda c: (len(c.members), c.members))
        self.max_diameter = max_diameter
        self.num_nodes = num_nodes
        self.wall_time_s = wall_time_s

    def __len__(self) -> int:
        return len(self.cliques)

    def __iter__(self) -> Iterator[Clique]:
        return iter(self.cliques)

    def member_sets(self) -> list[tuple[int, ...]]:
        return [c.members for c in self.cliques]


def shareable(u: int, v: int, distances: np.ndarray, max_diameter: float) -> bool:
    """Two nodes can share a zone when both directed distances fit in D."""
    return max(distances[u, v], distances[v, u]) <= max_diameter


def _bits(mask: int) -> Iterator[int]:
    while mask:
        lsb = mask & -mask
        yield lsb.bit_length() - 1
        mask ^= lsb


def _share_masks(sym: np.ndarray, max_diameter: float) -> list[int]:
    """Per-node bitmask of shareable partners (self bit included)."""
    masks = []
    for row in sym <= max_diameter:
        m = 0
        for i in np.flatnonzero(row):
            m |= 1 << int(i)
        masks.append(m)
    return masks


def _extend_closure(
    mask: int,
    common: int,
    pos: list[tuple[float, float]],
    share: list[int],
    eps: float,
) -> tuple[int, int]:
    """Fixpoint of convex-hull extension for the clique ``mask``.

    ``common`` is the intersection of the share masks of all current
    members.  Each pass rebuilds the hull of the current members and adds
    every still-shareable node contained in it (ascending id, so the
    result is deterministic even on metrics where hull containment does
    not imply shareability).
    """
    while True:
        cand = common & ~mask
        if cand == 0:
            return mask, common
        hull = convex_hull([pos[i] for i in _bits(mask)])
        contained = hull_contained_candidates(
            hull, [(i, pos[i][0], pos[i][1]) for i in _bits(cand)], eps
        )
        added = False
        for v in contained:
            if not (common >> v) & 1:
                continue  # dropped by an earlier addition in this pass
            mask |= 1 << v
            common &= share[v]
            added = True
        if not added:
            return mask, common


def convex_hull_extend(
    members: Sequence[int],
    positions: np.ndarray,
    distances: np.ndarray,
    max_diameter: float,
    eps: float = DEFAULT_EPS,
) -> tuple[int, ...]:
    """Close a single clique under shareable convex-hull extension.

    Returns the (sorted) extended member tuple; equals the input when no
    node inside the hull is shareable with every member.
    """
    sym = np.maximum(distances, distances.T)
    share = _share_masks(sym, max_diameter)
    pos = [(float(x), float(y)) for x, y in positions]
    mask = 0
    common = (1 << len(pos)) - 1
    for u in members:
        mask |= 1 << u
        common &= share[u]
    mask, _ = _extend_closure(mask, common, pos, share, eps)
    return tuple(_bits(mask))


def clique_gen(
    instance: Instance,
    eps: float = DEFAULT_EPS,
    max_cliques: int = 10_000_000,
    connectivity_filter: bool = False,
) -> CliqueList:
    """Enumerate all diameter-bounded, hull-closed candidate zones.

    Starts from all singletons, then repeatedly extends every cardinality-k
    clique by each node shareable with all its members, hull-closing the
    result before insertion.  Extended cliques land in the bucket of their
    true cardinality, so the sweep revisits them at the right k; it stops
    once no clique at or above the current cardinality remains.

    Raises CliqueLimitError when the list would exceed ``max_cliques``
    (guards pathological D).
    """
    t0 = time.perf_counter()
    n = instance.num_nodes
    dist = instance.distance_matrix()
    D = instance.max_diameter
    sym = np.maximum(dist, dist.T)
    share = _share_masks(sym, D)
    pos = [(float(x), float(y)) for x, y in instance.positions()]

    visited: set[int] = set()
    buckets: dict[int, list[tuple[int, int]]] = {1: []}
    accepted: list[int] = []

    for v in range(n):
        m = 1 << v
        visited.add(m)
        buckets[1].append((m, share[v]))
        accepted.append(m)

    max_card = 1
    k = 1
    while k <= max_card:
        for s_mask, s_common in buckets.get(k, ()):
            for v in _bits(s_common & ~s_mask):
                cand = s_mask | (1 << v)
                if cand in visited:
                    continue
                visited.add(cand)
                ext, ext_common = _extend_closure(cand, s_common & share[v], pos, share, eps)
                if ext != cand:
                    if ext in visited:
                        continue
                    visited.add(ext)
                if len(accepted) >= max_cliques:
                    raise CliqueLimitError(
                        f"clique cap {max_cliques} exceeded at D={D}; "
                        "raise max_cliques or lower D"
                    )
                card = ext.bit_count()
                buckets.setdefault(card, []).append((ext, ext_common))
                accepted.append(ext)
                if card > max_card:
                    max_card = card
        k += 1

    cliques = []
    for mask in accepted:
        ids = list(_bits(mask))
        if len(ids) == 1:
            diam = 0.0
        else:
            sub = sym[np.ix_(ids, ids)]
            diam = float(sub.max())
        cliques.append(Clique(tuple(ids), diam))

    result = CliqueList(
        cliques,
        max_diameter=D,
        num_nodes=n,
        wall_time_s=time.perf_counter() - t0,
    )
    if connectivity_filter:
        result = filter_connected(result, instance)
    return result


def clique_count_by_cardinality(cliques: CliqueList | Iterable) -> dict[int, int]:
    """Histogram of clique cardinalities; values sum to the list length."""
    counts: dict[int, int] = {}
    for c in cliques:
        members = c.members if isinstance(c, Clique) else tuple(c)
        counts[len(members)] = counts.get(len(members), 0) + 1
    return dict(sorted(counts.items()))


def filter_connected(cliques: CliqueList, instance: Instance) -> CliqueList:
    """Drop cliques whose members are not weakly connected in the road graph.

    The enumeration itself never enforces graph connectivity; this is an
    optional post-hoc filter (off by default in the CLI).
    """
    adj: dict[int, set[int]] = {i: set() for i in range(instance.num_nodes)}
    for e in instance.edges:
        adj[e.src].add(e.dst)
        adj[e.dst].add(e.src)

    def connected(members: tuple[int, ...]) -> bool:
        member_set = set(members)
        stack = [members[0]]
        seen = {members[0]}
        while stack:
            u = stack.pop()
            for w in adj[u] & member_set:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        return len(seen) == len(member_set)

    kept = [c for c in cliques if connected(c.members)]
    return CliqueList(
        kept,
        max_diameter=cliques.max_diameter,
        num_nodes=cliques.num_nodes,
        wall_time_s=cliques.wall_time_s,
    )


# ---------------------------------------------------------------------------
# Clique list file: {"meta": {...}, "cliques": [[ids], ...]}
# ---------------------------------------------------------------------------


def save_cliques(cliques: CliqueList, path: str | Path) -> None:
    doc = {
        "meta": {
            "max_diameter": cliques.max_diameter,
            "num_nodes": cliques.num_nodes,
            "wall_time_s": cliques.wall_time_s,
            "count_by_cardinality": {
                str(k): v for k, v in clique_count_by_cardinality(cliques).items()
            },
        },
        "cliques": [list(c.members) for c in cliques],
    }
    Path(path).write_text(json.dumps(doc) + "\n")


def load_cliques(path: str | Path, distances: np.ndarray | None = None) -> CliqueList:
    """Read a clique list; diameters are recomputed when ``distances`` is
    given, else left as NaN (they are not stored in the file)."""
    doc = json.loads(Path(path).read_text())
    meta = doc["meta"]
    sym = None if distances is None else np.maximum(distances, distances.T)
    cliques = []
    for ids in doc["cliques"]:
        members = tuple(int(i) for i in ids)
        if sym is None:
            diam = math.nan
        elif len(members) == 1:
            diam = 0.0
        else:
            diam = float(sym[np.ix_(members, members)].max())
        cliques.append(Clique(members, diam))
    return CliqueList(
        cliques,
        max_diameter=float(meta["max_diameter"]),
        num_nodes=int(meta["num_nodes"]),
        wall_time_s=float(meta.get("wall_time_s", 0.0)),
    )
