"""Planar convex hulls and point-containment tests.

This is the geometric oracle behind convex-hull extension of candidate
zones: hulls are tiny (a few dozen vertices at most), so a plain
monotone-chain construction and half-plane sign checks are all we need.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

Point = tuple[float, float]

DEFAULT_EPS = 1e-9


@dataclass(frozen=True)
class HullPolygon:
    """Convex hull of a point set.

    ``vertices`` are in counterclockwise order with strict turns (no
    duplicates, no collinear interior vertices).  Degenerate inputs are
    kept as degenerate forms: a single vertex for coincident points, two
    vertices for collinear ones.
    """

    vertices: tuple[Point, ...]

    @property
    def is_point(self) -> bool:
        return len(self.vertices) == 1

    @property
    def is_segment(self) -> bool:
        return len(self.vertices) == 2


def _cross(o: Point, a: Point, b: Point) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def convex_hull(points: list[Point] | tuple[Point, ...]) -> HullPolygon:
    """Minimal convex polygon containing all input points.

    Monotone chain with strict turns, so collinear boundary points are
    excluded from the vertex list.  Duplicate points are deduplicated
    first.  Raises ValueError on empty or non-finite input.
    """
    if not points:
        raise ValueError("convex_hull requires at least one point")
    pts = sorted({(float(x), float(y)) for x, y in points})
    for x, y in pts:
        if not (math.isfinite(x) and math.isfinite(y)):
            raise ValueError(f"non-finite point ({x}, {y})")
    if len(pts) == 1:
        return HullPolygon((pts[0],))
    if len(pts) == 2:
        return HullPolygon(tuple(pts))

    def chain(seq: list[Point]) -> list[Point]:
        out: list[Point] = []
        for p in seq:
            while len(out) >= 2 and _cross(out[-2], out[-1], p) <= 0.0:
                out.pop()
            out.append(p)
        return out

    lower = chain(pts)
    upper = chain(pts[::-1])
    verts = lower[:-1] + upper[:-1]
    if len(verts) == 2:
        # all points collinear: keep the two extremes as a segment
        return HullPolygon((pts[0], pts[-1]))
    return HullPolygon(tuple(verts))


def _segment_distance(p: Point, a: Point, b: Point) -> float:
    ax, ay = a
    bx, by = b
    px, py = p
    dx, dy = bx - ax, by - ay
    seg2 = dx * dx + dy * dy
    if seg2 == 0.0:
        return math.hypot(px - ax, py - ay)
    t = ((px - ax) * dx + (py - ay) * dy) / seg2
    t = min(1.0, max(0.0, t))
    return math.hypot(px - (ax + t * dx), py - (ay + t * dy))


def point_in_hull(p: Point, hull: HullPolygon, eps: float = DEFAULT_EPS) -> bool:
    """True iff ``p`` lies inside or on the boundary of ``hull``.

    The boundary test is a signed distance: ``p`` passes when its signed
    distance to every hull edge is >= -eps, so points up to ``eps``
    outside still count as inside.  Degenerate hulls fall back to
    point/segment distance <= eps.
    """
    verts = hull.vertices
    px, py = float(p[0]), float(p[1])
    if len(verts) == 1:
        return math.hypot(px - verts[0][0], py - verts[0][1]) <= eps
    if len(verts) == 2:
        return _segment_distance((px, py), verts[0], verts[1]) <= eps
    for i in range(len(verts)):
        ax, ay = verts[i]
        bx, by = verts[(i + 1) % len(verts)]
        ex, ey = bx - ax, by - ay
        # signed distance of p from edge a->b (positive = left = inside for CCW)
        cross = ex * (py - ay) - ey * (px - ax)
        if cross < -eps * math.hypot(ex, ey):
            return False
    return True


def hull_contained_candidates(
    hull: HullPolygon,
    candidates: list[tuple[int, float, float]],
    eps: float = DEFAULT_EPS,
) -> list[int]:
    """Ids of candidate ``(id, x, y)`` entries contained in ``hull``.

    Batch form of :func:`point_in_hull` used by the clique extension hot
    loop; semantics are identical.
    """
    verts = hull.vertices
    if len(verts) <= 2:
        return [i for i, x, y in candidates if point_in_hull((x, y), hull, eps)]
    # precompute edge vectors and eps scaled by edge length
    edges = []
    n = len(verts)
    for i in range(n):
        ax, ay = verts[i]
        bx, by = verts[(i + 1) % n]
        ex, ey = bx - ax, by - ay
        edges.append((ax, ay, ex, ey, eps * math.hypot(ex, ey)))
    out = []
    for ident, px, py in candidates:
        for ax, ay, ex, ey, tol in edges:
            if ex * (py - ay) - ey * (px - ax) < -tol:
                break
        else:
            out.append(ident)
    return out
