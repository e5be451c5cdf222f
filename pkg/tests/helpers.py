"""Shared test utilities: independent references and random generators.

Everything here is deliberately implemented apart from the package code so
it can serve as an oracle: shapely for polygon overlap, a from-scratch
edge-orientation scan for minimum-area rectangles, and a permutation
enumerator for assignments.
"""

import itertools
import math

import numpy as np
from shapely.geometry import Polygon

from rboxkit import RBox, canonical_rbox


def rbox_to_shapely(box: RBox) -> Polygon:
    t = math.radians(box.theta)
    c, s = math.cos(t), math.sin(t)
    pts = []
    for lx, ly in ((box.w / 2, box.h / 2), (-box.w / 2, box.h / 2),
                   (-box.w / 2, -box.h / 2), (box.w / 2, -box.h / 2)):
        pts.append((box.cx + c * lx - s * ly, box.cy + s * lx + c * ly))
    return Polygon(pts)


def shapely_iou(a: RBox, b: RBox) -> float:
    pa, pb = rbox_to_shapely(a), rbox_to_shapely(b)
    inter = pa.intersection(pb).area
    union = pa.area + pb.area - inter
    return inter / union


def random_rbox(rng: np.random.Generator, span: float = 100.0,
                min_ratio: float = 1.001) -> RBox:
    """Random long-edge box; enforces w/h >= min_ratio so the orientation is
    unambiguous (exact squares carry an inherent 90-degree ambiguity)."""
    h = rng.uniform(1.0, 30.0)
    w = h * rng.uniform(min_ratio, 10.0)
    return canonical_rbox(rng.uniform(-span, span), rng.uniform(-span, span),
                          w, h, rng.uniform(0.0, 180.0))


def min_area_rect_by_edges(points: np.ndarray):
    """Independent minimum-area rectangle: try each input edge orientation.

    Returns (area, long_side, short_side, second_best_area). The optimum
    rectangle has a side collinear with an edge of the convex hull; for a
    convex quad the four input edges cover every hull edge.
    """
    pts = np.asarray(points, dtype=float)
    candidates = []
    n = len(pts)
    for i in range(n):
        ex, ey = pts[(i + 1) % n] - pts[i]
        norm = math.hypot(ex, ey)
        if norm == 0.0:
            continue
        ux, uy = ex / norm, ey / norm
        along = pts @ np.array([ux, uy])
        across = pts @ np.array([-uy, ux])
        extent_a = along.max() - along.min()
        extent_b = across.max() - across.min()
        area = extent_a * extent_b
        candidates.append((area, max(extent_a, extent_b), min(extent_a, extent_b)))
    candidates.sort(key=lambda c: c[0])
    area, long_side, short_side = candidates[0]
    second_best = candidates[1][0] if len(candidates) > 1 else math.inf
    return area, long_side, short_side, second_best


def brute_force_assignment(cost: np.ndarray):
    """Exhaustive minimum assignment, lexicographically smallest pair list
    among ties. Returns (pairs, total)."""
    cost = np.asarray(cost, dtype=float)
    n_rows, n_cols = cost.shape

    def candidates():
        if n_rows <= n_cols:
            for cols in itertools.permutations(range(n_cols), n_rows):
                yield tuple(zip(range(n_rows), cols))
        else:
            for rows in itertools.combinations(range(n_rows), n_cols):
                for cols in itertools.permutations(range(n_cols)):
                    yield tuple(sorted(zip(rows, cols)))

    best_pairs, best_total = None, math.inf
    for pairs in candidates():
        total = sum(cost[i, j] for i, j in pairs)
        if total < best_total - 1e-12:
            best_total, best_pairs = total, pairs
        elif total <= best_total + 1e-12 and pairs < best_pairs:
            best_pairs = pairs
    return best_pairs, best_total
