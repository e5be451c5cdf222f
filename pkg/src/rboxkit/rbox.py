"""Rotated-box types and conversions in the long-edge angle convention.

A rotated box is (cx, cy, w, h, theta) with w the long side, h the short
side and theta in degrees in [0, 180): the orientation of the long side
measured counter-clockwise from the +x axis. The 180-degree period matches
the 180 one-degree angle classes used by the label encoders.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

ANGLE_PERIOD = 180.0

# Quads with shoelace area at or below this are rejected instead of being
# turned into a fabricated box.
DEGENERATE_AREA = 1e-9


@dataclass(frozen=True)
class RBox:
    """Rotated rectangle: center, long side, short side, angle in degrees."""

    cx: float
    cy: float
    w: float
    h: float
    theta: float

    def __post_init__(self) -> None:
        for name in ("cx", "cy", "w", "h", "theta"):
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or not math.isfinite(value):
                raise ValidationError(f"RBox.{name} must be finite, got {value!r}")
        if self.w <= 0 or self.h <= 0:
            raise ValidationError(f"RBox sides must be positive, got w={self.w}, h={self.h}")
        if self.w < self.h:
            raise ValidationError(
                f"long-edge convention requires w >= h, got w={self.w} < h={self.h}"
            )
        if not 0.0 <= self.theta < ANGLE_PERIOD:
            raise ValidationError(f"RBox.theta must lie in [0, 180), got {self.theta}")


@dataclass(frozen=True)
class QuadPolygon:
    """Convex 4-vertex polygon in counter-clockwise order.

    The exchange format for DOTA-style annotations. Collinear (zero cross
    product) vertices are tolerated so hand-drawn near-degenerate quads can
    still be parsed; fully degenerate quads are rejected by `from_quad`.
    """

    vertices: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        if len(self.vertices) != 4:
            raise ValidationError(f"QuadPolygon needs 4 vertices, got {len(self.vertices)}")
        pts = np.asarray(self.vertices, dtype=float)
        if not np.all(np.isfinite(pts)):
            raise ValidationError("QuadPolygon vertices must be finite")
        crosses = _edge_crosses(pts)
        scale = float(np.abs(pts).max()) + 1.0
        if np.any(crosses < -1e-9 * scale * scale):
            raise ValidationError("QuadPolygon must be convex and counter-clockwise")

    @classmethod
    def from_points(cls, points) -> "QuadPolygon":
        """Build a quad from 4 points in either winding, reordering to CCW."""
        pts = np.asarray(points, dtype=float).reshape(4, 2)
        if shoelace_area(pts, signed=True) < 0:
            pts = pts[::-1]
        return cls(tuple((float(x), float(y)) for x, y in pts))

    def as_array(self) -> np.ndarray:
        return np.asarray(self.vertices, dtype=float)


@dataclass(frozen=True)
class HBox:
    """Axis-aligned box as (xmin, ymin, xmax, ymax)."""

    xmin: float
    ymin: float
    xmax: float
    ymax: float

    def __post_init__(self) -> None:
        for name in ("xmin", "ymin", "xmax", "ymax"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ValidationError(f"HBox.{name} must be finite, got {value!r}")
        if self.xmin > self.xmax or self.ymin > self.ymax:
            raise ValidationError("HBox requires xmin <= xmax and ymin <= ymax")


def _edge_crosses(pts: np.ndarray) -> np.ndarray:
    """Cross products of consecutive edge pairs (positive for CCW turns)."""
    edges = np.roll(pts, -1, axis=0) - pts
    nxt = np.roll(edges, -1, axis=0)
    return edges[:, 0] * nxt[:, 1] - edges[:, 1] * nxt[:, 0]


def shoelace_area(pts: np.ndarray, signed: bool = False) -> float:
    """Polygon area by the shoelace formula; positive means CCW when signed."""
    x, y = pts[:, 0], pts[:, 1]
    acc = float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))) / 2.0
    return acc if signed else abs(acc)


def canonical_rbox(cx: float, cy: float, w: float, h: float, theta: float) -> RBox:
    """Normalize arbitrary (cx, cy, w, h, theta) into a valid long-edge RBox.

    Swaps sides (rotating theta by 90) when w < h, wraps theta into
    [0, 180), and maps exact squares into [0, 90) since a square is
    invariant under quarter turns. This is the constructor parsers and
    noise generators should use; `RBox(...)` itself only validates.
    """
    if not all(math.isfinite(v) for v in (cx, cy, w, h, theta)):
        raise ValidationError("rotated-box parameters must be finite")
    if w <= 0 or h <= 0:
        raise ValidationError(f"rotated-box sides must be positive, got w={w}, h={h}")
    if w < h:
        w, h = h, w
        theta = theta + 90.0
    theta = theta % ANGLE_PERIOD
    if w == h:
        theta = theta % 90.0
    return RBox(float(cx), float(cy), float(w), float(h), float(theta))


def to_quad(box: RBox) -> QuadPolygon:
    """Corners of the box, CCW, starting at the local (+w/2, +h/2) corner."""
    t = math.radians(box.theta)
    c, s = math.cos(t), math.sin(t)
    corners = []
    for lx, ly in ((box.w / 2, box.h / 2), (-box.w / 2, box.h / 2),
                   (-box.w / 2, -box.h / 2), (box.w / 2, -box.h / 2)):
        corners.append((box.cx + c * lx - s * ly, box.cy + s * lx + c * ly))
    return QuadPolygon(tuple(corners))


def from_quad(quad: QuadPolygon) -> RBox:
    """Minimum-area enclosing rotated rectangle of a quad, long-edge normalized.

    DOTA annotations are hand-drawn quads, not exact rectangles, so this
    computes the true minimum-area rectangle over the quad's convex hull
    (the optimum has a side collinear with some hull edge) instead of
    assuming rectangularity. Round-trips `to_quad` output within 1e-6 per
    field, angle compared modulo 180.

    Raises:
        ValidationError: if the quad area is at or below 1e-9.
    """
    pts = quad.as_array()
    if shoelace_area(pts) <= DEGENERATE_AREA:
        raise ValidationError("degenerate quad: area is effectively zero")
    hull = _convex_hull(pts)

    best = None
    for i in range(len(hull)):
        ex, ey = hull[(i + 1) % len(hull)] - hull[i]
        phi = math.atan2(ey, ex)
        c, s = math.cos(phi), math.sin(phi)
        # rotate hull by -phi so the candidate rectangle is axis-aligned
        rx = hull[:, 0] * c + hull[:, 1] * s
        ry = -hull[:, 0] * s + hull[:, 1] * c
        extent_x = rx.max() - rx.min()
        extent_y = ry.max() - ry.min()
        area = extent_x * extent_y
        if best is None or area < best[0]:
            mid_x = (rx.max() + rx.min()) / 2.0
            mid_y = (ry.max() + ry.min()) / 2.0
            best = (area, phi, extent_x, extent_y, mid_x, mid_y)

    _, phi, extent_x, extent_y, mid_x, mid_y = best
    c, s = math.cos(phi), math.sin(phi)
    cx = mid_x * c - mid_y * s
    cy = mid_x * s + mid_y * c
    if extent_x >= extent_y:
        w, h, theta = extent_x, extent_y, math.degrees(phi)
    else:
        w, h, theta = extent_y, extent_x, math.degrees(phi) + 90.0
    return canonical_rbox(cx, cy, w, h, theta)


def _convex_hull(pts: np.ndarray) -> np.ndarray:
    """Monotone-chain convex hull, CCW, collinear points dropped."""
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    sorted_pts = [tuple(p) for p in pts[order]]
    unique = []
    for p in sorted_pts:
        if not unique or p != unique[-1]:
            unique.append(p)
    if len(unique) < 3:
        raise ValidationError("degenerate quad: fewer than 3 distinct vertices")

    def half(points):
        chain = []
        for p in points:
            while len(chain) >= 2:
                ox, oy = chain[-2]
                ax, ay = chain[-1]
                if (ax - ox) * (p[1] - oy) - (ay - oy) * (p[0] - ox) <= 0:
                    chain.pop()
                else:
                    break
            chain.append(p)
        return chain

    lower = half(unique)
    upper = half(unique[::-1])
    hull = lower[:-1] + upper[:-1]
    if len(hull) < 3:
        raise ValidationError("degenerate quad: all vertices collinear")
    return np.asarray(hull, dtype=float)


def aspect_ratio(box: RBox) -> float:
    """Long side over short side; always >= 1 under the long-edge convention."""
    return box.w / box.h


def h_circumscribe(box: RBox) -> HBox:
    """Smallest axis-aligned box containing the rotated box."""
    pts = to_quad(box).as_array()
    return HBox(float(pts[:, 0].min()), float(pts[:, 1].min()),
                float(pts[:, 0].max()), float(pts[:, 1].max()))


def angle_deviation(a: float, b: float) -> float:
    """Circular deviation of two angles under the 180-degree period, in [0, 90]."""
    d = abs(a - b) % ANGLE_PERIOD
    return min(d, ANGLE_PERIOD - d)
