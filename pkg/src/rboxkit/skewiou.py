"""SkewIoU between rotated boxes.

Two routes are provided on purpose. `skewiou_polygon` is the exact
reference: Sutherland-Hodgman clipping of the two corner quads followed by
shoelace areas. `skewiou_closed` evaluates the two-branch closed form for
the same-center case, split at the critical deviation 2*arctan(1/k). The
polygon route is the ground truth everywhere downstream; the closed form
is checked against it rather than the other way around.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ValidationError
from .rbox import RBox, canonical_rbox, to_quad

# Vertices on a clip edge count as inside, with slack relative to box size.
_EDGE_EPS = 1e-9


def _clip_convex(subject, clip, eps):
    """Clip a convex polygon by a convex CCW polygon (Sutherland-Hodgman)."""
    output = list(subject)
    n = len(clip)
    for i in range(n):
        if not output:
            return []
        ax, ay = clip[i]
        bx, by = clip[(i + 1) % n]
        ex, ey = bx - ax, by - ay
        input_pts = output
        output = []
        px, py = input_pts[-1]
        prev_side = ex * (py - ay) - ey * (px - ax)
        for qx, qy in input_pts:
            side = ex * (qy - ay) - ey * (qx - ax)
            if side >= -eps:
                if prev_side < -eps:
                    output.append(_intersect(px, py, qx, qy, ax, ay, bx, by))
                output.append((qx, qy))
            elif prev_side >= -eps:
                output.append(_intersect(px, py, qx, qy, ax, ay, bx, by))
            px, py, prev_side = qx, qy, side
    return output


def _intersect(px, py, qx, qy, ax, ay, bx, by):
    """Intersection of segment p-q with the infinite line a-b."""
    dx, dy = qx - px, qy - py
    ex, ey = bx - ax, by - ay
    denom = ex * dy - ey * dx
    t = (ex * (ay - py) - ey * (ax - px)) / denom
    return (px + t * dx, py + t * dy)


def _polygon_area(pts) -> float:
    if len(pts) < 3:
        return 0.0
    acc = 0.0
    n = len(pts)
    for i in range(n):
        x0, y0 = pts[i]
        x1, y1 = pts[(i + 1) % n]
        acc += x0 * y1 - x1 * y0
    return abs(acc) / 2.0


def skewiou_polygon(a: RBox, b: RBox) -> float:
    """Exact IoU of two rotated boxes via convex clipping.

    Symmetric in its arguments bit-for-bit (the pair is put in a canonical
    order before clipping), and 0 for disjoint boxes.
    """
    # canonicalize argument order so f(a, b) == f(b, a) exactly
    ka = (a.cx, a.cy, a.w, a.h, a.theta)
    kb = (b.cx, b.cy, b.w, b.h, b.theta)
    if kb < ka:
        a, b = b, a
    quad_a = to_quad(a).vertices
    quad_b = to_quad(b).vertices
    eps = _EDGE_EPS * max(math.hypot(a.w, a.h), math.hypot(b.w, b.h))
    inter = _polygon_area(_clip_convex(quad_a, quad_b, eps))
    # measure the boxes with the same shoelace arithmetic as the overlap so
    # a box clipped against itself comes out at exactly 1.0
    area_a = _polygon_area(quad_a)
    area_b = _polygon_area(quad_b)
    inter = min(inter, area_a, area_b)
    union = area_a + area_b - inter
    return min(max(inter / union, 0.0), 1.0)


def critical_angle(k: float) -> float:
    """Deviation in degrees where the same-center intersection shape changes.

    Below it the overlap is an octagon; above it, a parallelogram formed by
    the two crossing strips.
    """
    return math.degrees(2.0 * math.atan(1.0 / k))


def skewiou_closed(k: float, delta_theta: float) -> float:
    """Closed-form same-center SkewIoU for aspect ratio k at a given deviation.

    Args:
        k: aspect ratio, >= 1.
        delta_theta: angle deviation in degrees, within [0, 90].

    Returns:
        IoU in [0, 1]. The two branches meet continuously at the critical
        deviation; at exactly 90 degrees the parallelogram branch is used
        for both branches' shared limit, which is the numerically stable
        expression there (tan diverges at 90).
    """
    if not (math.isfinite(k) and k >= 1.0):
        raise ValidationError(f"aspect ratio must be >= 1, got {k}")
    if not (math.isfinite(delta_theta) and 0.0 <= delta_theta <= 90.0):
        raise ValidationError(f"angle deviation must lie in [0, 90], got {delta_theta}")
    if delta_theta == 0.0:
        return 1.0
    th = math.radians(delta_theta)
    if delta_theta == 90.0:
        value = 4.0 / (8.0 * k * math.sin(th) - 4.0)
    elif delta_theta <= critical_angle(k):
        tan = math.tan(th)
        x = (1.0 - k * math.tan(th / 2.0)) ** 2 * tan * tan
        y = ((-2.0 * math.sin(th / 2.0) ** 2 + k * math.sin(th)) / math.cos(th)) ** 2
        value = (4.0 * k * tan - x - y) / (4.0 * k * tan + x + y)
    else:
        value = 4.0 / (8.0 * k * math.sin(th) - 4.0)
    return min(max(value, 0.0), 1.0)


def _same_center_pair(k: float, delta_theta: float) -> tuple[RBox, RBox]:
    """Unit-height, same-center boxes of aspect ratio k, one rotated."""
    a = canonical_rbox(0.0, 0.0, k, 1.0, 0.0)
    b = canonical_rbox(0.0, 0.0, k, 1.0, delta_theta % 180.0)
    return a, b


def same_center_iou(k: float, delta_theta: float) -> float:
    """Polygon-oracle SkewIoU of the canonical same-center pair."""
    a, b = _same_center_pair(k, delta_theta)
    return skewiou_polygon(a, b)


@dataclass(frozen=True)
class IoUCurve:
    """Sampled same-center SkewIoU versus angle deviation for one aspect ratio."""

    k: float
    samples: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        if not self.samples:
            raise ValidationError("IoUCurve needs at least one sample")
        deltas = [d for d, _ in self.samples]
        if any(b <= a for a, b in zip(deltas, deltas[1:])):
            raise ValidationError("IoUCurve samples must be sorted by deviation")
        if any(not 0.0 <= v <= 1.0 for _, v in self.samples):
            raise ValidationError("IoUCurve values must lie in [0, 1]")
        if self.samples[0] != (0.0, 1.0):
            raise ValidationError("IoUCurve must start at (0, 1.0)")

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("delta_theta,iou\n")
        for d, v in self.samples:
            buf.write(f"{d:.10g},{v:.12g}\n")
        return buf.getvalue()


def iou_curve(k: float, step: float) -> IoUCurve:
    """Sample the same-center oracle at deviations 0, step, 2*step, ..., 90."""
    if not (math.isfinite(k) and k >= 1.0):
        raise ValidationError(f"aspect ratio must be >= 1, got {k}")
    if not (0.0 < step <= 5.0):
        raise ValidationError(f"step must lie in (0, 5], got {step}")
    deltas = []
    i = 0
    while True:
        d = i * step
        if d >= 90.0 - 1e-12:
            break
        deltas.append(d)
        i += 1
    deltas.append(90.0)
    samples = tuple((float(d), same_center_iou(k, d)) for d in deltas)
    return IoUCurve(k=float(k), samples=samples)


class MinSkewIoU(NamedTuple):
    min: float
    argmin: float


_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def min_skewiou(k: float, grid_step: float = 0.1, refine_tol: float = 1e-4) -> MinSkewIoU:
    """Minimum same-center SkewIoU over deviations in [0, 90] degrees.

    A coarse grid scan localizes the global minimum (the curve can have an
    interior dip and a decaying tail, so a pure line search is not safe),
    then golden-section refinement narrows the argmin below `refine_tol`
    degrees. No analytic argmin is attempted.
    """
    if not (math.isfinite(k) and k >= 1.0):
        raise ValidationError(f"aspect ratio must be >= 1, got {k}")

    n = int(round(90.0 / grid_step))
    grid = np.linspace(0.0, 90.0, n + 1)
    values = [same_center_iou(k, d) for d in grid]
    i = int(np.argmin(values))

    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, n)]
    x1 = hi - _GOLDEN * (hi - lo)
    x2 = lo + _GOLDEN * (hi - lo)
    f1 = same_center_iou(k, x1)
    f2 = same_center_iou(k, x2)
    while hi - lo > refine_tol:
        if f1 <= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - _GOLDEN * (hi - lo)
            f1 = same_center_iou(k, x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + _GOLDEN * (hi - lo)
            f2 = same_center_iou(k, x2)

    candidates = [(values[i], grid[i]), (f1, x1), (f2, x2)]
    best_value, best_arg = min(candidates, key=lambda c: c[0])
    return MinSkewIoU(float(best_value), float(best_arg))
