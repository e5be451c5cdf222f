import math

import numpy as np
import pytest

from rboxkit import (RBox, ValidationError, canonical_rbox, critical_angle,
                     iou_curve, min_skewiou, same_center_iou, skewiou_closed,
                     skewiou_polygon)

from helpers import random_rbox, shapely_iou

SQRT2 = math.sqrt(2.0)


def test_identical_boxes_give_one_exactly():
    box = canonical_rbox(3, -4, 7, 2, 111.0)
    assert skewiou_polygon(box, box) == 1.0


def test_disjoint_boxes_give_zero():
    a = canonical_rbox(0, 0, 10, 4, 30)
    b = canonical_rbox(1000, 1000, 10, 4, 120)
    assert skewiou_polygon(a, b) == 0.0


def test_same_center_k2_quarter_turn_is_one_third():
    # hand geometry: crossing 2x1 strips overlap in a unit square, union 3
    a = canonical_rbox(0, 0, 2, 1, 0)
    b = canonical_rbox(0, 0, 2, 1, 90)
    assert skewiou_polygon(a, b) == pytest.approx(1 / 3, abs=1e-12)


def test_polygon_matches_shapely_on_random_pairs():
    rng = np.random.default_rng(20)
    for _ in range(300):
        a = random_rbox(rng, span=15.0)
        b = random_rbox(rng, span=15.0)
        assert skewiou_polygon(a, b) == pytest.approx(shapely_iou(a, b), abs=1e-9)


def test_polygon_symmetry_is_exact():
    rng = np.random.default_rng(21)
    for _ in range(200):
        a = random_rbox(rng, span=10.0)
        b = random_rbox(rng, span=10.0)
        assert skewiou_polygon(a, b) == skewiou_polygon(b, a)


def test_polygon_bounds_and_equality_condition():
    rng = np.random.default_rng(22)
    for _ in range(200):
        a = random_rbox(rng, span=5.0)
        b = random_rbox(rng, span=5.0)
        iou = skewiou_polygon(a, b)
        assert 0.0 <= iou <= 1.0
        if iou == 1.0:
            assert a.w * a.h == pytest.approx(b.w * b.h, rel=1e-9)


def test_polygon_rigid_motion_invariance():
    rng = np.random.default_rng(23)
    for _ in range(100):
        a = random_rbox(rng, span=5.0)
        b = random_rbox(rng, span=5.0)
        base = skewiou_polygon(a, b)
        rot = rng.uniform(0, 360)
        tx, ty = rng.uniform(-50, 50, size=2)
        moved = [_rigid(box, rot, tx, ty) for box in (a, b)]
        assert skewiou_polygon(*moved) == pytest.approx(base, abs=1e-9)


def _rigid(box: RBox, rot_deg: float, tx: float, ty: float) -> RBox:
    t = math.radians(rot_deg)
    c, s = math.cos(t), math.sin(t)
    return canonical_rbox(c * box.cx - s * box.cy + tx,
                          s * box.cx + c * box.cy + ty,
                          box.w, box.h, box.theta + rot_deg)


def test_polygon_scale_invariance():
    rng = np.random.default_rng(24)
    for _ in range(100):
        a = random_rbox(rng, span=5.0)
        b = random_rbox(rng, span=5.0)
        base = skewiou_polygon(a, b)
        scale = rng.uniform(0.1, 20.0)
        scaled = [canonical_rbox(box.cx * scale, box.cy * scale,
                                 box.w * scale, box.h * scale, box.theta)
                  for box in (a, b)]
        assert skewiou_polygon(*scaled) == pytest.approx(base, abs=1e-9)


@pytest.mark.parametrize("k", [1.0, 1.7, 4.0, 9.0])
def test_closed_form_zero_deviation(k):
    assert skewiou_closed(k, 0.0) == 1.0


def test_closed_form_square_quarter_turn():
    # second-branch expression 4 / (8*1*1 - 4) = 1
    assert skewiou_closed(1.0, 90.0) == 1.0


def test_closed_form_k2_quarter_turn():
    assert skewiou_closed(2.0, 90.0) == pytest.approx(1 / 3, abs=1e-12)


def test_closed_form_domain_errors():
    with pytest.raises(ValidationError):
        skewiou_closed(0.5, 10.0)
    with pytest.raises(ValidationError):
        skewiou_closed(2.0, -1.0)
    with pytest.raises(ValidationError):
        skewiou_closed(2.0, 90.5)


def test_closed_form_agrees_with_oracle_on_dense_grid():
    for k in (1.0, 1.2, 1.5, 2.0, 3.0, 5.0, 8.0):
        for dt in range(91):
            closed = skewiou_closed(k, float(dt))
            oracle = same_center_iou(k, float(dt))
            assert abs(closed - oracle) <= 1e-6, (k, dt, closed, oracle)


def test_closed_form_continuous_at_critical_angle():
    for k in (1.2, 2.0, 3.0, 5.0, 8.0):
        crit = critical_angle(k)
        below = skewiou_closed(k, crit - 1e-7)
        above = skewiou_closed(k, min(crit + 1e-7, 90.0))
        assert abs(below - above) < 1e-6


def test_iou_curve_square_symmetric_and_periodic():
    curve = iou_curve(1.0, 1.0)
    values = dict(curve.samples)
    assert curve.samples[0] == (0.0, 1.0)
    assert values[90.0] == pytest.approx(1.0, abs=1e-12)
    for d in range(0, 46):
        assert values[float(d)] == pytest.approx(values[float(90 - d)], abs=1e-9)


def test_iou_curve_small_ratio_never_below_half():
    curve = iou_curve(1.2, 0.5)
    assert min(v for _, v in curve.samples) >= 0.5


def test_iou_curve_large_ratio_crosses_half():
    curve = iou_curve(4.0, 0.5)
    below = [d for d, v in curve.samples if v < 0.5]
    assert below and min(below) < 90.0


def test_iou_curve_csv_round_trip():
    curve = iou_curve(2.0, 5.0)
    lines = curve.to_csv().strip().splitlines()
    assert lines[0] == "delta_theta,iou"
    parsed = [tuple(float(tok) for tok in line.split(",")) for line in lines[1:]]
    assert parsed[0] == (0.0, 1.0)
    assert parsed[-1][0] == 90.0
    assert len(parsed) == len(curve.samples)


def test_iou_curve_validation():
    with pytest.raises(ValidationError):
        iou_curve(0.9, 1.0)
    with pytest.raises(ValidationError):
        iou_curve(2.0, 6.0)
    with pytest.raises(ValidationError):
        iou_curve(2.0, 0.0)


def test_min_skewiou_square():
    # two unit squares at 45 degrees overlap in a regular octagon of area
    # 2*(sqrt(2)-1); IoU = that / (2 - that) = 1/sqrt(2)
    result = min_skewiou(1.0)
    assert result.min == pytest.approx(1 / SQRT2, abs=1e-6)
    assert result.argmin == pytest.approx(45.0, abs=1e-3)


def test_min_skewiou_large_ratio_monotone_regime():
    result = min_skewiou(8.0)
    assert result.min == pytest.approx(1 / 15, abs=1e-9)
    assert result.argmin == pytest.approx(90.0, abs=1e-3)


def test_min_skewiou_boundary_ratio():
    result = min_skewiou(1.5)
    assert result.min == pytest.approx(0.5, abs=1e-6)
    assert result.argmin == pytest.approx(90.0, abs=0.2)


def test_min_skewiou_interior_argmin_for_near_square():
    # the dip sits strictly inside (0, 90) for mildly elongated boxes
    result = min_skewiou(1.2)
    assert 40.0 < result.argmin < 60.0
    assert result.min < same_center_iou(1.2, 90.0)
