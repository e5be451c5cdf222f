import numpy as np
import pytest

from rboxkit import (DetectionRecord, GroundTruthRecord, ValidationError,
                     angle_noise_study, aspect_ratio, average_precision,
                     canonical_rbox, evaluate_suite, full_report, parse_dota_gt,
                     parse_dota_preds, perturbation_study, same_center_iou,
                     synthetic_ground_truth)
from rboxkit.dnoise import NoiseConfig

from helpers import shapely_iou


def _gt(image, cx, cy, w, h, theta, category="plane", difficult=False):
    return GroundTruthRecord(image, canonical_rbox(cx, cy, w, h, theta),
                             category, difficult)


def _det(image, cx, cy, w, h, theta, score, category="plane"):
    return DetectionRecord(image, canonical_rbox(cx, cy, w, h, theta),
                           category, score)


# ---------------------------------------------------------------- parsing

GT_FILE = """imagesource:GoogleEarth
gsd:0.146343
0 0 4 0 4 2 0 2 plane 0
100 100 110 100 110 104 100 104 ship 1
10 10 14 10 14 12 10 half-token
"""


def test_parse_dota_gt(tmp_path):
    gt_dir = tmp_path / "gt"
    gt_dir.mkdir()
    (gt_dir / "P0001.txt").write_text(GT_FILE)
    (gt_dir / "P0002.txt").write_text("")  # image without objects

    result = parse_dota_gt(gt_dir)
    assert len(result.records) == 2
    first = result.records[0]
    assert first.image_id == "P0001"
    assert first.category == "plane"
    assert not first.difficult
    assert (first.box.cx, first.box.cy) == pytest.approx((2.0, 1.0), abs=1e-9)
    assert (first.box.w, first.box.h) == pytest.approx((4.0, 2.0), abs=1e-9)
    second = result.records[1]
    assert second.category == "ship" and second.difficult

    assert len(result.warnings) == 1
    assert result.warnings[0].line_number == 5
    assert "tokens" in result.warnings[0].message


def test_parse_dota_gt_error_paths(tmp_path):
    with pytest.raises(ValidationError):
        parse_dota_gt(tmp_path / "missing")
    bad_dir = tmp_path / "bad"
    bad_dir.mkdir()
    (bad_dir / "P0001.txt").write_text("only four tokens here\nanother bad line\n")
    with pytest.raises(ValidationError):
        parse_dota_gt(bad_dir)


def test_parse_dota_preds(tmp_path):
    pred_dir = tmp_path / "preds"
    pred_dir.mkdir()
    (pred_dir / "Task1_plane.txt").write_text(
        "P0001 0.97 0 0 4 0 4 2 0 2\n")
    (pred_dir / "Task1_ship.txt").write_text("")

    result = parse_dota_preds(pred_dir)
    assert len(result.records) == 1
    det = result.records[0]
    assert det.image_id == "P0001"
    assert det.category == "plane"
    assert det.score == pytest.approx(0.97)
    assert (det.box.cx, det.box.cy) == pytest.approx((2.0, 1.0), abs=1e-9)


def test_parse_dota_preds_rejects_out_of_range_score(tmp_path):
    pred_dir = tmp_path / "preds"
    pred_dir.mkdir()
    (pred_dir / "Task1_plane.txt").write_text("P0001 1.5 0 0 4 0 4 2 0 2\n")
    with pytest.raises(ValidationError):
        parse_dota_preds(pred_dir)


# ----------------------------------------------------------- matching / AP

def test_single_perfect_prediction_scores_one():
    gts = [_gt("A", 0, 0, 8, 2, 30)]
    dets = [_det("A", 0, 0, 8, 2, 30, 1.0)]
    for interp in ("voc07", "all_points"):
        for threshold in (0.5, 0.75):
            report = average_precision(dets, gts, threshold, "rotated", interp)
            assert report.mean_ap == 1.0


def test_two_prediction_fixture_gives_half():
    # score 0.9 detection overlaps below threshold, score 0.8 overlaps above:
    # PR passes through precision 0 then (recall 1, precision 0.5); both
    # interpolation rules integrate to exactly 0.5
    gts = [_gt("A", 2, 1, 4, 2, 0)]
    dets = [
        _det("A", 5, 1, 4, 2, 0, 0.9),    # IoU 2/14, a miss at 0.5
        _det("A", 2.2, 1, 4, 2, 0, 0.8),  # IoU ~0.905, a hit
    ]
    for interp in ("voc07", "all_points"):
        report = average_precision(dets, gts, 0.5, "rotated", interp)
        assert report.mean_ap == pytest.approx(0.5, abs=1e-12)
        curve = report.per_category["plane"]
        assert curve.points[0] == (0.0, 0.0)
        assert curve.points[1] == (1.0, 0.5)


def test_ap_monotone_in_threshold():
    gts = [_gt("A", 0, 0, 6, 2, 10), _gt("B", 5, 5, 9, 3, 150)]
    dets = [_det("A", 0.4, 0.1, 6, 2, 14, 0.9),
            _det("B", 5.2, 5.4, 9, 3, 145, 0.8)]
    aps = [average_precision(dets, gts, t).mean_ap
           for t in (0.3, 0.5, 0.7, 0.9)]
    assert all(a >= b - 1e-12 for a, b in zip(aps, aps[1:]))


def test_rotated_equals_horizontal_for_axis_aligned_boxes():
    rng = np.random.default_rng(50)
    gts, dets = [], []
    for i in range(20):
        image = f"I{i:02d}"
        cx, cy = rng.uniform(0, 100, size=2)
        w, h = rng.uniform(8, 20), rng.uniform(2, 8)
        gts.append(_gt(image, cx, cy, max(w, h), min(w, h), 0))
        dx, dy = rng.uniform(-2, 2, size=2)
        dets.append(_det(image, cx + dx, cy + dy, max(w, h), min(w, h), 0,
                         float(rng.uniform(0.5, 1.0))))
    for threshold in (0.5, 0.75):
        rotated = average_precision(dets, gts, threshold, "rotated")
        horizontal = average_precision(dets, gts, threshold, "horizontal")
        assert rotated.mean_ap == horizontal.mean_ap


def test_difficult_ground_truth_neither_counts_nor_penalizes():
    gts = [_gt("A", 0, 0, 8, 2, 0),
           _gt("A", 100, 100, 8, 2, 0, difficult=True)]
    dets = [_det("A", 0, 0, 8, 2, 0, 0.9),
            _det("A", 100, 100, 8, 2, 0, 0.8)]  # overlaps only the difficult gt
    report = average_precision(dets, gts, 0.5)
    # the difficult-only detection is dropped: one TP over one positive
    assert report.mean_ap == 1.0
    curve = report.per_category["plane"]
    assert curve.points == ((1.0, 1.0),)


def test_all_difficult_category_is_excluded():
    gts = [_gt("A", 0, 0, 8, 2, 0, category="ship", difficult=True),
           _gt("A", 50, 50, 8, 2, 0, category="plane")]
    dets = [_det("A", 50, 50, 8, 2, 0, 1.0, category="plane")]
    report = average_precision(dets, gts, 0.5)
    assert set(report.per_category) == {"plane"}
    assert report.mean_ap == 1.0


def test_equal_scores_tie_break_by_input_order():
    gts = [_gt("A", 0, 0, 8, 2, 0)]
    dets = [_det("A", 1.0, 0, 8, 2, 0, 0.7),   # weaker overlap, listed first
            _det("A", 0.1, 0, 8, 2, 0, 0.7)]   # stronger overlap, listed second
    report = average_precision(dets, gts, 0.5)
    curve = report.per_category["plane"]
    # first-listed detection takes the ground truth, second becomes FP
    assert curve.points[0] == (1.0, 1.0)
    assert curve.points[1] == (1.0, 0.5)


def test_mean_ap_over_categories_with_ground_truth():
    gts = [_gt("A", 0, 0, 8, 2, 0, category="plane"),
           _gt("A", 40, 40, 8, 2, 0, category="ship")]
    dets = [_det("A", 0, 0, 8, 2, 0, 1.0, category="plane")]  # ship missed
    report = average_precision(dets, gts, 0.5)
    assert report.per_category["plane"].ap == 1.0
    assert report.per_category["ship"].ap == 0.0
    assert report.mean_ap == 0.5


def test_rotated_mode_uses_actual_skew_geometry():
    # mirrored slender boxes share one circumscribing rectangle, so the
    # horizontal mode forgives what the rotated mode rejects
    gts = [_gt("A", 0, 0, 10, 1, 45)]
    dets = [_det("A", 0, 0, 10, 1, 135, 1.0)]
    iou = shapely_iou(gts[0].box, dets[0].box)
    assert iou < 0.5
    assert average_precision(dets, gts, 0.5, "rotated").mean_ap == 0.0
    assert average_precision(dets, gts, 0.5, "horizontal").mean_ap == 1.0


def test_evaluate_suite_perfect_and_empty():
    gts = [_gt(f"I{i}", 10 * i, 5, 8, 2, (13 * i) % 180) for i in range(6)]
    perfect = [_det(g.image_id, g.box.cx, g.box.cy, g.box.w, g.box.h,
                    g.box.theta, 1.0) for g in gts]
    suite = evaluate_suite(perfect, gts)
    assert suite == {"AP50": 1.0, "AP75": 1.0, "AP50:95": 1.0,
                     "AP50-H": 1.0, "AP75-H": 1.0}
    empty = evaluate_suite([], gts)
    assert empty == {"AP50": 0.0, "AP75": 0.0, "AP50:95": 0.0,
                     "AP50-H": 0.0, "AP75-H": 0.0}


def test_full_report_matches_suite():
    gts = [_gt("A", 0, 0, 8, 2, 20), _gt("B", 9, 9, 6, 3, 100, category="ship")]
    dets = [_det("A", 0.2, 0, 8, 2, 22, 0.9),
            _det("B", 9, 9.2, 6, 3, 99, 0.8, category="ship")]
    suite = evaluate_suite(dets, gts)
    report = full_report(dets, gts)
    for key, value in suite.items():
        assert report["summary"][key] == pytest.approx(value, abs=1e-12)
    assert set(report["per_category"]) == {"plane", "ship"}
    for stats in report["per_category"].values():
        assert set(stats) == {"ap50", "ap75", "ap5095"}


def test_jobs_parameter_is_deterministic():
    gts = [_gt("A", 0, 0, 8, 2, 20),
           _gt("B", 9, 9, 6, 3, 100, category="ship"),
           _gt("C", 20, 20, 9, 2, 60, category="car")]
    dets = [_det("A", 0.3, 0, 8, 2, 24, 0.9),
            _det("B", 9, 9.4, 6, 3, 99, 0.8, category="ship"),
            _det("C", 20, 20, 9, 2, 61, 0.7, category="car")]
    sequential = evaluate_suite(dets, gts)
    parallel = evaluate_suite(dets, gts, jobs=3)
    assert sequential == parallel


# ------------------------------------------------------- perturbation study

def _spread_gts(k_values, category="object"):
    return [GroundTruthRecord(f"I{i:03d}",
                              canonical_rbox(0, 0, 20 * k, 20, (37 * i) % 180),
                              category, False)
            for i, k in enumerate(k_values)]


def test_perturbation_zero_deviation_is_perfect():
    gts = _spread_gts([1.0, 1.3, 2.0, 4.0, 7.5])
    rows = perturbation_study(gts, [0.0])
    assert rows
    for row in rows:
        assert row["ap50"] == 1.0
        assert row["ap75"] == 1.0


def test_perturbation_small_ratio_bucket_survives_any_deviation_at_50():
    # strictly below the 1.5 boundary the same-center IoU never reaches 0.5
    # (at exactly 1.5 the 90-degree case touches 0.5 and rounding decides)
    gts = _spread_gts([1.0, 1.1, 1.2, 1.3, 1.45])
    for deviation in (10.0, 45.0, 90.0):
        rows = perturbation_study(gts, [deviation])
        bucket = next(r for r in rows if r["bucket"] == "k<=1.5")
        assert bucket["ap50"] == 1.0


def test_perturbation_bucket_containing_threshold_crossing_drops():
    # bisect the aspect ratio whose IoU at 10 degrees is exactly 0.75; the
    # bucket holding it must lose AP75 while keeping AP50
    lo, hi = 1.0, 8.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if same_center_iou(mid, 10.0) > 0.75:
            lo = mid
        else:
            hi = mid
    crossing = 0.5 * (lo + hi)
    assert 3.0 < crossing < 8.0  # sits inside the k>3 bucket

    gts = _spread_gts([crossing - 0.2, crossing + 0.2])
    rows = perturbation_study(gts, [10.0])
    top = next(r for r in rows if r["bucket"] == "k>3")
    assert top["gt_count"] == 2
    assert top["ap50"] == 1.0
    assert top["ap75"] < 1.0


def test_perturbation_rows_are_json_friendly():
    rows = perturbation_study(_spread_gts([1.2, 3.3]), [0.0, 5.0])
    for row in rows:
        assert set(row) == {"delta_theta", "bucket", "ap50", "ap75", "gt_count"}


def test_angle_noise_study_runs_deterministically():
    gts = _spread_gts([1.0, 2.0, 5.0])
    cfg = NoiseConfig(angle_scale=0.05, seed=11)
    rows_a = angle_noise_study(gts, cfg)
    rows_b = angle_noise_study(gts, cfg)
    assert rows_a == rows_b
    assert all(r["noise_scale"] == 0.05 for r in rows_a)
    overall = next(r for r in rows_a if r["bucket"] == "all")
    assert overall["ap50"] == 1.0  # 9-degree bound keeps every box above 0.5


def test_synthetic_ground_truth_properties():
    records = synthetic_ground_truth(200, seed=8)
    assert len(records) == 200
    assert len({r.image_id for r in records}) == 200
    ratios = [aspect_ratio(r.box) for r in records]
    assert all(1.0 <= k <= 8.0 for k in ratios)
    assert min(ratios) < 1.6 and max(ratios) > 5.0
    again = synthetic_ground_truth(200, seed=8)
    assert records == again
