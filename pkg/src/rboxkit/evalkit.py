"""Oriented-detection evaluation over DOTA-format files.

Ingests DOTA v1.0 annotation directories and Task-1 prediction files,
scores them with average precision at configurable SkewIoU thresholds
(rotated geometry or the horizontal-circumscribing-rectangle mode), and
runs the angle-perturbation study that quantifies how forgiving a given
threshold is to pure angle error for each aspect-ratio regime.

Matching follows the VOC/DOTA devkit family: detections are processed in
descending score order (ties kept in input order) and matched greedily to
the unmatched, non-difficult ground truth of the same image with the
highest IoU at or above the threshold. A detection whose only qualifying
overlap is a difficult ground truth is dropped from the tally entirely;
difficult ground truths never count toward recall.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dnoise import make_rng
from .errors import ValidationError
from .rbox import (HBox, QuadPolygon, RBox, aspect_ratio, canonical_rbox,
                   from_quad, h_circumscribe)
from .skewiou import skewiou_polygon

VOC07_RECALL_POINTS = np.linspace(0.0, 1.0, 11)

DEFAULT_K_BUCKETS = ((1.0, 1.5), (1.5, 3.0), (3.0, math.inf))

SUITE_THRESHOLDS = tuple(round(0.50 + 0.05 * i, 2) for i in range(10))


@dataclass(frozen=True)
class GroundTruthRecord:
    image_id: str
    box: RBox
    category: str
    difficult: bool = False

    def __post_init__(self) -> None:
        if not self.image_id or not self.category:
            raise ValidationError("ground-truth records need non-empty image and category ids")


@dataclass(frozen=True)
class DetectionRecord:
    image_id: str
    box: RBox
    category: str
    score: float

    def __post_init__(self) -> None:
        if not self.image_id or not self.category:
            raise ValidationError("detection records need non-empty image and category ids")
        if not (math.isfinite(self.score) and 0.0 <= self.score <= 1.0):
            raise ValidationError(f"detection score must lie in [0, 1], got {self.score}")


@dataclass(frozen=True)
class PRCurve:
    """Precision/recall trajectory of one category plus its summary AP."""

    points: tuple[tuple[float, float], ...]
    ap: float

    def __post_init__(self) -> None:
        recalls = [r for r, _ in self.points]
        if any(b < a for a, b in zip(recalls, recalls[1:])):
            raise ValidationError("PR curve recall must be non-decreasing")
        if any(not 0.0 <= p <= 1.0 for _, p in self.points):
            raise ValidationError("PR curve precision must lie in [0, 1]")
        if not 0.0 <= self.ap <= 1.0:
            raise ValidationError("AP must lie in [0, 1]")


@dataclass(frozen=True)
class ParseWarning:
    path: str
    line_number: int
    message: str


@dataclass
class ParseResult:
    """Records plus per-line warnings for inputs that were skipped, not hidden."""

    records: list
    warnings: list[ParseWarning] = field(default_factory=list)

    def __iter__(self):
        return iter(self.records)

    def __len__(self) -> int:
        return len(self.records)


@dataclass(frozen=True)
class APReport:
    per_category: dict[str, PRCurve]
    mean_ap: float


def _parse_quad_line(coords) -> RBox:
    quad = QuadPolygon.from_points(np.asarray(coords, dtype=float).reshape(4, 2))
    return from_quad(quad)


def parse_dota_gt(path) -> ParseResult:
    """Read a directory of per-image DOTA v1.0 annotation files.

    Each file may start with `imagesource:`/`gsd:` header lines; data lines
    are "x1 y1 x2 y2 x3 y3 x4 y4 category difficult". The image id is the
    file stem. Malformed lines become warnings; a file whose data lines are
    all malformed raises, as does an unreadable path.
    """
    root = Path(path)
    if not root.is_dir():
        raise ValidationError(f"ground-truth path is not a readable directory: {root}")
    records: list[GroundTruthRecord] = []
    warnings: list[ParseWarning] = []
    for file in sorted(root.glob("*.txt")):
        image_id = file.stem
        n_data, n_parsed = 0, 0
        for line_no, raw in enumerate(file.read_text().splitlines(), start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("imagesource") or line.startswith("gsd"):
                continue
            n_data += 1
            tokens = line.split()
            if len(tokens) != 10:
                warnings.append(ParseWarning(str(file), line_no,
                                             f"expected 10 tokens, got {len(tokens)}"))
                continue
            try:
                coords = [float(t) for t in tokens[:8]]
            except ValueError:
                warnings.append(ParseWarning(str(file), line_no, "non-numeric coordinates"))
                continue
            if tokens[9] not in ("0", "1"):
                warnings.append(ParseWarning(str(file), line_no,
                                             f"difficult flag must be 0 or 1, got {tokens[9]!r}"))
                continue
            try:
                box = _parse_quad_line(coords)
            except ValidationError as exc:
                warnings.append(ParseWarning(str(file), line_no, str(exc)))
                continue
            records.append(GroundTruthRecord(image_id, box, tokens[8], tokens[9] == "1"))
            n_parsed += 1
        if n_data > 0 and n_parsed == 0:
            raise ValidationError(f"{file}: every annotation line is malformed")
    return ParseResult(records, warnings)


def parse_dota_preds(path) -> ParseResult:
    """Read a directory of DOTA Task-1 prediction files.

    Files are named `Task1_<category>.txt` with lines
    "image_id score x1 y1 x2 y2 x3 y3 x4 y4". An empty file is an empty
    category; an out-of-range score is a validation error rather than a
    warning because it indicates a broken producer, not a dirty line.
    """
    root = Path(path)
    if not root.is_dir():
        raise ValidationError(f"prediction path is not a readable directory: {root}")
    records: list[DetectionRecord] = []
    warnings: list[ParseWarning] = []
    for file in sorted(root.glob("Task1_*.txt")):
        category = file.stem[len("Task1_"):]
        if not category:
            raise ValidationError(f"{file}: empty category name")
        n_data, n_parsed = 0, 0
        for line_no, raw in enumerate(file.read_text().splitlines(), start=1):
            line = raw.strip()
            if not line:
                continue
            n_data += 1
            tokens = line.split()
            if len(tokens) != 10:
                warnings.append(ParseWarning(str(file), line_no,
                                             f"expected 10 tokens, got {len(tokens)}"))
                continue
            try:
                score = float(tokens[1])
                coords = [float(t) for t in tokens[2:]]
            except ValueError:
                warnings.append(ParseWarning(str(file), line_no, "non-numeric fields"))
                continue
            if not 0.0 <= score <= 1.0:
                raise ValidationError(
                    f"{file}:{line_no}: score {score} outside [0, 1]")
            try:
                box = _parse_quad_line(coords)
            except ValidationError as exc:
                warnings.append(ParseWarning(str(file), line_no, str(exc)))
                continue
            records.append(DetectionRecord(tokens[0], box, category, score))
            n_parsed += 1
        if n_data > 0 and n_parsed == 0:
            raise ValidationError(f"{file}: every prediction line is malformed")
    return ParseResult(records, warnings)


def cap_detections(dets, limit: int) -> list:
    """Keep only the `limit` highest-scoring detections of each image.

    Score ties keep input order. Submission servers impose such caps; the
    evaluator itself never does, so this is an explicit preprocessing step.
    """
    if limit < 1:
        raise ValidationError(f"detection cap must be >= 1, got {limit}")
    by_image: dict[str, list[tuple[int, DetectionRecord]]] = {}
    for index, det in enumerate(dets):
        by_image.setdefault(det.image_id, []).append((index, det))
    keep = []
    for entries in by_image.values():
        ranked = sorted(entries, key=lambda e: (-e[1].score, e[0]))
        keep.extend(ranked[:limit])
    keep.sort(key=lambda e: e[0])
    return [det for _, det in keep]


def _hbox_iou(a: HBox, b: HBox) -> float:
    iw = min(a.xmax, b.xmax) - max(a.xmin, b.xmin)
    ih = min(a.ymax, b.ymax) - max(a.ymin, b.ymin)
    if iw <= 0.0 or ih <= 0.0:
        return 0.0
    inter = iw * ih
    union = ((a.xmax - a.xmin) * (a.ymax - a.ymin)
             + (b.xmax - b.xmin) * (b.ymax - b.ymin) - inter)
    return inter / union if union > 0 else 0.0


@dataclass
class _CategoryEval:
    name: str
    npos: int
    # per sorted detection: (image_id, IoU against that image's gts)
    entries: list
    difficult_by_image: dict


def _prepare(dets, gts, mode: str, jobs: int | None = None) -> list[_CategoryEval]:
    if mode not in ("rotated", "horizontal"):
        raise ValidationError(f"mode must be 'rotated' or 'horizontal', got {mode!r}")

    gt_by_cat: dict[str, list[GroundTruthRecord]] = {}
    for gt in gts:
        gt_by_cat.setdefault(gt.category, []).append(gt)
    det_by_cat: dict[str, list[DetectionRecord]] = {}
    for det in dets:
        det_by_cat.setdefault(det.category, []).append(det)

    categories = sorted(name for name, members in gt_by_cat.items()
                        if any(not g.difficult for g in members))

    if mode == "rotated":
        def pair_iou(det_box, gt_box):
            return skewiou_polygon(det_box, gt_box)
    else:
        def pair_iou(det_box, gt_box):
            return _hbox_iou(h_circumscribe(det_box), h_circumscribe(gt_box))

    def build(name: str) -> _CategoryEval:
        members = gt_by_cat[name]
        boxes_by_image: dict[str, list[RBox]] = {}
        difficult_by_image: dict[str, np.ndarray] = {}
        for gt in members:
            boxes_by_image.setdefault(gt.image_id, []).append(gt.box)
        for image_id in boxes_by_image:
            flags = [g.difficult for g in members if g.image_id == image_id]
            difficult_by_image[image_id] = np.asarray(flags, dtype=bool)
        npos = sum(1 for g in members if not g.difficult)

        cat_dets = det_by_cat.get(name, [])
        order = sorted(range(len(cat_dets)), key=lambda i: -cat_dets[i].score)
        entries = []
        for i in order:
            det = cat_dets[i]
            gt_boxes = boxes_by_image.get(det.image_id, [])
            ious = np.asarray([pair_iou(det.box, g) for g in gt_boxes], dtype=float)
            entries.append((det.image_id, ious))
        return _CategoryEval(name, npos, entries, difficult_by_image)

    if jobs and jobs > 1 and len(categories) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(build, categories))
    return [build(name) for name in categories]


def _ap_from_pr(recalls: np.ndarray, precisions: np.ndarray, interp: str) -> float:
    if recalls.size == 0:
        return 0.0
    if interp == "voc07":
        total = 0.0
        for t in VOC07_RECALL_POINTS:
            mask = recalls >= t - 1e-12
            total += float(precisions[mask].max()) if mask.any() else 0.0
        return total / len(VOC07_RECALL_POINTS)
    if interp == "all_points":
        mrec = np.concatenate(([0.0], recalls, [1.0]))
        mpre = np.concatenate(([0.0], precisions, [0.0]))
        for i in range(mpre.size - 2, -1, -1):
            mpre[i] = max(mpre[i], mpre[i + 1])
        change = np.where(mrec[1:] != mrec[:-1])[0]
        return float(np.sum((mrec[change + 1] - mrec[change]) * mpre[change + 1]))
    raise ValidationError(f"interp must be 'voc07' or 'all_points', got {interp!r}")


def _ap_at(cat: _CategoryEval, threshold: float, interp: str) -> PRCurve:
    matched = {image: np.zeros(flags.size, dtype=bool)
               for image, flags in cat.difficult_by_image.items()}
    tp, fp = [], []
    for image_id, ious in cat.entries:
        if ious.size == 0:
            tp.append(0.0)
            fp.append(1.0)
            continue
        difficult = cat.difficult_by_image[image_id]
        used = matched[image_id]
        qualifying = ious >= threshold
        candidates = qualifying & ~difficult & ~used
        if candidates.any():
            best = int(np.argmax(np.where(candidates, ious, -1.0)))
            used[best] = True
            tp.append(1.0)
            fp.append(0.0)
        elif (qualifying & difficult).any():
            # only difficult overlap: removed from the tally
            continue
        else:
            tp.append(0.0)
            fp.append(1.0)
    tp_cum = np.cumsum(tp)
    fp_cum = np.cumsum(fp)
    recalls = tp_cum / cat.npos
    precisions = tp_cum / np.maximum(tp_cum + fp_cum, 1e-12)
    ap = _ap_from_pr(recalls, precisions, interp)
    points = tuple((float(r), float(p)) for r, p in zip(recalls, precisions))
    return PRCurve(points, ap)


def average_precision(dets, gts, iou_threshold: float, mode: str = "rotated",
                      interp: str = "voc07", jobs: int | None = None) -> APReport:
    """Per-category PR curves and their mean AP at one IoU threshold.

    Args:
        dets: DetectionRecord sequence.
        gts: GroundTruthRecord sequence.
        iou_threshold: match threshold in (0, 1).
        mode: "rotated" for SkewIoU, "horizontal" for IoU of the
            circumscribing axis-aligned boxes.
        interp: "voc07" (11-point) or "all_points".

    Categories without a single non-difficult ground truth are excluded
    (their recall is undefined), so empty inputs give mean AP 0 with no
    curves.
    """
    if not 0.0 < iou_threshold < 1.0:
        raise ValidationError(f"IoU threshold must lie in (0, 1), got {iou_threshold}")
    prepared = _prepare(dets, gts, mode, jobs)
    per_category = {cat.name: _ap_at(cat, iou_threshold, interp) for cat in prepared}
    mean_ap = (float(np.mean([c.ap for c in per_category.values()]))
               if per_category else 0.0)
    return APReport(per_category, mean_ap)


def evaluate_suite(dets, gts, interp: str = "voc07", jobs: int | None = None) -> dict:
    """AP at 0.50 and 0.75, the 0.50:0.95 mean, and the horizontal variants.

    IoU matrices are computed once per mode and shared across thresholds.
    """
    rotated = _prepare(dets, gts, "rotated", jobs)
    horizontal = _prepare(dets, gts, "horizontal", jobs)

    def mean_ap(prepared, threshold):
        if not prepared:
            return 0.0
        return float(np.mean([_ap_at(cat, threshold, interp).ap for cat in prepared]))

    ap_by_threshold = {t: mean_ap(rotated, t) for t in SUITE_THRESHOLDS}
    return {
        "AP50": ap_by_threshold[0.5],
        "AP75": ap_by_threshold[0.75],
        "AP50:95": float(np.mean([ap_by_threshold[t] for t in SUITE_THRESHOLDS])),
        "AP50-H": mean_ap(horizontal, 0.5),
        "AP75-H": mean_ap(horizontal, 0.75),
    }


def _bucket_label(lo: float, hi: float) -> str:
    if math.isinf(hi):
        return f"k>{lo:g}"
    if lo <= 1.0:
        return f"k<={hi:g}"
    return f"{lo:g}<k<={hi:g}"


def perturbation_study(gts, deviations, k_buckets=DEFAULT_K_BUCKETS,
                       interp: str = "voc07") -> list[dict]:
    """AP50/AP75 when predictions are the ground truths rotated by a fixed angle.

    For each deviation the predictions are perfect copies of the ground
    truths except for the angle shift, scored 1.0, evaluated overall and
    within each aspect-ratio bucket. This isolates exactly how much angle
    error each threshold forgives per aspect-ratio regime.

    Returns:
        One row per (deviation, bucket) as a plain dict:
        {"delta_theta", "bucket", "ap50", "ap75", "gt_count"}.
    """
    gts = list(gts)
    groups: list[tuple[str, list]] = [("all", gts)]
    for lo, hi in k_buckets:
        members = [g for g in gts
                   if (lo < aspect_ratio(g.box) <= hi) or (lo <= 1.0 and aspect_ratio(g.box) <= hi)]
        groups.append((_bucket_label(lo, hi), members))

    rows = []
    for deviation in deviations:
        for label, members in groups:
            if not members:
                continue
            preds = [DetectionRecord(
                g.image_id,
                canonical_rbox(g.box.cx, g.box.cy, g.box.w, g.box.h,
                               g.box.theta + deviation),
                g.category, 1.0) for g in members]
            ap50 = average_precision(preds, members, 0.5, "rotated", interp).mean_ap
            ap75 = average_precision(preds, members, 0.75, "rotated", interp).mean_ap
            rows.append({
                "delta_theta": float(deviation),
                "bucket": label,
                "ap50": ap50,
                "ap75": ap75,
                "gt_count": len(members),
            })
    return rows


def angle_noise_study(gts, noise_cfg, k_buckets=DEFAULT_K_BUCKETS,
                      interp: str = "voc07") -> list[dict]:
    """Perturbation study with seeded random angle noise instead of a fixed shift.

    Each ground truth's angle is independently perturbed by the bounded
    uniform noise model, the draw order following the input order so a seed
    reproduces the exact study.
    """
    from .dnoise import angle_noise

    gts = list(gts)
    rng = make_rng(noise_cfg.seed)
    noisy_theta = [angle_noise(g.box.theta, noise_cfg, rng) for g in gts]
    preds_all = [DetectionRecord(
        g.image_id,
        canonical_rbox(g.box.cx, g.box.cy, g.box.w, g.box.h, theta),
        g.category, 1.0) for g, theta in zip(gts, noisy_theta)]

    groups: list[tuple[str, list, list]] = [("all", gts, preds_all)]
    for lo, hi in k_buckets:
        members, preds = [], []
        for g, p in zip(gts, preds_all):
            k = aspect_ratio(g.box)
            if (lo < k <= hi) or (lo <= 1.0 and k <= hi):
                members.append(g)
                preds.append(p)
        groups.append((_bucket_label(lo, hi), members, preds))

    rows = []
    for label, members, preds in groups:
        if not members:
            continue
        rows.append({
            "noise_scale": noise_cfg.angle_scale,
            "bucket": label,
            "ap50": average_precision(preds, members, 0.5, "rotated", interp).mean_ap,
            "ap75": average_precision(preds, members, 0.75, "rotated", interp).mean_ap,
            "gt_count": len(members),
        })
    return rows


def full_report(dets, gts, interp: str = "voc07", jobs: int | None = None) -> dict:
    """Suite metrics plus per-category AP50/AP75/AP50:95 in one pass.

    IoU matrices are prepared once per mode and reused for every threshold,
    which is what keeps DOTA-scale inputs tractable.
    """
    rotated = _prepare(dets, gts, "rotated", jobs)
    horizontal = _prepare(dets, gts, "horizontal", jobs)

    per_category: dict[str, dict] = {}
    ap_by_threshold: dict[float, list[float]] = {t: [] for t in SUITE_THRESHOLDS}
    for cat in rotated:
        by_thr = {t: _ap_at(cat, t, interp).ap for t in SUITE_THRESHOLDS}
        for t, ap in by_thr.items():
            ap_by_threshold[t].append(ap)
        per_category[cat.name] = {
            "ap50": by_thr[0.5],
            "ap75": by_thr[0.75],
            "ap5095": float(np.mean(list(by_thr.values()))),
        }

    def mean_over(values):
        return float(np.mean(values)) if values else 0.0

    def mean_ap_h(threshold):
        return mean_over([_ap_at(cat, threshold, interp).ap for cat in horizontal])

    summary = {
        "AP50": mean_over(ap_by_threshold[0.5]),
        "AP75": mean_over(ap_by_threshold[0.75]),
        "AP50:95": mean_over([mean_over(v) for v in ap_by_threshold.values()]
                             if per_category else []),
        "AP50-H": mean_ap_h(0.5),
        "AP75-H": mean_ap_h(0.75),
        "interp": interp,
    }
    return {"summary": summary, "per_category": per_category}


def synthetic_ground_truth(count: int, seed: int = 0, k_range=(1.0, 8.0),
                           category: str = "object") -> list:
    """Synthetic single-object-per-image ground truths with log-uniform aspect ratio.

    Isolating each object in its own image keeps the perturbation study's
    IoU work linear in the object count and rules out cross-object matches.
    """
    if count < 1:
        raise ValidationError(f"count must be >= 1, got {count}")
    lo, hi = k_range
    if not 1.0 <= lo < hi:
        raise ValidationError(f"k_range must satisfy 1 <= lo < hi, got {k_range}")
    rng = make_rng(seed)
    records = []
    for i in range(count):
        k = math.exp(rng.uniform(math.log(lo), math.log(hi)))
        h = rng.uniform(10.0, 40.0)
        theta = rng.uniform(0.0, 180.0) % 180.0
        box = canonical_rbox(512.0, 512.0, k * h, h, theta)
        records.append(GroundTruthRecord(f"SYN{i:05d}", box, category, False))
    return records
