"""Aspect-ratio-sensitive angle costs and optimal bipartite assignment.

Objects with a large aspect ratio are far more sensitive to angle error
(their SkewIoU collapses quickly with deviation), so both the matching
cost and the training loss scale the angle term by k/(k+1): near 0.5 for
squares, approaching 1 for extreme ratios. The full matching cost is the
usual set-prediction assembly (classification + box L1) plus that weighted
angle-classification term.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .anglecode import N_BINS, arcsl_encode, label_bce
from .errors import ValidationError
from .rbox import RBox, aspect_ratio
from .skewiou import skewiou_polygon

DEFAULT_WEIGHTS = (2.0, 5.0, 1.0)  # (w_cls, w_box, w_theta)


@dataclass(frozen=True)
class Assignment:
    """One-to-one prediction/ground-truth matching with its summed cost."""

    pairs: tuple[tuple[int, int], ...]
    total_cost: float


def ar_weight(k: float) -> float:
    """Angle-term weight k/(k+1); 0.5 for squares, increasing toward 1."""
    if not (isinstance(k, (int, float)) and math.isfinite(k) and k >= 1.0):
        raise ValidationError(f"aspect ratio must be >= 1, got {k!r}")
    return k / (k + 1.0)


def angle_cost(pred_label: np.ndarray, gt_theta: float, k: float) -> float:
    """Aspect-ratio-weighted angle matching cost.

    Mean per-bin BCE of the predicted bin vector against the ground truth's
    adaptive label, scaled by ar_weight(k). Strictly positive even for a
    perfect prediction: soft labels in (0, 1) carry self-entropy.
    """
    return ar_weight(k) * label_bce(pred_label, arcsl_encode(gt_theta, k))


def angle_loss(pred_label: np.ndarray, gt_theta: float, k: float) -> float:
    """Aspect-ratio-weighted angle training loss.

    Currently the same weighted BCE as `angle_cost`; kept as a separate
    entry point because the training loss and the matching cost are free to
    diverge later.
    """
    return ar_weight(k) * label_bce(pred_label, arcsl_encode(gt_theta, k))


def build_cost_matrix(preds, gts, weights=DEFAULT_WEIGHTS, *,
                      skewiou_cost_weight: float = 0.0) -> np.ndarray:
    """Assemble the prediction-by-ground-truth matching cost matrix.

    Entry (i, j) =
        w_cls * (1 - score_i[class_j])
      + w_box * L1 over (cx, cy, w, h) of the long-edge-normalized boxes
      + w_theta * angle_cost(label_i, theta_j, k_j)

    The box L1 deliberately excludes the angle: orientation is handled
    entirely by the classification term, with k taken from the ground
    truth. An optional (1 - SkewIoU) term can be enabled for
    experimentation via `skewiou_cost_weight`.

    Args:
        preds: sequence of (class_scores, RBox, label_vector) triples.
        gts: sequence of (class_id, RBox) pairs.
        weights: (w_cls, w_box, w_theta).

    Returns:
        Dense float matrix of shape (len(preds), len(gts)).
    """
    if len(preds) == 0 or len(gts) == 0:
        raise ValidationError("cost matrix needs at least one prediction and one ground truth")
    if len(weights) != 3:
        raise ValidationError(f"weights must be (w_cls, w_box, w_theta), got {weights!r}")
    w_cls, w_box, w_theta = (float(w) for w in weights)

    score_rows = []
    for scores, box, label in preds:
        scores = np.asarray(scores, dtype=float)
        if scores.ndim != 1 or scores.size == 0:
            raise ValidationError("class scores must be a non-empty 1-D vector")
        label = np.asarray(label, dtype=float)
        if label.shape != (N_BINS,):
            raise ValidationError(f"prediction label must have shape ({N_BINS},)")
        if not isinstance(box, RBox):
            raise ValidationError("prediction box must be an RBox")
        score_rows.append((scores, box, label))
    sizes = {s.size for s, _, _ in score_rows}
    if len(sizes) != 1:
        raise ValidationError(f"predictions disagree on class count: {sorted(sizes)}")
    n_classes = sizes.pop()
    for class_id, box in gts:
        if not (0 <= int(class_id) < n_classes):
            raise ValidationError(
                f"ground-truth class {class_id} out of range for {n_classes} score entries")
        if not isinstance(box, RBox):
            raise ValidationError("ground-truth box must be an RBox")

    matrix = np.zeros((len(preds), len(gts)), dtype=float)
    for j, (class_id, gt_box) in enumerate(gts):
        k = aspect_ratio(gt_box)
        gt_params = np.array([gt_box.cx, gt_box.cy, gt_box.w, gt_box.h])
        for i, (scores, box, label) in enumerate(score_rows):
            cost = w_cls * (1.0 - scores[int(class_id)])
            params = np.array([box.cx, box.cy, box.w, box.h])
            cost += w_box * float(np.abs(params - gt_params).sum())
            cost += w_theta * angle_cost(label, gt_box.theta, k)
            if skewiou_cost_weight:
                cost += skewiou_cost_weight * (1.0 - skewiou_polygon(box, gt_box))
            matrix[i, j] = cost
    return matrix


def _optimal_total(cost: np.ndarray, rows, cols) -> float:
    if not rows or not cols:
        return 0.0
    sub = cost[np.ix_(rows, cols)]
    ri, ci = linear_sum_assignment(sub)
    return float(sub[ri, ci].sum())


def hungarian(matrix: np.ndarray) -> Assignment:
    """Minimum-cost injective matching of size min(rows, cols).

    The optimum itself comes from `scipy.optimize.linear_sum_assignment`;
    when several assignments tie, a refinement pass fixes pairs greedily in
    index order so the returned pair list is the lexicographically smallest
    optimal one. The refinement costs extra sub-solves only on ties, which
    is irrelevant at matching-demo sizes.
    """
    cost = np.asarray(matrix, dtype=float)
    if cost.ndim != 2 or cost.size == 0:
        raise ValidationError("cost matrix must be a non-empty 2-D array")
    if not np.all(np.isfinite(cost)):
        raise ValidationError("cost matrix entries must be finite")

    n_rows, n_cols = cost.shape
    n_pairs = min(n_rows, n_cols)
    row_ind, col_ind = linear_sum_assignment(cost)
    optimal = float(cost[row_ind, col_ind].sum())
    tol = 1e-9 * (1.0 + abs(optimal))

    pairs: list[tuple[int, int]] = []
    avail_cols = list(range(n_cols))
    remaining = optimal
    for i in range(n_rows):
        if len(pairs) == n_pairs:
            break
        rest_rows = list(range(i + 1, n_rows))
        need_after = n_pairs - len(pairs) - 1
        chosen = None
        if min(len(rest_rows), len(avail_cols) - 1) >= need_after:
            for j in avail_cols:
                rest_cols = [c for c in avail_cols if c != j]
                if cost[i, j] + _optimal_total(cost, rest_rows, rest_cols) <= remaining + tol:
                    chosen = j
                    break
        if chosen is None:
            # every optimum leaves row i unmatched (possible only when rows
            # outnumber columns)
            continue
        pairs.append((i, chosen))
        avail_cols.remove(chosen)
        remaining -= cost[i, chosen]

    total = float(sum(cost[i, j] for i, j in pairs))
    return Assignment(pairs=tuple(pairs), total_cost=total)
