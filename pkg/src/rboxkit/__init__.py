"""Rotated-box geometry, angle-label encodings, matching, and evaluation.

The toolkit covers the numerical core of aspect-ratio-sensitive oriented
object detection: exact and closed-form SkewIoU, adaptive angle-label
encodings, aspect-ratio-weighted matching with optimal assignment, bounded
angle/box noise, rotated deformable-attention sampling with analytic
gradients, and a DOTA-format AP evaluator.
"""

from .anglecode import N_BINS, arcsl_encode, csl_encode, decode, label_bce
from .arsmatch import (Assignment, angle_cost, angle_loss, ar_weight,
                       build_cost_matrix, hungarian)
from .dnoise import NoiseConfig, angle_noise, box_noise, make_rng, wrap_angle
from .errors import ValidationError
from .evalkit import (APReport, DetectionRecord, GroundTruthRecord, PRCurve,
                      angle_noise_study, average_precision, cap_detections,
                      evaluate_suite, full_report, parse_dota_gt,
                      parse_dota_preds, perturbation_study,
                      synthetic_ground_truth)
from .rbox import (ANGLE_PERIOD, HBox, QuadPolygon, RBox, angle_deviation,
                   aspect_ratio, canonical_rbox, from_quad, h_circumscribe,
                   to_quad)
from .rdageom import (FeatureGrid, RdaOutput, SamplingSpec, alignment_score,
                      bilinear_sample, gradient_check_suite, rda_forward,
                      rotated_sampling_points)
from .skewiou import (IoUCurve, MinSkewIoU, critical_angle, iou_curve,
                      min_skewiou, same_center_iou, skewiou_closed,
                      skewiou_polygon)

__version__ = "0.1.0"

__all__ = [
    "ANGLE_PERIOD", "APReport", "Assignment", "DetectionRecord", "FeatureGrid",
    "GroundTruthRecord", "HBox", "IoUCurve", "MinSkewIoU", "N_BINS",
    "NoiseConfig", "PRCurve", "QuadPolygon", "RBox", "RdaOutput",
    "SamplingSpec", "ValidationError", "alignment_score", "angle_cost",
    "angle_deviation", "angle_loss", "angle_noise", "angle_noise_study",
    "ar_weight", "arcsl_encode", "aspect_ratio", "average_precision",
    "bilinear_sample", "box_noise", "build_cost_matrix", "canonical_rbox",
    "cap_detections", "critical_angle", "csl_encode", "decode",
    "evaluate_suite", "from_quad",
    "full_report", "gradient_check_suite", "h_circumscribe", "hungarian",
    "iou_curve", "label_bce", "make_rng", "min_skewiou", "parse_dota_gt",
    "parse_dota_preds", "perturbation_study", "rda_forward",
    "rotated_sampling_points", "same_center_iou", "skewiou_closed",
    "skewiou_polygon", "synthetic_ground_truth", "to_quad", "wrap_angle",
]
