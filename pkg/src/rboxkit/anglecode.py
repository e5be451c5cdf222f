"""Angle-classification label encodings over 180 one-degree bins.

Two encoders share the same output contract (a length-180 vector with
values in [0, 1], peak 1.0 at the ground-truth bin, circular adjacency
between bins 179 and 0):

* `csl_encode` smooths the one-hot angle label with a Gaussian window of a
  fixed radius. The radius is a genuine hyperparameter: different radii
  give visibly different labels.
* `arcsl_encode` replaces the fixed window with min-max-normalized
  same-center SkewIoU values at each bin's deviation, so the label
  sharpness adapts to the box aspect ratio and no radius is needed.

Label vectors are plain float ndarrays of shape (180,): predictions
flowing into the losses use the same representation, and those generally
do not satisfy the encoder-output invariants.
"""

from __future__ import annotations

import inspect
import math
import threading

import numpy as np

from .errors import ValidationError
from .skewiou import same_center_iou

N_BINS = 180

# Gaussian tail is cut at this many radii, matching the windowed support of
# the classic circular-smooth-label formulation.
CSL_WINDOW_RADII = 4.0

_BIN_INDEX = np.arange(N_BINS, dtype=float)

# AR-CSL per-bin SkewIoU values depend only on the aspect ratio; cache them
# keyed by k quantized to 1e-3. Reads are lock-free; insertion is locked.
_ARCSL_CACHE: dict[int, np.ndarray] = {}
_ARCSL_LOCK = threading.Lock()


def _check_theta(theta: float) -> float:
    if not (isinstance(theta, (int, float)) and math.isfinite(theta)):
        raise ValidationError(f"angle must be finite, got {theta!r}")
    if not 0.0 <= theta < 180.0:
        raise ValidationError(f"angle must lie in [0, 180), got {theta}")
    return float(theta)


def _circular_bin_distance(theta: float) -> np.ndarray:
    """Distance from every integer bin center to theta, modulo 180."""
    d = np.abs(_BIN_INDEX - theta)
    return np.minimum(d, 180.0 - d)


def csl_encode(theta: float, radius: float) -> np.ndarray:
    """Gaussian-window circular smooth label.

    Bin i receives exp(-d_i^2 / (2 radius^2)) for circular distance d_i from
    bin center i to theta, zero beyond 4 radii, then the vector is scaled so
    the nearest bin peaks at exactly 1.0.

    Args:
        theta: ground-truth angle in degrees, [0, 180).
        radius: Gaussian window radius in degrees, > 0.
    """
    theta = _check_theta(theta)
    if not (isinstance(radius, (int, float)) and math.isfinite(radius) and radius > 0):
        raise ValidationError(f"window radius must be > 0, got {radius!r}")
    d = _circular_bin_distance(theta)
    label = np.where(d <= CSL_WINDOW_RADII * radius,
                     np.exp(-(d * d) / (2.0 * radius * radius)), 0.0)
    peak_bin = int(np.argmin(d))
    peak = label[peak_bin]
    if peak > 0.0:
        label = label / peak
    label[peak_bin] = 1.0
    return label


def _arcsl_iou_by_deviation(k: float) -> np.ndarray:
    """Oracle SkewIoU at integer deviations 0..90 for aspect ratio k, cached."""
    key = int(round(k * 1000.0))
    table = _ARCSL_CACHE.get(key)
    if table is None:
        table = np.array([same_center_iou(k, float(d)) for d in range(91)])
        table.setflags(write=False)
        with _ARCSL_LOCK:
            _ARCSL_CACHE.setdefault(key, table)
    return table


def arcsl_encode(theta: float, k: float) -> np.ndarray:
    """Aspect-ratio-adaptive smooth label from normalized SkewIoU values.

    Bin i = (IoU(k, d_i) - m) / (1 - m) where d_i is the circular deviation
    of bin i from the ground-truth bin and m is the minimum IoU over the
    bins' own deviation grid, so the worst bin is exactly 0 and the
    ground-truth bin exactly 1. The IoU comes from the polygon oracle, not
    the printed closed form. theta is snapped to its nearest bin: the label
    lives on the 1-degree class grid.

    The signature is the whole tuning surface: no window radius or other
    constant exists to pick per dataset.
    """
    theta = _check_theta(theta)
    if not (isinstance(k, (int, float)) and math.isfinite(k) and k >= 1.0):
        raise ValidationError(f"aspect ratio must be >= 1, got {k!r}")
    gt_bin = int(round(theta)) % N_BINS
    dev = np.abs(_BIN_INDEX - gt_bin)
    dev = np.minimum(dev, 180.0 - dev).astype(int)
    table = _arcsl_iou_by_deviation(float(k))
    ious = table[dev]
    m = float(table.min())
    return (ious - m) / (1.0 - m)


def decode(label: np.ndarray) -> float:
    """Angle of the largest bin, ties broken toward the smallest index.

    Raises:
        ValidationError: on a wrong-shaped or all-zero vector (no peak).
    """
    arr = np.asarray(label, dtype=float)
    if arr.shape != (N_BINS,):
        raise ValidationError(f"label vector must have shape ({N_BINS},), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError("label vector must be finite")
    if np.all(arr == 0.0):
        raise ValidationError("label vector has no peak (all zeros)")
    return float(np.argmax(arr))


def label_bce(pred: np.ndarray, target: np.ndarray) -> float:
    """Mean per-bin binary cross-entropy of a predicted vector vs a soft label.

    Predictions are clamped to [1e-7, 1 - 1e-7] before the logs. Per-bin
    BCE on the soft label is the convention this encoder family is trained
    with; both the matching cost and the angle loss reuse it.
    """
    p = np.clip(np.asarray(pred, dtype=float), 1e-7, 1.0 - 1e-7)
    t = np.asarray(target, dtype=float)
    if p.shape != (N_BINS,) or t.shape != (N_BINS,):
        raise ValidationError("label vectors must have shape (180,)")
    return float(np.mean(-(t * np.log(p) + (1.0 - t) * np.log1p(-p))))


def tunable_parameters(encoder) -> list[str]:
    """Names of an encoder's parameters beyond the ground-truth inputs."""
    params = list(inspect.signature(encoder).parameters)
    return [name for name in params if name not in ("theta", "k")]
