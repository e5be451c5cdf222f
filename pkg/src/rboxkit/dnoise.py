"""Bounded noise generation for denoising-style training queries.

Angle noise draws a deviation uniformly inside (-scale*180, +scale*180)
and wraps the result back into the 180-degree angle range; box noise is
the usual center/size jitter, applied in the box's own rotated frame so a
center scale of 1.0 can never push the center outside the original box.

Determinism matters here: the generator algorithm is pinned to numpy's
PCG64 so a seed reproduces the same noise bit-for-bit across platforms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .rbox import ANGLE_PERIOD, RBox, canonical_rbox

# Noised sizes are floored at this factor of the original so size scales
# >= 1 cannot produce non-positive boxes.
_MIN_SIZE_FACTOR = 1e-6


@dataclass(frozen=True)
class NoiseConfig:
    """Noise magnitudes and the seed that makes a run reproducible.

    angle_scale is the fraction of the 180-degree period the angle may
    move, in (0, 1]; the box scales bound the relative center shift and
    size change.
    """

    angle_scale: float = 0.1
    box_center_scale: float = 0.0
    box_size_scale: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if not (math.isfinite(self.angle_scale) and 0.0 < self.angle_scale <= 1.0):
            raise ValidationError(f"angle_scale must lie in (0, 1], got {self.angle_scale}")
        for name in ("box_center_scale", "box_size_scale"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0.0):
                raise ValidationError(f"{name} must be finite and >= 0, got {value}")
        if not isinstance(self.seed, int):
            raise ValidationError(f"seed must be an integer, got {self.seed!r}")


def make_rng(seed: int) -> np.random.Generator:
    """PCG64 generator for the given seed (the pinned portable algorithm)."""
    return np.random.Generator(np.random.PCG64(seed))


def wrap_angle(theta: float) -> float:
    """Fold any angle into [0, 180); idempotent on values already there."""
    return float(theta % ANGLE_PERIOD)


def angle_noise(theta: float, cfg: NoiseConfig, rng: np.random.Generator, *,
                delta: float | None = None) -> float:
    """Noised angle: wrap_angle(theta + delta) with |delta| < angle_scale * 180.

    The deviation is uniform on the open interval (u == 0 draws are
    redrawn, so the bound is strict). Pass `delta` to force a specific
    deviation, e.g. to exercise the wrap.

    Args:
        theta: angle in degrees, [0, 180).
        cfg: noise configuration (only angle_scale is used).
        rng: generator owning this worker's stream.
        delta: optional forced deviation in degrees.
    """
    if not 0.0 <= theta < ANGLE_PERIOD:
        raise ValidationError(f"angle must lie in [0, 180), got {theta}")
    if delta is None:
        u = rng.random()
        while u == 0.0:
            u = rng.random()
        delta = cfg.angle_scale * ANGLE_PERIOD * (2.0 * u - 1.0)
    return wrap_angle(theta + delta)


def box_noise(box: RBox, cfg: NoiseConfig, rng: np.random.Generator) -> RBox:
    """Jittered copy of a box: center shifted and sides rescaled.

    The center moves by uniform(+-box_center_scale * side/2) along each of
    the box's own axes; each side is scaled by uniform(1 +- box_size_scale).
    The result is re-normalized to the long-edge convention, so a strong
    size jitter may swap which side is the long one. Exactly four draws are
    consumed regardless of the scales, keeping streams aligned.
    """
    u = rng.uniform(-1.0, 1.0, size=4)
    dx_local = u[0] * cfg.box_center_scale * box.w / 2.0
    dy_local = u[1] * cfg.box_center_scale * box.h / 2.0
    t = math.radians(box.theta)
    c, s = math.cos(t), math.sin(t)
    cx = box.cx + c * dx_local - s * dy_local
    cy = box.cy + s * dx_local + c * dy_local
    w = box.w * max(1.0 + u[2] * cfg.box_size_scale, _MIN_SIZE_FACTOR)
    h = box.h * max(1.0 + u[3] * cfg.box_size_scale, _MIN_SIZE_FACTOR)
    return canonical_rbox(cx, cy, w, h, box.theta)
