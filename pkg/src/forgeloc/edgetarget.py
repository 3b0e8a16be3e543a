"""Soft multi-scale edge targets from binary manipulation masks.

    Y = sum_s Gauss_{lambda s}(Dilate(M; s) - Erode(M; s)) / (max(sum) + eps)
"""

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import InputError
from .freqedge import gaussian_blur
from .validation import check_mask


@dataclass(frozen=True)
class EdgeTargetConfig:
    radii: tuple = (3, 7, 15)
    lam: float = 0.5
    epsilon: float = 1e-6

    def validate(self):
        radii = tuple(self.radii)
        if not radii or any(int(r) != r or r < 1 for r in radii):
            raise InputError("radii must be positive integers")
        if len(set(radii)) != len(radii):
            raise InputError("radii must be distinct")
        if self.lam <= 0 or self.epsilon <= 0:
            raise InputError("lam and epsilon must be > 0")
        return self


def disk(radius):
    """Disk structuring element: offset (dy, dx) is in iff dy^2 + dx^2 <= r^2."""
    r = int(radius)
    if r < 1:
        raise InputError("radius must be >= 1")
    yy, xx = np.mgrid[-r : r + 1, -r : r + 1]
    return yy * yy + xx * xx <= r * r


def dilate(mask, radius):
    """Disk dilation; pixels outside the frame count as background."""
    mask = check_mask(mask)
    return ndimage.binary_dilation(mask, structure=disk(radius), border_value=0)


def erode(mask, radius):
    """Disk erosion; pixels outside the frame count as background, so
    foreground touching the frame edge erodes from it too."""
    mask = check_mask(mask)
    return ndimage.binary_erosion(mask, structure=disk(radius), border_value=0)


def morphological_gradient(mask, radius):
    return dilate(mask, radius) & ~erode(mask, radius)


def soft_edge_target(mask, cfg=None):
    """Soft edge target in ``[0, 1)`` as float32; all zeros for empty bands."""
    cfg = (cfg or EdgeTargetConfig()).validate()
    mask = check_mask(mask)
    total = np.zeros(mask.shape, dtype=np.float64)
    for s in cfg.radii:
        band = morphological_gradient(mask, s).astype(np.float64)
        total += gaussian_blur(band, cfg.lam * s, dtype=np.float64)
    return (total / (total.max() + cfg.epsilon)).astype(np.float32)
