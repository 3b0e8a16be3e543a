"""Input validation helpers in the spirit of ``sklearn.utils.validation``.

Images are ``(H, W, 3)`` arrays. Floating images must lie in ``[0, 1]``;
``uint8`` images are accepted as-is and scaled by 1/255 lazily wherever a
float view of a region is required, which keeps gigapixel inputs at one
byte per sample.
"""

import numpy as np

from .errors import InputError


def check_image(img, *, name="image"):
    img = np.asarray(img)
    if img.ndim == 2:
        img = np.repeat(img[:, :, None], 3, axis=2)
    if img.ndim != 3 or img.shape[2] != 3:
        raise InputError(f"{name} must have shape (H, W, 3), got {img.shape}")
    if img.shape[0] < 1 or img.shape[1] < 1:
        raise InputError(f"{name} has a zero dimension: {img.shape}")
    if img.dtype == np.uint8:
        return img
    if not np.issubdtype(img.dtype, np.floating):
        raise InputError(f"{name} must be uint8 or floating point, got {img.dtype}")
    _check_unit_range(img, name)
    return img


def check_gray(img, *, name="luminance"):
    img = np.asarray(img)
    if img.ndim != 2 or img.shape[0] < 1 or img.shape[1] < 1:
        raise InputError(f"{name} must be a non-empty 2-D array, got {img.shape}")
    if not np.all(np.isfinite(img)):
        raise InputError(f"{name} contains non-finite values")
    return img


def check_mask(mask, *, name="mask"):
    mask = np.asarray(mask)
    if mask.ndim != 2:
        raise InputError(f"{name} must be 2-D, got shape {mask.shape}")
    if mask.dtype == bool:
        return mask
    if not np.all((mask == 0) | (mask == 1)):
        raise InputError(f"{name} must be strictly binary")
    return mask.astype(bool)


def check_prob_map(p, *, name="probability map"):
    p = np.asarray(p)
    if p.ndim != 2:
        raise InputError(f"{name} must be 2-D, got shape {p.shape}")
    if not np.issubdtype(p.dtype, np.floating):
        p = p.astype(np.float32)
    _check_unit_range(p, name)
    return p


def check_same_shape(a, b, names=("a", "b")):
    if a.shape[:2] != b.shape[:2]:
        raise InputError(
            f"{names[0]} and {names[1]} differ in size: {a.shape[:2]} vs {b.shape[:2]}"
        )


def check_positive_int(value, name, minimum=1):
    if int(value) != value or value < minimum:
        raise InputError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return int(value)


def as_float_region(img, rows, cols):
    """Float32 copy of ``img[rows, cols]`` (slices or index arrays)."""
    if isinstance(rows, slice) and isinstance(cols, slice):
        region = img[rows, cols]
    else:
        region = img[np.ix_(np.asarray(rows), np.asarray(cols))]
    if region.dtype == np.uint8:
        return region.astype(np.float32) / np.float32(255.0)
    return np.ascontiguousarray(region, dtype=np.float32)


def _check_unit_range(arr, name):
    # min/max avoid full-size temporaries on very large rasters
    lo, hi = float(np.min(arr)), float(np.max(arr))
    if not (np.isfinite(lo) and np.isfinite(hi)):
        raise InputError(f"{name} contains non-finite values")
    if lo < 0.0 or hi > 1.0:
        raise InputError(f"{name} values must lie in [0, 1], got [{lo}, {hi}]")
