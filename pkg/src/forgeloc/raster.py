"""Raster I/O, colour conversion and pad/crop primitives.

Layout conventions used throughout the package:

* RGB images are ``(H, W, 3)`` float32 in ``[0, 1]`` (or uint8, see
  :mod:`forgeloc.validation`).
* Gray images, probability maps and logit maps are ``(H, W)``.
* Binary masks are ``(H, W)`` bool.
"""

import os
import struct
from dataclasses import dataclass

import cv2
import numpy as np

from .errors import InputError
from .validation import check_image, check_prob_map

PAD_MODES = ("zero", "reflect", "edge")
LUMA_WEIGHTS = (0.299, 0.587, 0.114)
RAW_MAGIC = b"EDGR"
_SUPPORTED_EXT = {".png", ".jpg", ".jpeg"}


@dataclass(frozen=True)
class CropRecord:
    """How a raster was padded, so the padding can be removed exactly."""

    original_h: int
    original_w: int
    pad_top: int = 0
    pad_bottom: int = 0
    pad_left: int = 0
    pad_right: int = 0
    pad_mode: str = "zero"

    def __post_init__(self):
        if self.pad_mode not in PAD_MODES:
            raise InputError(f"unknown pad mode {self.pad_mode!r}")
        if min(self.pad_top, self.pad_bottom, self.pad_left, self.pad_right) < 0:
            raise InputError("pads must be non-negative")
        if self.original_h < 1 or self.original_w < 1:
            raise InputError("original dimensions must be >= 1")

    @property
    def padded_h(self):
        return self.original_h + self.pad_top + self.pad_bottom

    @property
    def padded_w(self):
        return self.original_w + self.pad_left + self.pad_right

    @property
    def inner(self):
        """Slices selecting the original region inside the padded raster."""
        return (
            slice(self.pad_top, self.pad_top + self.original_h),
            slice(self.pad_left, self.pad_left + self.original_w),
        )


def _read(path, flags):
    ext = os.path.splitext(str(path))[1].lower()
    if ext not in _SUPPORTED_EXT:
        raise InputError(f"unsupported raster format {ext!r}: {path}")
    if not os.path.isfile(path):
        raise InputError(f"no such file: {path}")
    data = cv2.imread(str(path), flags)
    if data is None:
        raise InputError(f"unreadable image: {path}")
    if data.size == 0:
        raise InputError(f"zero-dimension image: {path}")
    return data


def _to_rgb(data):
    if data.ndim == 2:
        return np.repeat(data[:, :, None], 3, axis=2)
    if data.shape[2] == 1:
        return np.repeat(data, 3, axis=2)
    if data.shape[2] == 4:
        return cv2.cvtColor(data, cv2.COLOR_BGRA2RGB)
    return cv2.cvtColor(data, cv2.COLOR_BGR2RGB)


def load_image(path, *, as_uint8=False):
    """Load a PNG/JPEG as RGB float32 in [0, 1] (v / 255).

    Grayscale sources are replicated to three channels; alpha is dropped.
    ``as_uint8=True`` returns the raw 8-bit samples instead, which the rest
    of the pipeline accepts and converts region by region.
    """
    data = _read(path, cv2.IMREAD_UNCHANGED)
    if data.dtype != np.uint8:
        raise InputError(f"only 8-bit images are supported: {path} is {data.dtype}")
    rgb = _to_rgb(data)
    if as_uint8:
        return rgb
    return rgb.astype(np.float32) / np.float32(255.0)


def load_mask(path, threshold=127):
    """Load a mask; a pixel is foreground iff its 8-bit luminance > threshold."""
    data = _read(path, cv2.IMREAD_UNCHANGED)
    if data.dtype != np.uint8:
        raise InputError(f"only 8-bit masks are supported: {path} is {data.dtype}")
    if data.ndim == 2 or data.shape[2] == 1:
        luma = data.reshape(data.shape[:2]).astype(np.float64)
    else:
        luma = to_luminance(_to_rgb(data).astype(np.float64))
    return luma > threshold


def to_luminance(img):
    """BT.601 luma ``0.299 R + 0.587 G + 0.114 B``; float32 unless given float64."""
    img = np.asarray(img)
    if img.dtype == np.uint8:
        img = img.astype(np.float32) / np.float32(255.0)
    r, g, b = LUMA_WEIGHTS
    out = img[..., 0] * r + img[..., 1] * g + img[..., 2] * b
    if img.dtype == np.float64:
        return out
    # weights sum to exactly 1 in real arithmetic; keep float rounding inside [0, 1]
    return np.clip(out, 0.0, 1.0).astype(np.float32, copy=False)


def _pad_widths(img, record):
    widths = [(record.pad_top, record.pad_bottom), (record.pad_left, record.pad_right)]
    widths += [(0, 0)] * (img.ndim - 2)
    return widths


def pad(img, record):
    """Pad ``img`` according to ``record``.

    ``reflect`` mirrors without repeating the edge sample and requires every
    pad to be smaller than the corresponding dimension.
    """
    img = np.asarray(img)
    if img.shape[:2] != (record.original_h, record.original_w):
        raise InputError(
            f"image is {img.shape[:2]}, record expects "
            f"{(record.original_h, record.original_w)}"
        )
    widths = _pad_widths(img, record)
    if record.pad_mode == "reflect":
        if max(record.pad_top, record.pad_bottom) >= record.original_h or max(
            record.pad_left, record.pad_right
        ) >= record.original_w:
            raise InputError("reflect padding requires pad < dimension")
        return np.pad(img, widths, mode="reflect")
    if record.pad_mode == "edge":
        return np.pad(img, widths, mode="edge")
    return np.pad(img, widths, mode="constant")


def crop_back(img, record):
    img = np.asarray(img)
    if img.shape[:2] != (record.padded_h, record.padded_w):
        raise InputError(
            f"raster is {img.shape[:2]}, record expects "
            f"{(record.padded_h, record.padded_w)}"
        )
    rows, cols = record.inner
    return img[rows, cols]


def padded_index(n, before, after, mode):
    """Source index for every position of an axis of length ``n`` padded by
    ``before``/``after``; -1 marks zero-fill positions."""
    idx = np.arange(-before, n + after)
    if mode == "reflect":
        if before >= n or after >= n:
            raise InputError("reflect padding requires pad < dimension")
        idx = np.abs(idx)
        idx = np.where(idx > n - 1, 2 * (n - 1) - idx, idx)
    elif mode == "edge":
        idx = np.clip(idx, 0, n - 1)
    else:
        idx = np.where((idx < 0) | (idx >= n), -1, idx)
    return idx


# -- file formats ---------------------------------------------------------


def save_mask(path, mask):
    """8-bit single-channel PNG with values {0, 255}."""
    mask = np.asarray(mask).astype(bool)
    if not cv2.imwrite(str(path), mask.astype(np.uint8) * 255):
        raise InputError(f"could not write {path}")


def encode_prob16(p):
    p = check_prob_map(p)
    return np.round(p.astype(np.float64) * 65535.0).astype(np.uint16)


def save_prob_map(path, p):
    """16-bit single-channel PNG with value ``round(p * 65535)``; ``.raw``
    paths get the little-endian float32 dump instead."""
    if str(path).lower().endswith(".raw"):
        write_raw(path, p)
        return
    if not cv2.imwrite(str(path), encode_prob16(p)):
        raise InputError(f"could not write {path}")


def load_prob_map(path):
    """Read a probability map written by :func:`save_prob_map` (16-bit or
    8-bit PNG, or raw dump)."""
    if str(path).lower().endswith(".raw"):
        return read_raw(path)
    if not os.path.isfile(path):
        raise InputError(f"no such file: {path}")
    data = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if data is None:
        raise InputError(f"unreadable probability map: {path}")
    if data.ndim != 2:
        raise InputError(f"probability map must be single-channel: {path}")
    if data.dtype == np.uint16:
        return (data.astype(np.float64) / 65535.0).astype(np.float32)
    if data.dtype == np.uint8:
        return (data.astype(np.float64) / 255.0).astype(np.float32)
    raise InputError(f"unsupported probability map depth {data.dtype}: {path}")


def write_raw(path, p):
    p = np.ascontiguousarray(p, dtype="<f4")
    if p.ndim != 2:
        raise InputError("raw dumps hold a single plane")
    h, w = p.shape
    with open(path, "wb") as fh:
        fh.write(RAW_MAGIC + struct.pack("<II", w, h))
        fh.write(p.tobytes())


def read_raw(path):
    with open(path, "rb") as fh:
        header = fh.read(12)
        if len(header) != 12 or header[:4] != RAW_MAGIC:
            raise InputError(f"not a raw probability dump: {path}")
        w, h = struct.unpack("<II", header[4:])
        data = np.frombuffer(fh.read(), dtype="<f4")
    if data.size != w * h:
        raise InputError(f"truncated raw dump: {path}")
    return data.reshape(h, w).astype(np.float32)
