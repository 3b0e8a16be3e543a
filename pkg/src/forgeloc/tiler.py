"""Tile and sliding-window layouts over arbitrary-resolution rasters."""

from dataclasses import dataclass, field

import numpy as np

from .errors import InputError
from .raster import CropRecord, pad, padded_index
from .validation import check_positive_int


@dataclass(frozen=True)
class TilePlan:
    """Non-overlapping tiles partitioning an ``image_h x image_w`` frame.

    ``tiles`` holds ``(y0, x0, h, w)`` rectangles in row-major order.
    """

    image_h: int
    image_w: int
    max_side: int
    tiles: tuple = field(default=())

    def slices(self, i):
        y0, x0, h, w = self.tiles[i]
        return slice(y0, y0 + h), slice(x0, x0 + w)

    def dumps(self):
        return "".join(f"{y0} {x0} {h} {w}\n" for y0, x0, h, w in self.tiles)

    def __len__(self):
        return len(self.tiles)


@dataclass(frozen=True)
class WindowPlan:
    """Overlapping ``patch x patch`` windows on a reflect-padded frame.

    ``windows`` holds top-left ``(y, x)`` offsets in padded coordinates,
    row-major; ``pad`` records how the frame was padded.
    """

    image_h: int
    image_w: int
    patch: int
    stride: int
    pad: CropRecord
    windows: tuple = field(default=())

    @property
    def rows(self):
        return sorted({y for y, _ in self.windows})

    @property
    def cols(self):
        return sorted({x for _, x in self.windows})

    def source_index(self):
        """Per-axis index maps from padded coordinates into the image."""
        p = self.pad
        rows = padded_index(p.original_h, p.pad_top, p.pad_bottom, p.pad_mode)
        cols = padded_index(p.original_w, p.pad_left, p.pad_right, p.pad_mode)
        return rows, cols

    def dumps(self):
        return "".join(f"{y} {x} {self.patch} {self.patch}\n" for y, x in self.windows)

    def __len__(self):
        return len(self.windows)


def plan_tiles(h, w, max_side=1024):
    h = check_positive_int(h, "h")
    w = check_positive_int(w, "w")
    max_side = check_positive_int(max_side, "max_side")
    tiles = tuple(
        (y0, x0, min(max_side, h - y0), min(max_side, w - x0))
        for y0 in range(0, h, max_side)
        for x0 in range(0, w, max_side)
    )
    return TilePlan(h, w, max_side, tiles)


def _axis_layout(n, patch, stride):
    if n < patch:
        padded = patch
    else:
        padded = n + (-(n - patch)) % stride
    before = (padded - n) // 2
    return before, padded - n - before, list(range(0, padded - patch + 1, stride))


def plan_windows(h, w, patch=336, stride=112):
    """Lay windows on the stride grid of a padded frame.

    The frame grows (reflect padding, split evenly with the remainder at the
    bottom/right) until it holds at least one window and the grid ends exactly
    on the padded border. Reflect padding needs pad < dimension; when the
    image is too small for that the plan falls back to edge replication.
    """
    h = check_positive_int(h, "h")
    w = check_positive_int(w, "w")
    patch = check_positive_int(patch, "patch")
    stride = check_positive_int(stride, "stride")
    if stride > patch:
        raise InputError(f"stride {stride} exceeds patch {patch}")
    top, bottom, ys = _axis_layout(h, patch, stride)
    left, right, xs = _axis_layout(w, patch, stride)
    mode = "reflect"
    if max(top, bottom) >= h or max(left, right) >= w:
        mode = "edge"
    record = CropRecord(h, w, top, bottom, left, right, mode)
    windows = tuple((y, x) for y in ys for x in xs)
    return WindowPlan(h, w, patch, stride, record, windows)


def extract_tiles(plan, raster):
    return [np.asarray(raster)[plan.slices(i)] for i in range(len(plan))]


def stitch(plan, tile_maps, out=None, dtype=np.float32):
    """Write per-tile maps back into a full-resolution raster (no blending)."""
    if len(tile_maps) != len(plan):
        raise InputError(f"plan has {len(plan)} tiles, got {len(tile_maps)} maps")
    if out is None:
        out = np.empty((plan.image_h, plan.image_w), dtype=dtype)
    for i, tile in enumerate(tile_maps):
        write_tile(plan, i, tile, out)
    return out


def write_tile(plan, i, tile, out):
    _, _, h, w = plan.tiles[i]
    tile = np.asarray(tile)
    if tile.shape[:2] != (h, w):
        raise InputError(f"tile {i} map is {tile.shape[:2]}, plan expects {(h, w)}")
    out[plan.slices(i)] = tile


def pad_to_multiple(img, m=32):
    """Zero-pad bottom/right to the next multiple of ``m``."""
    m = check_positive_int(m, "m")
    img = np.asarray(img)
    h, w = img.shape[:2]
    record = CropRecord(h, w, 0, (-h) % m, 0, (-w) % m, "zero")
    return pad(img, record), record
