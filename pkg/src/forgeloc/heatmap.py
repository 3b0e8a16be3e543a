"""Sliding-window logit accumulation and logistic finalization.

For windows ``(y, x)`` with logit ``l`` and weight ``w``::

    S(u, v) = sum l * w(u - y, v - x)      W(u, v) = sum w(u - y, v - x)
    H(u, v) = sigmoid(S / max(W, eps))

Accumulation is always applied in plan order with 64-bit sums, so results are
bit-identical no matter how many threads scored the windows.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import InputError, ScorerError
from .freqedge import ONE_BELOW
from .tiler import plan_windows
from .validation import as_float_region, check_image

LOGIT_CLIP = 30.0
DEFAULT_EPSILON = 1e-12
_TINY = np.float32(np.finfo(np.float32).tiny)


@dataclass(frozen=True)
class Window2D:
    size: int
    weights: np.ndarray


def hann_window(p, endpoints=True):
    """Separable 2-D Hann window scaled to a peak of exactly 1.

    ``endpoints=True`` samples ``0.5 (1 - cos(2 pi n / (p - 1)))`` with zeros
    on the border. ``endpoints=False`` drops those zeros (the interior of a
    length ``p + 2`` Hann window), so every pixel of the support carries
    positive weight.
    """
    if int(p) != p or p < 2:
        raise InputError(f"window size must be an integer >= 2, got {p!r}")
    p = int(p)
    if endpoints and p < 3:
        raise InputError("a Hann window with zero endpoints needs size >= 3")
    if endpoints:
        n = np.arange(p)
        w1 = 0.5 * (1.0 - np.cos(2.0 * np.pi * n / (p - 1)))
    else:
        n = np.arange(1, p + 1)
        w1 = 0.5 * (1.0 - np.cos(2.0 * np.pi * n / (p + 1)))
    w2 = np.outer(w1, w1)
    w2 /= w2.max()
    w2.setflags(write=False)
    return Window2D(p, w2)


class Accumulator:
    """Full-frame logit-weight (``S``) and weight (``W``) sums."""

    def __init__(self, h, w):
        self.S = np.zeros((h, w), dtype=np.float64)
        self.W = np.zeros((h, w), dtype=np.float64)

    @property
    def shape(self):
        return self.S.shape

    def add(self, origin, logit, window):
        accumulate(self, origin, logit, window)
        return self


def _clip_logit(logit, index=None):
    logit = float(logit)
    if not np.isfinite(logit):
        raise ScorerError(f"non-finite logit {logit} for window {index}", index)
    return min(max(logit, -LOGIT_CLIP), LOGIT_CLIP)


def accumulate(acc, origin, logit, window):
    """Add one window's weighted logit into ``acc`` (in place)."""
    y, x = origin
    p = window.size
    h, w = acc.shape
    if y < 0 or x < 0 or y + p > h or x + p > w:
        raise InputError(f"window at {origin} of size {p} exceeds accumulator {acc.shape}")
    logit = _clip_logit(logit, origin)
    acc.S[y : y + p, x : x + p] += logit * window.weights
    acc.W[y : y + p, x : x + p] += window.weights
    return acc


def _logistic(S, W, epsilon):
    h = expit(S / np.maximum(W, epsilon)).astype(np.float32)
    return np.clip(h, _TINY, ONE_BELOW)


def finalize(acc, epsilon=DEFAULT_EPSILON, crop=None):
    """``sigmoid(S / max(W, eps))`` cropped back to the original frame."""
    S, W = acc.S, acc.W
    if crop is not None:
        if S.shape != (crop.padded_h, crop.padded_w):
            raise InputError(f"accumulator {S.shape} does not match crop record")
        rows, cols = crop.inner
        S, W = S[rows, cols], W[rows, cols]
    return _logistic(S, W, epsilon)


class _BandAccumulator:
    """Rolling ``patch``-row band of a full accumulator.

    Rows above the current window row are final once the plan moves past
    them; they are finalized into the output and dropped. Every pixel sees
    its additions in the same order as with a full-frame accumulator.
    """

    def __init__(self, plan, epsilon, out):
        self.plan = plan
        self.crop = plan.pad
        self.epsilon = epsilon
        self.out = out
        self.top = 0
        self.S = np.zeros((plan.patch, self.crop.padded_w), dtype=np.float64)
        self.W = np.zeros_like(self.S)

    def add(self, origin, logit, window):
        y, x = origin
        if y > self.top:
            self._advance(y)
        p = window.size
        r = y - self.top
        self.S[r : r + p, x : x + p] += logit * window.weights
        self.W[r : r + p, x : x + p] += window.weights

    def _advance(self, new_top):
        d = min(new_top - self.top, self.S.shape[0])
        self._emit(self.top, self.top + d)
        self.S[:-d] = self.S[d:].copy()
        self.W[:-d] = self.W[d:].copy()
        self.S[-d:] = 0.0
        self.W[-d:] = 0.0
        self.top = new_top

    def close(self):
        self._emit(self.top, min(self.top + self.S.shape[0], self.crop.padded_h))

    def _emit(self, r0, r1):
        c = self.crop
        a, b = max(r0, c.pad_top), min(r1, c.pad_top + c.original_h)
        if a >= b:
            return
        cols = slice(c.pad_left, c.pad_left + c.original_w)
        S = self.S[a - self.top : b - self.top, cols]
        W = self.W[a - self.top : b - self.top, cols]
        self.out[a - c.pad_top : b - c.pad_top] = _logistic(S, W, self.epsilon)


def window_regions(plan, image):
    """Yield ``(index, (rows, cols))`` source index arrays for each window."""
    rows_map, cols_map = plan.source_index()
    p = plan.patch
    for i, (y, x) in enumerate(plan.windows):
        yield i, (rows_map[y : y + p], cols_map[x : x + p])


def sh_heatmap(
    img,
    scorer,
    patch=336,
    stride=112,
    *,
    epsilon=DEFAULT_EPSILON,
    window=None,
    n_jobs=1,
    batch_size=64,
):
    """Dense heatmap from a tile-level scorer applied on sliding windows.

    ``scorer`` must provide ``score_tiles(tiles, regions, executor)``
    returning one logit per window; ``tiles`` entries are ``None`` when the
    scorer sets ``requires_pixels = False``.
    """
    img = check_image(img)
    h, w = img.shape[:2]
    plan = plan_windows(h, w, patch, stride)
    window = window or hann_window(patch, endpoints=False)
    if window.size != patch:
        raise InputError("window size must equal patch size")
    out = np.empty((h, w), dtype=np.float32)
    band = _BandAccumulator(plan, epsilon, out)
    needs_pixels = getattr(scorer, "requires_pixels", True)
    regions = list(window_regions(plan, img))
    executor = ThreadPoolExecutor(n_jobs) if n_jobs > 1 else None
    try:
        for start in range(0, len(regions), batch_size):
            batch = regions[start : start + batch_size]
            idx = [r for _, r in batch]
            tiles = [as_float_region(img, *r) if needs_pixels else None for r in idx]
            try:
                logits = scorer.score_tiles(tiles, idx, executor)
            except ScorerError as exc:
                raise ScorerError(
                    f"window {start + (exc.index or 0)}: {exc}", start + (exc.index or 0)
                ) from exc
            if len(logits) != len(batch):
                raise ScorerError(f"scorer returned {len(logits)} logits for {len(batch)} windows")
            for (i, _), logit in zip(batch, logits):
                band.add(plan.windows[i], _clip_logit(logit, i), window)
    finally:
        if executor is not None:
            executor.shutdown()
    band.close()
    return out


def full_heatmap_accumulator(plan, logits, window):
    """Reference path: accumulate a whole plan into a full-frame accumulator."""
    c = plan.pad
    acc = Accumulator(c.padded_h, c.padded_w)
    for origin, logit in zip(plan.windows, logits):
        accumulate(acc, origin, logit, window)
    return acc
