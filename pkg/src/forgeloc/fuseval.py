"""Branch fusion, thresholding and IoU evaluation."""

from dataclasses import dataclass, field

import numpy as np

from .errors import InputError
from .validation import check_mask, check_same_shape

THRESHOLDS = np.arange(101) / 100.0
_CHUNK = 1 << 22


def fuse_max(a, b, out=None):
    """Pixel-wise maximum of two probability maps (logical OR when binary)."""
    a, b = np.asarray(a), np.asarray(b)
    check_same_shape(a, b)
    return np.maximum(a, b, out=out)


def binarize(p, tau):
    """``p >= tau`` (inclusive); the comparison is carried out in float64."""
    if not 0.0 <= tau <= 1.0:
        raise InputError(f"tau must lie in [0, 1], got {tau}")
    return np.asarray(p) >= np.float64(tau)


def iou(pred, gt):
    """``TP / (TP + FP + FN)``; defined as 1.0 when both masks are empty."""
    pred, gt = check_mask(pred, name="pred"), check_mask(gt, name="gt")
    check_same_shape(pred, gt, ("pred", "gt"))
    tp = np.count_nonzero(pred & gt)
    union = np.count_nonzero(pred | gt)
    return 1.0 if union == 0 else tp / union


@dataclass
class IouCurve:
    thresholds: np.ndarray
    ious: np.ndarray
    best_tau: float
    best_iou: float
    per_sample: np.ndarray = field(default=None, repr=False)

    @classmethod
    def from_ious(cls, thresholds, ious, per_sample=None):
        ious = np.asarray(ious, dtype=np.float64)
        k = int(np.argmax(ious))  # first maximum, i.e. smallest tau
        return cls(np.asarray(thresholds), ious, float(thresholds[k]), float(ious[k]), per_sample)

    def to_csv(self):
        rows = ["tau,mean_iou\n"]
        rows += [f"{t:.2f},{v:.10f}\n" for t, v in zip(self.thresholds, self.ious)]
        rows.append(f"best_tau,best_iou\n{self.best_tau:.2f},{self.best_iou:.10f}\n")
        return "".join(rows)


def sample_curve(pred, gt, thresholds=THRESHOLDS):
    """IoU of ``pred >= t`` against ``gt`` for every threshold ``t``.

    Each pixel is binned by how many thresholds it clears, so all thresholds
    cost one pass over the map.
    """
    pred = np.asarray(pred)
    gt = check_mask(gt, name="gt")
    check_same_shape(pred, gt, ("pred", "gt"))
    thresholds = np.asarray(thresholds, dtype=np.float64)
    n = thresholds.size
    pos = np.zeros(n + 1, dtype=np.int64)
    neg = np.zeros(n + 1, dtype=np.int64)
    flat_p, flat_g = pred.reshape(-1), gt.reshape(-1)
    for start in range(0, flat_p.size, _CHUNK):
        p = flat_p[start : start + _CHUNK].astype(np.float64)
        g = flat_g[start : start + _CHUNK]
        cleared = np.searchsorted(thresholds, p, side="right")
        pos += np.bincount(cleared[g], minlength=n + 1)
        neg += np.bincount(cleared[~g], minlength=n + 1)
    # pixels positive at threshold k are those clearing more than k thresholds
    tp = np.cumsum(pos[::-1])[::-1][1:]
    fp = np.cumsum(neg[::-1])[::-1][1:]
    fn = pos.sum() - tp
    union = tp + fp + fn
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(union == 0, 1.0, tp / np.maximum(union, 1))
    return out


def sweep(preds, gts, thresholds=THRESHOLDS):
    """Mean IoU over samples at each threshold; best tau is the smallest
    threshold attaining the maximum."""
    preds, gts = list(preds), list(gts)
    if not preds:
        raise InputError("sweep needs at least one sample")
    if len(preds) != len(gts):
        raise InputError(f"{len(preds)} predictions but {len(gts)} masks")
    curves = np.stack([sample_curve(p, g, thresholds) for p, g in zip(preds, gts)])
    total = np.zeros(curves.shape[1])
    for c in curves:  # fixed-order reduction
        total += c
    return IouCurve.from_ious(np.asarray(thresholds), total / len(curves), curves)
