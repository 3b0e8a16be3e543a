"""scikit-learn compatible wrappers.

Samples are whole images, so ``X`` is a sequence of ``(H, W, 3)`` arrays
(or a single array) and ``y`` a matching sequence of binary masks. The
estimators support ``get_params``/``set_params``/``clone`` and slot into
model-selection utilities that do not assume tabular input.
"""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .edgetarget import EdgeTargetConfig, soft_edge_target
from .errors import InputError
from .freqedge import edge_energy_score, feature_stack
from .fuseval import THRESHOLDS, IouCurve, iou, sample_curve
from .heatmap import DEFAULT_EPSILON, sh_heatmap
from .pipeline import PipelineConfig, localize
from .scorer import parse_scorer
from .validation import check_image, check_mask


def _as_list(X, sample_ndim=3):
    if isinstance(X, np.ndarray) and X.ndim == sample_ndim:
        return [X], True
    return list(X), False


def _map(func, X, sample_ndim=3):
    items, single = _as_list(X, sample_ndim)
    out = [func(x) for x in items]
    return out[0] if single else out


class FilterBank(TransformerMixin, BaseEstimator):
    """Stateless transformer: image -> ``(10, H, W)`` residual + gradient
    planes."""

    def __init__(self, sigma=1.5):
        self.sigma = sigma

    def fit(self, X=None, y=None):
        return self

    def transform(self, X):
        return _map(lambda img: feature_stack(img, self.sigma), X)


class EdgeEnergy(TransformerMixin, BaseEstimator):
    """Stateless transformer: image -> edge-energy probability map."""

    def __init__(self, beta=4.0, sigma=1.5):
        self.beta = beta
        self.sigma = sigma

    def fit(self, X=None, y=None):
        return self

    def transform(self, X):
        return _map(lambda img: edge_energy_score(img, self.beta, self.sigma), X)


class SoftEdgeTargets(TransformerMixin, BaseEstimator):
    """Stateless transformer: binary mask -> soft multi-scale edge target."""

    def __init__(self, radii=(3, 7, 15), lam=0.5, epsilon=1e-6):
        self.radii = radii
        self.lam = lam
        self.epsilon = epsilon

    def fit(self, X=None, y=None):
        return self

    def transform(self, X):
        cfg = EdgeTargetConfig(tuple(self.radii), self.lam, self.epsilon)
        return _map(lambda m: soft_edge_target(m, cfg), X, sample_ndim=2)


class SlidingHeatmap(BaseEstimator):
    """Dense heatmap from a tile scorer (spec string or scorer object)."""

    def __init__(self, scorer="constant:0", patch=336, stride=112,
                 epsilon=DEFAULT_EPSILON, n_jobs=1, batch_size=64):
        self.scorer = scorer
        self.patch = patch
        self.stride = stride
        self.epsilon = epsilon
        self.n_jobs = n_jobs
        self.batch_size = batch_size

    def fit(self, X=None, y=None):
        self.scorer_ = parse_scorer(self.scorer, "tile").validate()
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "scorer_")
        return _map(
            lambda img: sh_heatmap(
                img, self.scorer_, self.patch, self.stride,
                epsilon=self.epsilon, n_jobs=self.n_jobs, batch_size=self.batch_size,
            ),
            X,
        )


class ForgeryLocalizer(BaseEstimator):
    """Two-branch localizer with a validation-chosen global threshold.

    ``fit`` runs the pipeline on (image, mask) pairs and keeps the threshold
    maximizing mean IoU over the 0.00..1.00 grid; without ``fit`` the
    configured ``tau`` is used. ``predict_proba`` returns fused maps and
    ``predict`` binary masks.
    """

    def __init__(self, egs_scorer="edge-energy", sh_scorer="constant:-8",
                 prior_scorer="edge-energy", max_tile_side=1024, patch=336,
                 stride=112, pad_multiple=32, tau=0.5, egs_aug=None, n_jobs=1,
                 tile_batch=8, window_batch=64, seed=0):
        self.egs_scorer = egs_scorer
        self.sh_scorer = sh_scorer
        self.prior_scorer = prior_scorer
        self.max_tile_side = max_tile_side
        self.patch = patch
        self.stride = stride
        self.pad_multiple = pad_multiple
        self.tau = tau
        self.egs_aug = egs_aug
        self.n_jobs = n_jobs
        self.tile_batch = tile_batch
        self.window_batch = window_batch
        self.seed = seed

    def _config(self, tau=None):
        return PipelineConfig(
            max_tile_side=self.max_tile_side, patch=self.patch, stride=self.stride,
            pad_multiple=self.pad_multiple, tau=self.tau if tau is None else tau,
            egs_scorer=self.egs_scorer, sh_scorer=self.sh_scorer,
            prior_scorer=self.prior_scorer, egs_aug=self.egs_aug, threads=self.n_jobs,
            tile_batch=self.tile_batch, window_batch=self.window_batch, seed=self.seed,
        ).validate()

    def localize(self, img, gt=None):
        """All branch outputs for one image (see :func:`forgeloc.localize`)."""
        return localize(img, self._config(self._threshold()), gt=gt)

    def fit(self, X, y):
        images, _ = _as_list(X)
        masks, _ = _as_list(y, sample_ndim=2)
        if not images:
            raise InputError("fit needs at least one image")
        if len(images) != len(masks):
            raise InputError(f"{len(images)} images but {len(masks)} masks")
        cfg = self._config(tau=0.5)
        total = np.zeros(THRESHOLDS.size)
        curves = []
        for img, gt in zip(images, masks):
            gt = check_mask(gt)
            fused = localize(check_image(img), cfg, gt=gt, keep_branches=False).fused
            curves.append(sample_curve(fused, gt))
            total += curves[-1]
        self.curve_ = IouCurve.from_ious(THRESHOLDS, total / len(curves), np.stack(curves))
        self.tau_ = self.curve_.best_tau
        return self

    def _threshold(self):
        if hasattr(self, "tau_"):
            return self.tau_
        return 0.5 if self.tau == "sweep" else float(self.tau)

    def _run(self, X, gt, field):
        images, single = _as_list(X)
        if gt is None:
            gts = [None] * len(images)
        else:
            gts, _ = _as_list(gt, sample_ndim=2)
            if len(gts) != len(images):
                raise InputError(f"{len(images)} images but {len(gts)} masks")
        cfg = self._config(self._threshold())
        out = [
            getattr(localize(img, cfg, gt=m, keep_branches=False), field)
            for img, m in zip(images, gts)
        ]
        return out[0] if single else out

    def predict_proba(self, X, gt=None):
        """Fused maps; ``gt`` (one mask per image) feeds bare ``"oracle"``
        scorers only."""
        return self._run(X, gt, "fused")

    def predict(self, X, gt=None):
        return self._run(X, gt, "mask")

    def score(self, X, y):
        """Mean IoU at the current threshold."""
        masks, _ = _as_list(y, sample_ndim=2)
        preds, _ = _as_list(self.predict(X, gt=y), sample_ndim=2)
        return float(np.mean([iou(p, check_mask(m)) for p, m in zip(preds, masks)]))
