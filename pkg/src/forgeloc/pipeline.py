"""End-to-end localization: tiled pixel branch, sliding-window heatmap
branch, max fusion and thresholding; dataset evaluation over manifests."""

import dataclasses
import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError
from .freqedge import EdgeAugConfig, augment_edge_prior
from .fuseval import THRESHOLDS, IouCurve, binarize, fuse_max, sample_curve
from .heatmap import DEFAULT_EPSILON, sh_heatmap
from .raster import load_image, load_mask
from .scorer import (
    ExternalScorer,
    OraclePixelScorer,
    OracleTileScorer,
    build_tall_canvas,
    crop_logits,
    parse_scorer,
)
from .tiler import pad_to_multiple, plan_tiles, write_tile
from .validation import check_image, check_mask, check_prob_map

logger = logging.getLogger(__name__)

CATEGORIES = ("OR", "SP", "FR")


@dataclass
class PipelineConfig:
    max_tile_side: int = 1024
    patch: int = 336
    stride: int = 112
    pad_multiple: int = 32
    tau: object = 0.5  # a float, or "sweep" for dataset evaluation
    egs_scorer: object = "edge-energy"
    sh_scorer: object = "constant:-8"
    prior_scorer: object = "edge-energy"
    egs_aug: EdgeAugConfig = None
    heatmap_epsilon: float = DEFAULT_EPSILON
    threads: int = 1
    tile_batch: int = 8
    window_batch: int = 64
    seed: int = 0

    def validate(self):
        for name in ("max_tile_side", "patch", "stride", "pad_multiple", "threads",
                     "tile_batch", "window_batch"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise InputError(f"{name} must be a positive integer, got {value!r}")
        if self.stride > self.patch:
            raise InputError("stride must not exceed patch")
        if self.tau != "sweep" and not 0.0 <= float(self.tau) <= 1.0:
            raise InputError(f"tau must lie in [0, 1] or be 'sweep', got {self.tau!r}")
        return self

    @property
    def threshold(self):
        return 0.5 if self.tau == "sweep" else float(self.tau)


def load_config(path, base=None):
    """Read ``key = value`` lines (``#`` comments) over a base config."""
    cfg = base or PipelineConfig()
    types = {f.name: f.type for f in dataclasses.fields(PipelineConfig)}
    updates = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = (part.strip() for part in line.partition("="))
            key = key.replace("-", "_")
            if not sep or key not in types or key == "egs_aug":
                raise InputError(f"{path}:{lineno}: unknown setting {line!r}")
            updates[key] = _coerce(key, value, types[key])
    return dataclasses.replace(cfg, **updates).validate()


def _coerce(key, value, typ):
    if typ is int or typ == "int":
        return int(value)
    if typ is float or typ == "float":
        return float(value)
    if key == "tau":
        return value if value == "sweep" else float(value)
    return value


@dataclass
class Localization:
    egs: np.ndarray
    sh: np.ndarray
    fused: np.ndarray
    mask: np.ndarray


def _resolve(spec, kind, gt):
    if spec == "oracle":
        if gt is None:
            raise InputError("bare 'oracle' scorer needs a ground-truth mask")
        return OraclePixelScorer(gt) if kind == "pixel" else OracleTileScorer(gt)
    return parse_scorer(spec, kind)


def resolve_scorers(cfg, gt=None):
    return (
        _resolve(cfg.egs_scorer, "pixel", gt),
        _resolve(cfg.sh_scorer, "tile", gt),
        _resolve(cfg.prior_scorer, "pixel", gt),
    )


def _aug_seed(seed, index):
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def egs_map(img, egs, prior, cfg, executor=None):
    """Per-tile pixel scores stitched to full resolution.

    External segmenters receive the tall canvas (image, mean band, prior),
    with width zero-padded to ``pad_multiple``; only the image band of their
    answer is kept.
    """
    h, w = img.shape[:2]
    plan = plan_tiles(h, w, cfg.max_tile_side)
    out = np.empty((h, w), dtype=np.float32)
    external = isinstance(egs, ExternalScorer)
    for start in range(0, len(plan), cfg.tile_batch):
        ids = list(range(start, min(start + cfg.tile_batch, len(plan))))
        views = [img[plan.slices(i)] for i in ids]
        origins = [plan.tiles[i][:2] for i in ids]
        if external:
            priors = prior.score_pixels(views, origins, executor)
            if cfg.egs_aug is not None:
                priors = [
                    augment_edge_prior(e, dataclasses.replace(cfg.egs_aug, rng_seed=_aug_seed(cfg.seed, i)))
                    for e, i in zip(priors, ids)
                ]
            canvases = [
                pad_to_multiple(build_tall_canvas(v, e).canvas, cfg.pad_multiple)[0]
                for v, e in zip(views, priors)
            ]
            maps = [
                crop_logits(m, *v.shape[:2]) for m, v in zip(egs.score_pixels(canvases), views)
            ]
        else:
            maps = egs.score_pixels(views, origins, executor)
        for i, m in zip(ids, maps):
            write_tile(plan, i, check_prob_map(m, name=f"tile {i} score"), out)
    return out


def localize(img, cfg=None, gt=None, keep_branches=True):
    """Run both branches on one image and fuse them.

    ``gt`` is only consulted by bare ``"oracle"`` scorer specs. With
    ``keep_branches=False`` the fused map overwrites the pixel-branch map to
    save one full-frame raster.
    """
    cfg = (cfg or PipelineConfig()).validate()
    img = check_image(img)
    if gt is not None:
        gt = check_mask(gt)
    egs, sh, prior = resolve_scorers(cfg, gt)
    for scorer in (egs, sh, prior):
        scorer.validate()
    executor = ThreadPoolExecutor(cfg.threads) if cfg.threads > 1 else None
    try:
        p_egs = egs_map(img, egs, prior, cfg, executor)
    finally:
        if executor is not None:
            executor.shutdown()
    p_sh = sh_heatmap(
        img,
        sh,
        cfg.patch,
        cfg.stride,
        epsilon=cfg.heatmap_epsilon,
        n_jobs=cfg.threads,
        batch_size=cfg.window_batch,
    )
    fused = fuse_max(p_egs, p_sh, out=None if keep_branches else p_egs)
    return Localization(p_egs if keep_branches else None, p_sh, fused, binarize(fused, cfg.threshold))


# -- datasets --------------------------------------------------------------


@dataclass(frozen=True)
class ManifestEntry:
    image: str
    mask: str = None
    category: str = "SP"


@dataclass
class DatasetManifest:
    entries: list = field(default_factory=list)

    @property
    def sp(self):
        return [e for e in self.entries if e.category == "SP"]


def load_manifest(path):
    """One JSON object per line with ``image``, ``mask`` and ``category``;
    relative paths resolve against the manifest's directory."""
    root = os.path.dirname(os.path.abspath(path))

    def resolve(p):
        return p if p is None or os.path.isabs(p) else os.path.join(root, p)

    entries = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise InputError(f"{path}:{lineno}: {exc}") from None
            category = str(obj.get("category", "SP")).upper()
            if category not in CATEGORIES:
                raise InputError(f"{path}:{lineno}: unknown category {category!r}")
            if "image" not in obj:
                raise InputError(f"{path}:{lineno}: missing 'image'")
            if category == "SP" and not obj.get("mask"):
                raise InputError(f"{path}:{lineno}: SP entry without a mask")
            entries.append(ManifestEntry(resolve(obj["image"]), resolve(obj.get("mask")), category))
    return DatasetManifest(entries)


@dataclass
class EvalReport:
    curve: IouCurve
    images: list
    per_image_iou: list

    def report_csv(self):
        lines = ["image,iou\n"]
        lines += [f"{img},{v:.10f}\n" for img, v in zip(self.images, self.per_image_iou)]
        return "".join(lines)


def run_eval(manifest, cfg=None, thresholds=THRESHOLDS):
    """Localize every SP entry and sweep thresholds over the fused maps.

    OR and FR entries are skipped. Curves are accumulated per image so only
    one image is resident at a time.
    """
    cfg = (cfg or PipelineConfig()).validate()
    entries = manifest.sp
    if not entries:
        raise InputError("no SP samples in manifest")
    curves, names = [], []
    for entry in entries:
        if not entry.mask:
            raise InputError(f"SP entry {entry.image} has no mask")
        img = load_image(entry.image, as_uint8=True)
        gt = load_mask(entry.mask)
        if gt.shape != img.shape[:2]:
            raise InputError(f"mask {entry.mask} does not match image {entry.image}")
        result = localize(img, cfg, gt=gt, keep_branches=False)
        curves.append(sample_curve(result.fused, gt, thresholds))
        names.append(entry.image)
        logger.info("%s: best IoU %.4f", entry.image, curves[-1].max())
    total = np.zeros(len(thresholds))
    for c in curves:
        total += c
    per_sample = np.stack(curves)
    curve = IouCurve.from_ious(np.asarray(thresholds), total / len(curves), per_sample)
    k = int(np.searchsorted(curve.thresholds, curve.best_tau))
    return EvalReport(curve, names, [float(c[k]) for c in curves])
