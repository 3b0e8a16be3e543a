"""Forgery localization for arbitrary-resolution images.

Two complementary branches run over an image: a pixel branch scored on
non-overlapping tiles and stitched back, and a heatmap branch that turns a
tile-level real/synthetic classifier into a dense map with Hann-blended
sliding windows. The maps are fused by pixel-wise max and thresholded.
Learned models are external; built-in scorers are deterministic.
"""

from .edgetarget import EdgeTargetConfig, dilate, erode, soft_edge_target
from .errors import ForgeLocError, InputError, ProtocolError, ScorerError
from .estimators import EdgeEnergy, FilterBank, ForgeryLocalizer, SlidingHeatmap, SoftEdgeTargets
from .freqedge import (
    EdgeAugConfig,
    augment_edge_prior,
    edge_energy_score,
    feature_stack,
    gradient_features,
    high_pass_residual,
    srm_residuals,
)
from .fuseval import IouCurve, binarize, fuse_max, iou, sweep
from .heatmap import Accumulator, accumulate, finalize, hann_window, sh_heatmap
from .pipeline import DatasetManifest, PipelineConfig, load_manifest, localize, run_eval
from .raster import CropRecord, crop_back, load_image, load_mask, pad, to_luminance
from .scorer import build_tall_canvas, crop_logits, parse_scorer
from .tiler import pad_to_multiple, plan_tiles, plan_windows, stitch

__version__ = "0.1.0"
