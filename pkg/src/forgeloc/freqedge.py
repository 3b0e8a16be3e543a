"""Fixed (non-learnable) filter bank, edge-energy scorer and edge-prior
augmentation.

All filters are applied as cross-correlations (the deep-learning "conv"
convention) with mirror borders: ``d c b | a b c d | c b a``.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import InputError
from .raster import to_luminance
from .validation import as_float_region, check_gray, check_image, check_prob_map

BORDER = "mirror"  # scipy name for numpy's "reflect"
ONE_BELOW = np.float32(1.0 - 2.0**-24)

SRM_FIRST_ORDER = np.array([[0, 0, 0], [0, -1, 1], [0, 0, 0]], dtype=np.float64) / 2.0
SRM_KB = np.array([[-1, 2, -1], [2, -4, 2], [-1, 2, -1]], dtype=np.float64) / 4.0
SRM_SQUARE5 = (
    np.array(
        [
            [-1, 2, -2, 2, -1],
            [2, -6, 8, -6, 2],
            [-2, 8, -12, 8, -2],
            [2, -6, 8, -6, 2],
            [-1, 2, -2, 2, -1],
        ],
        dtype=np.float64,
    )
    / 12.0
)
SOBEL_X = np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]], dtype=np.float64)
SOBEL_Y = SOBEL_X.T.copy()
LAPLACIAN = np.array([[0, 1, 0], [1, -4, 1], [0, 1, 0]], dtype=np.float64)

KERNELS = {
    "srm_first_order": SRM_FIRST_ORDER,
    "srm_kb": SRM_KB,
    "srm_square5": SRM_SQUARE5,
    "sobel_x": SOBEL_X,
    "sobel_y": SOBEL_Y,
    "laplacian": LAPLACIAN,
}

for _name, _k in KERNELS.items():
    if abs(_k.sum()) > 1e-12:
        raise AssertionError(f"kernel {_name} is not zero-sum")
    _k.setflags(write=False)

RESIDUAL_PLANES = ("hp_r", "hp_g", "hp_b", "srm_first_order", "srm_kb", "srm_square5")
GRADIENT_PLANES = ("sobel_x", "sobel_y", "sobel_mag", "laplacian")


def gaussian_kernel1d(sigma):
    """Normalized 1-D Gaussian on ``[-ceil(3 sigma), ceil(3 sigma)]``."""
    if sigma <= 0:
        return np.ones(1)
    radius = int(math.ceil(3.0 * sigma))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    with np.errstate(over="ignore"):  # tiny sigma: off-centre taps underflow to 0
        g = np.exp(-0.5 * (x / sigma) ** 2)
    return g / g.sum()


def gaussian_blur(x, sigma, dtype=np.float32):
    """Separable Gaussian over the first two axes (mirror border)."""
    x = np.asarray(x, dtype=dtype)
    if sigma <= 0:
        return x.copy()
    g = gaussian_kernel1d(sigma)
    out = ndimage.correlate1d(x, g, axis=0, mode=BORDER, output=dtype)
    return ndimage.correlate1d(out, g, axis=1, mode=BORDER, output=dtype)


def zero_sum_filter(x, kernel, dtype=np.float32):
    """Correlate a 2-D plane with a zero-sum kernel.

    The plane is first shifted by a reference sample. For a zero-sum kernel
    this does not change the response, and it makes the response on a
    constant plane exactly zero instead of rounding noise.
    """
    x = np.asarray(x, dtype=np.float64)
    centred = x - x.flat[0]
    return ndimage.correlate(centred, kernel, mode=BORDER, output=dtype)


def high_pass_residual(img, sigma=1.5):
    """``I - Blur_sigma(I)`` per RGB channel, as a ``(3, H, W)`` stack."""
    if sigma <= 0:
        raise InputError("high-pass sigma must be > 0")
    img = check_image(img)
    img = as_float_region(img, slice(None), slice(None)).astype(np.float64)
    centred = img - img.reshape(-1, 3)[0]
    blurred = gaussian_blur(centred, sigma, dtype=np.float64)
    return np.moveaxis(centred - blurred, 2, 0).astype(np.float32)


def srm_residuals(luma):
    """First-order, KB and 5x5 square SRM responses, ``(3, H, W)``."""
    luma = check_gray(luma)
    return np.stack(
        [zero_sum_filter(luma, k) for k in (SRM_FIRST_ORDER, SRM_KB, SRM_SQUARE5)]
    )


def gradient_features(luma):
    """Sobel x, Sobel y, Sobel magnitude and Laplacian, ``(4, H, W)``."""
    luma = check_gray(luma)
    gx = zero_sum_filter(luma, SOBEL_X)
    gy = zero_sum_filter(luma, SOBEL_Y)
    mag = np.sqrt(gx.astype(np.float64) ** 2 + gy.astype(np.float64) ** 2)
    return np.stack([gx, gy, mag.astype(np.float32), zero_sum_filter(luma, LAPLACIAN)])


def feature_stack(img, sigma=1.5):
    """Residual stack followed by gradient stack: ``(10, H, W)``."""
    img = check_image(img)
    luma = to_luminance(img)
    return np.concatenate(
        [high_pass_residual(img, sigma), srm_residuals(luma), gradient_features(luma)]
    )


def edge_energy_score(patch, beta=4.0, sigma=1.5):
    """``1 - exp(-beta * z)`` with ``z`` the per-pixel L2 norm over the ten
    fixed feature planes. Output is float32 in ``[0, 1)``."""
    if beta <= 0:
        raise InputError("beta must be > 0")
    patch = check_image(patch)
    luma = to_luminance(patch)
    # accumulate squared norms plane by plane; a full stack is 10x the tile
    z2 = np.zeros(patch.shape[:2], dtype=np.float64)
    for plane in high_pass_residual(patch, sigma):
        z2 += np.square(plane, dtype=np.float64)
    for k in (SRM_FIRST_ORDER, SRM_KB, SRM_SQUARE5, LAPLACIAN):
        z2 += np.square(zero_sum_filter(luma, k), dtype=np.float64)
    gx = zero_sum_filter(luma, SOBEL_X).astype(np.float64)
    gy = zero_sum_filter(luma, SOBEL_Y).astype(np.float64)
    # the magnitude plane contributes gx^2 + gy^2 a second time
    z2 += 2.0 * (gx * gx + gy * gy)
    out = -np.expm1(-beta * np.sqrt(z2))
    return np.minimum(out.astype(np.float32), ONE_BELOW)


def dump_kernels():
    """Plain-text listing of every fixed kernel, for audit."""
    lines = []
    for name, k in KERNELS.items():
        lines.append(f"# {name} {k.shape[0]}x{k.shape[1]}")
        lines.extend(" ".join(f"{v:.10g}" for v in row) for row in k)
    g = gaussian_kernel1d(1.5)
    lines.append(f"# gaussian_1d sigma=1.5 taps={g.size}")
    lines.append(" ".join(f"{v:.10g}" for v in g))
    return "\n".join(lines) + "\n"


# -- edge-prior augmentation ---------------------------------------------


@dataclass(frozen=True)
class EdgeAugConfig:
    blur_sigma: float = 1.0
    temperature: float = 1.5
    break_count: int = 4
    noise_band: tuple = (0.05, 0.25)
    noise_amp: float = 0.05
    mix_prob: float = 0.1
    rng_seed: int = 0

    @classmethod
    def identity(cls, rng_seed=0):
        return cls(0.0, 1.0, 0, (0.0, 0.5), 0.0, 0.0, rng_seed)

    def validate(self):
        if self.blur_sigma < 0:
            raise InputError("blur_sigma must be >= 0")
        if self.temperature < 1:
            raise InputError("temperature must be >= 1")
        if self.break_count < 0 or int(self.break_count) != self.break_count:
            raise InputError("break_count must be a non-negative integer")
        lo, hi = self.noise_band
        if not 0.0 <= lo <= hi <= 0.5:
            raise InputError("noise_band must satisfy 0 <= low <= high <= 0.5")
        if self.noise_amp < 0:
            raise InputError("noise_amp must be >= 0")
        if not 0.0 <= self.mix_prob <= 1.0:
            raise InputError("mix_prob must lie in [0, 1]")
        return self


def _soften(e, temperature, delta=1e-6):
    def soft(v):
        v = np.clip(v, delta, 1.0 - delta)
        return 1.0 / (1.0 + np.exp(-np.log(v / (1.0 - v)) / temperature))

    lo, hi = soft(0.0), soft(1.0)
    # endpoint-preserving rescale keeps exact zeros at zero
    return (soft(e) - lo) / (hi - lo)


def _break_segments(e, count, rng):
    h, w = e.shape
    for _ in range(count):
        ys, xs = np.nonzero(e > 0.5)
        if ys.size == 0:
            return e
        k = rng.integers(ys.size)
        width = int(rng.integers(1, 4))
        length = int(rng.integers(5, 17))
        cy, cx = int(ys[k]), int(xs[k])
        if rng.random() < 0.5:
            sh, sw = width, length
        else:
            sh, sw = length, width
        y0, x0 = max(0, cy - sh // 2), max(0, cx - sw // 2)
        e[y0 : min(h, y0 + sh), x0 : min(w, x0 + sw)] = 0.0
    return e


def _band_noise(shape, band, amp, rng):
    white = rng.standard_normal(shape)
    fy = np.fft.fftfreq(shape[0])[:, None]
    fx = np.fft.fftfreq(shape[1])[None, :]
    f = np.sqrt(fy**2 + fx**2)
    keep = (f >= band[0]) & (f <= band[1])
    noise = np.real(np.fft.ifft2(np.fft.fft2(white) * keep))
    peak = np.max(np.abs(noise))
    if peak == 0:
        return np.zeros(shape)
    return noise * (amp / peak)


def _mix_background(e, prob, rng, block=16, share=0.3):
    h, w = e.shape
    source = e.copy()
    origins = [(y, x) for y in range(0, h, block) for x in range(0, w, block)]
    order = rng.permutation(len(origins))
    draws = rng.random(len(origins))
    for i, (y, x) in enumerate(origins):
        if draws[i] >= prob:
            continue
        sy, sx = origins[order[i]]
        bh = min(block, h - y, h - sy)
        bw = min(block, w - x, w - sx)
        dst = e[y : y + bh, x : x + bw]
        dst *= 1.0 - share
        dst += share * source[sy : sy + bh, sx : sx + bw]
    return e


def augment_edge_prior(e, cfg):
    """Degrade an edge prior: temperature softening, Gaussian blur, segment
    breaks, band-limited noise, background mixing (in that order).

    Each step is skipped when its parameter is neutral, so
    ``EdgeAugConfig.identity()`` returns the input unchanged.
    """
    e = check_prob_map(e)
    cfg.validate()
    rng = np.random.default_rng(cfg.rng_seed)
    dtype = e.dtype
    out = e.astype(np.float64)
    if cfg.temperature != 1:
        out = _soften(out, cfg.temperature)
    if cfg.blur_sigma > 0:
        out = gaussian_blur(out, cfg.blur_sigma, dtype=np.float64)
    if cfg.break_count > 0:
        out = _break_segments(out, int(cfg.break_count), rng)
    if cfg.noise_amp > 0:
        out = np.clip(out + _band_noise(out.shape, cfg.noise_band, cfg.noise_amp, rng), 0, 1)
    if cfg.mix_prob > 0:
        out = _mix_background(out, cfg.mix_prob, rng)
    return np.clip(out, 0.0, 1.0).astype(dtype)
