"""Pluggable scoring backends.

Pixel scorers map a patch to a per-pixel probability map (segmentation
role). Tile scorers map a window to one real/synthetic logit
(classification role). Built-in backends are deterministic; learned models
plug in through :class:`ExternalScorer` and its directory protocol.
"""

import math
import os
import shlex
import shutil
import subprocess
import threading
from dataclasses import dataclass

import cv2
import numpy as np

from .errors import InputError, ProtocolError, ScorerError
from .freqedge import edge_energy_score
from .raster import load_mask
from .validation import as_float_region, check_image, check_mask, check_prob_map

ORACLE_LOGIT = 8.0
ORACLE_OVERLAP = 0.5
KIND_ENV = "FORGELOC_SCORER_KIND"


class Scorer:
    kind = None
    # False lets the engine skip pixel extraction entirely
    requires_pixels = True
    # False means batches are sent as a single serialized request
    parallel_safe = True

    def validate(self):
        return self

    def __repr__(self):
        return f"{type(self).__name__}()"


class PixelScorer(Scorer):
    kind = "pixel"

    def score_pixel(self, patch, origin=None):
        raise NotImplementedError

    def score_pixels(self, patches, origins, executor=None):
        if executor is None or not self.parallel_safe:
            return [self.score_pixel(p, o) for p, o in zip(patches, origins)]
        return list(executor.map(self.score_pixel, patches, origins))


class TileScorer(Scorer):
    kind = "tile"

    def score_tile(self, tile, region=None):
        raise NotImplementedError

    def score_tiles(self, tiles, regions, executor=None):
        if executor is None or not self.parallel_safe:
            return [self.score_tile(t, r) for t, r in zip(tiles, regions)]
        return list(executor.map(self.score_tile, tiles, regions))


class ConstantPixelScorer(PixelScorer):
    requires_pixels = False

    def __init__(self, value):
        if not 0.0 <= value <= 1.0:
            raise InputError(f"constant pixel score must lie in [0, 1], got {value}")
        self.value = float(value)

    def score_pixel(self, patch, origin=None):
        return np.full(np.shape(patch)[:2], self.value, dtype=np.float32)

    def __repr__(self):
        return f"ConstantPixelScorer({self.value})"


class ConstantTileScorer(TileScorer):
    requires_pixels = False

    def __init__(self, value):
        if not math.isfinite(value):
            raise InputError("constant logit must be finite")
        self.value = float(value)

    def score_tile(self, tile, region=None):
        return self.value

    def __repr__(self):
        return f"ConstantTileScorer({self.value})"


class EdgeEnergyScorer(PixelScorer):
    """Deterministic stand-in for a learned edge head."""

    def __init__(self, beta=4.0, sigma=1.5):
        self.beta = beta
        self.sigma = sigma

    def score_pixel(self, patch, origin=None):
        return edge_energy_score(patch, beta=self.beta, sigma=self.sigma)


class OraclePixelScorer(PixelScorer):
    """Returns the ground-truth crop at the patch's position."""

    requires_pixels = False

    def __init__(self, mask):
        self.mask = check_mask(mask)

    def score_pixel(self, patch, origin=None):
        if origin is None:
            raise ScorerError("oracle pixel scorer needs the patch origin")
        y0, x0 = origin
        h, w = np.shape(patch)[:2]
        crop = self.mask[y0 : y0 + h, x0 : x0 + w]
        if crop.shape != (h, w):
            raise ScorerError(f"patch at {origin} of size {(h, w)} leaves the mask")
        return crop.astype(np.float32)


class OracleTileScorer(TileScorer):
    """+L0 when at least half the window is manipulated, else -L0.

    ``region`` is a pair of row/column index arrays into the image (as
    produced for padded sliding windows), so padding is mirrored exactly as
    the pixels were.
    """

    requires_pixels = False

    def __init__(self, mask, magnitude=ORACLE_LOGIT, threshold=ORACLE_OVERLAP):
        self.mask = check_mask(mask)
        self.magnitude = float(magnitude)
        self.threshold = float(threshold)

    def overlap(self, region):
        rows, cols = region
        return float(self.mask[np.ix_(rows, cols)].mean())

    def score_tile(self, tile, region=None):
        if region is None:
            raise ScorerError("oracle tile scorer needs the window region")
        return self.magnitude if self.overlap(region) >= self.threshold else -self.magnitude


# -- tall canvas -----------------------------------------------------------


@dataclass(frozen=True)
class TallCanvas:
    """``[image; mean-filled separator; prior x3]`` stacked vertically."""

    image: np.ndarray
    prior: np.ndarray
    separator: int
    canvas: np.ndarray

    @property
    def height(self):
        return self.image.shape[0]

    def bands(self):
        h, s = self.height, self.separator
        return self.canvas[:h], self.canvas[h : h + s], self.canvas[h + s :]


def separator_height(h, multiple=32):
    return (-2 * h) % multiple


def build_tall_canvas(image, prior):
    image = check_image(image)
    if image.dtype == np.uint8:
        image = as_float_region(image, slice(None), slice(None))
    prior = check_prob_map(prior, name="prior")
    if image.shape[:2] != prior.shape:
        raise InputError(f"image {image.shape[:2]} and prior {prior.shape} differ in size")
    h, w = prior.shape
    s = separator_height(h)
    canvas = np.empty((2 * h + s, w, 3), dtype=np.float32)
    canvas[:h] = image
    canvas[h : h + s] = image.reshape(-1, 3).mean(axis=0, dtype=np.float64)
    canvas[h + s :] = prior[:, :, None]
    return TallCanvas(image, prior, s, canvas)


def crop_logits(output, h, w):
    """Top-left ``h x w`` region (the image band) of a canvas-res output."""
    output = np.asarray(output)
    if output.shape[0] < h or output.shape[1] < w:
        raise InputError(f"output {output.shape[:2]} is smaller than crop {(h, w)}")
    return output[:h, :w]


# -- external protocol -----------------------------------------------------


def write_rgb16(path, img):
    img = np.clip(np.asarray(img, dtype=np.float64), 0.0, 1.0)
    data = np.round(img * 65535.0).astype(np.uint16)
    if not cv2.imwrite(str(path), np.ascontiguousarray(data[:, :, ::-1])):
        raise ProtocolError(f"could not write request patch {path}")


def read_rgb(path):
    """Read an 8- or 16-bit PNG as float RGB in [0, 1]."""
    data = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if data is None:
        raise ProtocolError(f"unreadable patch {path}")
    scale = 65535.0 if data.dtype == np.uint16 else 255.0
    if data.ndim == 2:
        data = np.repeat(data[:, :, None], 3, axis=2)
    else:
        data = data[:, :, 2::-1]
    return data.astype(np.float64) / scale


def write_request(req_dir, patches):
    """Write ``NNNNN.png`` patches and ``manifest.txt`` into ``req_dir``."""
    os.makedirs(req_dir, exist_ok=True)
    lines = []
    for i, patch in enumerate(patches):
        name = f"{i:05d}.png"
        write_rgb16(os.path.join(req_dir, name), patch)
        lines.append(f"{i} {name} {patch.shape[0]} {patch.shape[1]}\n")
    with open(os.path.join(req_dir, "manifest.txt"), "w") as fh:
        fh.writelines(lines)


def read_manifest(req_dir):
    entries = []
    with open(os.path.join(req_dir, "manifest.txt")) as fh:
        for line in fh:
            if line.strip():
                i, name, h, w = line.split()
                entries.append((int(i), name, int(h), int(w)))
    return entries


def parse_scores(path, n):
    """Parse ``index logit`` lines; indices must be exactly ``0..n-1``."""
    if not os.path.isfile(path):
        raise ProtocolError(f"missing response file {path}")
    scores = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ProtocolError(f"{path}:{lineno}: expected 'index logit'")
            try:
                i, value = int(parts[0]), float(parts[1])
            except ValueError:
                raise ProtocolError(f"{path}:{lineno}: malformed line {line.strip()!r}") from None
            if i in scores:
                raise ProtocolError(f"duplicate index {i} in {path}")
            if not 0 <= i < n:
                raise ProtocolError(f"unknown index {i} in {path}")
            if not math.isfinite(value):
                raise ProtocolError(f"non-finite logit for index {i} in {path}")
            scores[i] = value
    missing = [i for i in range(n) if i not in scores]
    if missing:
        raise ProtocolError(f"missing index {missing[0]} in {path}")
    return [scores[i] for i in range(n)]


def read_prob_response(resp_dir, i, shape):
    path = os.path.join(resp_dir, f"{i:05d}.png")
    if not os.path.isfile(path):
        raise ProtocolError(f"missing index {i}: no {path}")
    data = cv2.imread(path, cv2.IMREAD_UNCHANGED)
    if data is None or data.dtype != np.uint16 or data.ndim != 2:
        raise ProtocolError(f"index {i}: response must be a 16-bit single-channel PNG")
    if data.shape != tuple(shape):
        raise ProtocolError(f"index {i}: response is {data.shape}, expected {tuple(shape)}")
    return (data.astype(np.float64) / 65535.0).astype(np.float32)


def _reset_dir(path):
    if os.path.isdir(path):
        shutil.rmtree(path)
    os.makedirs(path)


class ExternalScorer(Scorer):
    """Scorer backed by an external command exchanging files on disk.

    Each batch is written to ``<directory>/req``; the command is run as
    ``<command> <req dir> <resp dir>`` with ``FORGELOC_SCORER_KIND`` set to
    ``pixel`` or ``tile``. Requests on one handle are serialized.
    """

    parallel_safe = False

    def __init__(self, directory, command, kind, timeout=600.0):
        if kind not in ("pixel", "tile"):
            raise InputError(f"unknown scorer kind {kind!r}")
        self.directory = os.path.abspath(directory)
        self.command = command
        self.kind = kind
        self.timeout = timeout
        self._lock = threading.Lock()
        self._validated = False

    def __repr__(self):
        return f"ExternalScorer({self.directory!r}, {self.command!r}, {self.kind!r})"

    @property
    def req_dir(self):
        return os.path.join(self.directory, "req")

    @property
    def resp_dir(self):
        return os.path.join(self.directory, "resp")

    def validate(self):
        """Handshake on a flat gray probe patch."""
        if not self._validated:
            probe = np.full((32, 32, 3), 0.5, dtype=np.float32)
            self._validated = True
            try:
                self.run([probe])
            except Exception:
                self._validated = False
                raise
        return self

    def run(self, patches):
        with self._lock:
            _reset_dir(self.req_dir)
            _reset_dir(self.resp_dir)
            write_request(self.req_dir, patches)
            argv = shlex.split(self.command) + [self.req_dir, self.resp_dir]
            env = dict(os.environ, **{KIND_ENV: self.kind})
            try:
                proc = subprocess.run(
                    argv,
                    cwd=self.directory,
                    env=env,
                    capture_output=True,
                    text=True,
                    timeout=self.timeout,
                )
            except subprocess.TimeoutExpired:
                raise ProtocolError(f"external scorer timed out after {self.timeout}s") from None
            except OSError as exc:
                raise ProtocolError(f"cannot run external scorer: {exc}") from None
            if proc.returncode != 0:
                raise ProtocolError(
                    f"external scorer exited with status {proc.returncode}: "
                    f"{proc.stderr.strip()[-500:]}"
                )
            if self.kind == "tile":
                return parse_scores(os.path.join(self.resp_dir, "scores.txt"), len(patches))
            return [
                read_prob_response(self.resp_dir, i, p.shape[:2]) for i, p in enumerate(patches)
            ]

    def score_pixels(self, patches, origins=None, executor=None):
        self.validate()
        return self.run([as_float_region(p, slice(None), slice(None)) for p in patches])

    def score_tiles(self, tiles, regions=None, executor=None):
        self.validate()
        return self.run(tiles)

    def score_pixel(self, patch, origin=None):
        return self.score_pixels([patch])[0]

    def score_tile(self, tile, region=None):
        return self.score_tiles([tile])[0]


# -- spec strings ----------------------------------------------------------


def parse_scorer(spec, kind):
    """Build a scorer from ``constant:<v>``, ``edge-energy``,
    ``oracle:<mask path>`` or ``external:<dir>:<command>``."""
    if isinstance(spec, Scorer):
        if spec.kind != kind:
            raise InputError(f"{spec!r} is a {spec.kind} scorer, {kind} required")
        return spec
    name, _, rest = str(spec).partition(":")
    if name == "constant":
        try:
            value = float(rest)
        except ValueError:
            raise InputError(f"bad constant scorer spec {spec!r}") from None
        return ConstantPixelScorer(value) if kind == "pixel" else ConstantTileScorer(value)
    if name == "edge-energy":
        if kind != "pixel":
            raise InputError("edge-energy is a pixel scorer")
        return EdgeEnergyScorer(float(rest)) if rest else EdgeEnergyScorer()
    if name == "oracle":
        if not rest:
            raise InputError("oracle scorer needs a mask path")
        mask = load_mask(rest)
        return OraclePixelScorer(mask) if kind == "pixel" else OracleTileScorer(mask)
    if name == "external":
        directory, _, command = rest.partition(":")
        if not directory or not command:
            raise InputError(f"external scorer spec needs <dir>:<command>, got {spec!r}")
        return ExternalScorer(directory, command, kind)
    raise InputError(f"unknown scorer spec {spec!r}")

