import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import expit

from forgeloc.errors import InputError, ScorerError
from forgeloc.heatmap import (
    Accumulator,
    Window2D,
    _BandAccumulator,
    accumulate,
    finalize,
    full_heatmap_accumulator,
    hann_window,
    sh_heatmap,
    window_regions,
)
from forgeloc.scorer import ConstantTileScorer, OracleTileScorer, TileScorer
from forgeloc.tiler import plan_windows
from forgeloc.validation import as_float_region
from oracles import window_sums_naive


class MeanLogitScorer(TileScorer):
    """Logit from tile contents, so every window gets its own value."""

    def score_tile(self, tile, region=None):
        return float(12.0 * (tile.mean() - 0.5) + 3.0 * (tile[0, 0, 0] - tile[-1, -1, 2]))


class BrokenScorer(TileScorer):
    requires_pixels = False

    def score_tile(self, tile, region=None):
        return float("nan")


def _expected(img, patch, stride, scorer, window, eps=1e-12):
    plan = plan_windows(*img.shape[:2], patch, stride)
    logits = [scorer.score_tile(as_float_region(img, *r), r) for _, r in window_regions(plan, img)]
    c = plan.pad
    S, W = window_sums_naive((c.padded_h, c.padded_w), plan.windows, logits, window.weights)
    rows, cols = c.inner
    return expit(S[rows, cols] / np.maximum(W[rows, cols], eps))


class TestHann:
    def test_five_point(self):
        w = hann_window(5)
        np.testing.assert_allclose(w.weights[2], [0, 0.5, 1, 0.5, 0], atol=1e-15)
        assert w.weights[2, 2] == 1.0

    def test_interior_variant_is_positive(self):
        w = hann_window(5, endpoints=False)
        np.testing.assert_allclose(w.weights[2], [0.25, 0.75, 1, 0.75, 0.25], atol=1e-15)
        assert w.weights.min() > 0

    def test_separable_symmetric(self):
        w = hann_window(336, endpoints=False).weights
        np.testing.assert_array_equal(w, w.T)
        np.testing.assert_allclose(w, w[::-1, ::-1], atol=1e-15)
        assert w.max() == 1.0

    def test_read_only(self):
        with pytest.raises(ValueError):
            hann_window(4).weights[0, 0] = 3

    @pytest.mark.parametrize("p", [0, 1, 2, 2.5])
    def test_bad_size(self, p):
        with pytest.raises(InputError):
            hann_window(p)


class TestAccumulate:
    def test_single_window(self):
        acc = Accumulator(4, 4)
        win = Window2D(2, np.array([[1.0, 0.5], [0.5, 0.25]]))
        accumulate(acc, (1, 2), 2.0, win)
        assert acc.S[1, 2] == 2.0 and acc.S[2, 3] == 0.5
        assert acc.W[2, 2] == 0.5
        assert acc.S[0].sum() == 0 and acc.S[:, :2].sum() == 0

    def test_overlap_weighted_mean(self):
        acc = Accumulator(1, 3)
        win = Window2D(1, np.array([[2.0]]))
        acc.add((0, 1), 1.0, win).add((0, 1), 3.0, win)
        h = finalize(acc)
        assert h[0, 1] == pytest.approx(expit(2.0), rel=1e-7)
        # uncovered pixels: S = W = 0 -> sigmoid(0)
        assert h[0, 0] == pytest.approx(0.5)

    def test_logit_clip(self):
        acc = Accumulator(1, 1)
        accumulate(acc, (0, 0), 1e6, Window2D(1, np.ones((1, 1))))
        assert acc.S[0, 0] == 30.0

    def test_bounds(self):
        with pytest.raises(InputError):
            accumulate(Accumulator(3, 3), (2, 2), 0.0, hann_window(3))

    def test_non_finite(self):
        with pytest.raises(ScorerError):
            accumulate(Accumulator(3, 3), (0, 0), np.inf, hann_window(3))

    def test_open_interval(self):
        acc = Accumulator(1, 2)
        win = Window2D(1, np.ones((1, 1)))
        acc.add((0, 0), 30.0, win).add((0, 1), -30.0, win)
        h = finalize(acc)
        assert 0.0 < h[0, 1] and h[0, 0] < 1.0


class TestBruteForce:
    @pytest.mark.parametrize("shape", [(64, 64), (40, 23), (16, 16), (9, 50), (33, 17)])
    def test_matches_naive(self, shape, rng):
        img = rng.random(shape + (3,))
        win = hann_window(16, endpoints=False)
        got = sh_heatmap(img, MeanLogitScorer(), 16, 8, window=win)
        want = _expected(img, 16, 8, MeanLogitScorer(), win)
        np.testing.assert_allclose(got, want, atol=1e-6)
        # float32 output limits the tolerance; the float64 sums are exact
        plan = plan_windows(*shape, 16, 8)
        logits = [
            MeanLogitScorer().score_tile(as_float_region(img, *r)) for _, r in window_regions(plan, img)
        ]
        acc = full_heatmap_accumulator(plan, logits, win)
        S, W = window_sums_naive(acc.shape, plan.windows, logits, win.weights)
        np.testing.assert_allclose(acc.S, S, atol=1e-9)
        np.testing.assert_allclose(acc.W, W, atol=1e-9)

    def test_band_equals_full(self, rng):
        img = rng.random((150, 97, 3))
        for patch, stride in [(16, 8), (32, 8), (20, 20), (24, 7)]:
            plan = plan_windows(150, 97, patch, stride)
            win = hann_window(patch, endpoints=False)
            logits = [MeanLogitScorer().score_tile(as_float_region(img, *r)) for _, r in window_regions(plan, img)]
            full = finalize(full_heatmap_accumulator(plan, logits, win), crop=plan.pad)
            out = np.empty((150, 97), np.float32)
            band = _BandAccumulator(plan, 1e-12, out)
            for o, l in zip(plan.windows, logits):
                band.add(o, l, win)
            band.close()
            np.testing.assert_array_equal(out, full)

    @pytest.mark.parametrize("n_jobs,batch", [(1, 1), (2, 3), (8, 64)])
    def test_parallel_identical(self, n_jobs, batch, rng):
        img = rng.random((70, 90, 3)).astype(np.float32)
        ref = sh_heatmap(img, MeanLogitScorer(), 16, 8)
        got = sh_heatmap(img, MeanLogitScorer(), 16, 8, n_jobs=n_jobs, batch_size=batch)
        assert got.tobytes() == ref.tobytes()

    def test_uint8_equals_float(self, rng):
        img = rng.integers(0, 256, (40, 40, 3), dtype=np.uint8)
        a = sh_heatmap(img, MeanLogitScorer(), 16, 8)
        b = sh_heatmap((img / 255.0).astype(np.float32), MeanLogitScorer(), 16, 8)
        assert a.tobytes() == b.tobytes()


class TestInvariants:
    @settings(max_examples=25, deadline=None)
    @given(
        h=st.integers(1, 90),
        w=st.integers(1, 90),
        logit=st.floats(-10, 10),
    )
    def test_constant_logit_constant_map(self, h, w, logit):
        H = sh_heatmap(np.zeros((h, w, 3)), ConstantTileScorer(logit), 24, 8)
        assert H.shape == (h, w)
        np.testing.assert_allclose(H, expit(logit), atol=1e-6)
        assert np.all((H > 0) & (H < 1))

    def test_constant_full_size(self):
        H = sh_heatmap(np.zeros((500, 337, 3), np.uint8), ConstantTileScorer(-2.0))
        assert H.max() - H.min() < 1e-9

    def test_single_window_image(self):
        # 100x100 pads to one 336 window: the heatmap is that window's sigmoid
        H = sh_heatmap(np.zeros((100, 100, 3)), ConstantTileScorer(1.5))
        np.testing.assert_allclose(H, expit(1.5), atol=1e-7)

    def test_non_finite_logit(self):
        with pytest.raises(ScorerError):
            sh_heatmap(np.zeros((20, 20, 3)), BrokenScorer(), 16, 8)

    def test_window_mismatch(self):
        with pytest.raises(InputError):
            sh_heatmap(np.zeros((20, 20, 3)), ConstantTileScorer(0), 16, 8, window=hann_window(8))


def test_centered_block_oracle():
    # 336x336 block centred in 672x672 at patch 336 / stride 112: only the
    # central 2x2 windows vote +8, so the recovered blob is far smaller than
    # the block
    m = np.zeros((672, 672), bool)
    m[168:504, 168:504] = True
    H = sh_heatmap(np.zeros((672, 672, 3), np.uint8), OracleTileScorer(m))
    pred = H >= 0.5
    iou = (pred & m).sum() / (pred | m).sum()
    assert iou == pytest.approx(0.341, abs=1e-3)
    assert pred.sum() < m.sum()
