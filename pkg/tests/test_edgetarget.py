import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import ndimage

from forgeloc.edgetarget import EdgeTargetConfig, dilate, disk, erode, soft_edge_target
from forgeloc.errors import InputError
from oracles import dilate_naive, erode_naive, soft_edge_dense


class TestMorphology:
    def test_empty(self):
        z = np.zeros((9, 9), bool)
        assert not dilate(z, 3).any() and not erode(z, 3).any()

    def test_single_pixel_disk(self):
        m = np.zeros((11, 11), bool)
        m[5, 5] = True
        d = dilate(m, 3)
        assert d.sum() == 29
        np.testing.assert_array_equal(d, dilate_naive(m, 3))
        assert not erode(m, 3).any()
        assert disk(3).sum() == 29

    def test_full_mask_border_ring(self):
        full = np.ones((6, 7), bool)
        assert dilate(full, 1).all()
        e = erode(full, 1)
        ring = np.ones_like(full)
        ring[1:-1, 1:-1] = False
        np.testing.assert_array_equal(e, ~ring)
        np.testing.assert_array_equal(e, erode_naive(full, 1))

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**31), st.integers(1, 5), st.floats(0.05, 0.9))
    def test_matches_brute_force(self, seed, r, density):
        m = np.random.default_rng(seed).random((14, 13)) < density
        np.testing.assert_array_equal(dilate(m, r), dilate_naive(m, r))
        np.testing.assert_array_equal(erode(m, r), erode_naive(m, r))

    def test_radius_validation(self):
        with pytest.raises(InputError):
            dilate(np.zeros((3, 3), bool), 0)


class TestSoftEdgeTarget:
    def test_empty(self):
        assert np.all(soft_edge_target(np.zeros((20, 20), bool)) == 0)

    def test_full_frame_has_border_band(self):
        y = soft_edge_target(np.ones((40, 40), bool))
        assert y[0, 20] > y[20, 20] and y.max() < 1

    def test_single_pixel(self):
        m = np.zeros((64, 64), bool)
        m[32, 32] = True
        y = soft_edge_target(m, EdgeTargetConfig((3, 7, 15), 0.5))
        ref = soft_edge_dense(m)
        np.testing.assert_allclose(y, ref, atol=1e-6)
        assert np.unravel_index(np.argmax(y), y.shape) == (32, 32)
        assert y.max() == pytest.approx(0.9999996144020593, abs=1e-6)
        assert y.max() < 1
        # symmetric about the pixel wherever the mirror border is out of reach
        local = y[24:41, 24:41]
        for t in (local[::-1], local[:, ::-1], local.T):
            np.testing.assert_allclose(t, local, atol=1e-6)

    def test_half_plane(self):
        # the frame edge is a region boundary too (outside = 0), so keep the
        # checked band 2 * 38 px away from it
        m = np.zeros((160, 160), bool)
        m[:, :80] = True
        y = soft_edge_target(m)
        np.testing.assert_allclose(y, soft_edge_dense(m), atol=1e-6)
        interior = y[40:120]
        np.testing.assert_allclose(interior, np.tile(interior[0], (80, 1)), atol=1e-6)
        # boundary sits between columns 79 and 80: the band is mirror-symmetric there
        np.testing.assert_allclose(y[80, 50:80], y[80, 80:110][::-1], atol=1e-6)
        assert int(np.argmax(y[80, 40:])) + 40 in (79, 80)
        flipped = soft_edge_target(m[:, ::-1])
        np.testing.assert_allclose(flipped, y[:, ::-1], atol=1e-6)

    @pytest.mark.parametrize("seed", range(8))
    def test_oracle_random(self, seed):
        m = np.random.default_rng(seed).random((32, 32)) < 0.4
        m = ndimage.binary_opening(m)
        np.testing.assert_allclose(soft_edge_target(m), soft_edge_dense(m), atol=1e-5)

    @settings(max_examples=15, deadline=None)
    @given(st.integers(0, 2**31))
    def test_equivariance(self, seed):
        m = np.random.default_rng(seed).random((24, 24)) < 0.5
        y = soft_edge_target(m)
        np.testing.assert_allclose(soft_edge_target(m[:, ::-1]), y[:, ::-1], atol=1e-6)
        np.testing.assert_allclose(soft_edge_target(m[::-1]), y[::-1], atol=1e-6)
        np.testing.assert_allclose(soft_edge_target(np.rot90(m)), np.rot90(y), atol=1e-6)

    def test_support_bound(self):
        m = np.zeros((120, 120), bool)
        m[50:70, 55:62] = True
        cfg = EdgeTargetConfig()
        y = soft_edge_target(m, cfg)
        reach = max(cfg.radii) + int(np.ceil(3 * cfg.lam * max(cfg.radii)))
        boundary = m & ~ndimage.binary_erosion(m)
        dist = ndimage.distance_transform_cdt(~boundary, metric="chessboard")
        assert np.all(dist[y > 0] <= reach)
        assert y[0, 0] == 0

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2**31))
    def test_range(self, seed):
        m = np.random.default_rng(seed).random((16, 18)) < 0.3
        y = soft_edge_target(m)
        assert y.min() >= 0 and y.max() < 1

    @pytest.mark.parametrize(
        "cfg", [EdgeTargetConfig((3, 3)), EdgeTargetConfig((0,)), EdgeTargetConfig(lam=0), EdgeTargetConfig(epsilon=0)]
    )
    def test_invalid_config(self, cfg):
        with pytest.raises(InputError):
            soft_edge_target(np.zeros((4, 4), bool), cfg)
