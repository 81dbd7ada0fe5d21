import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mmdemosaick.cfa_ops import (
    PATTERN_KINDS,
    B,
    G,
    R,
    bilinear_demosaick,
    data_consistency,
    make_pattern,
    mosaic,
)
from mmdemosaick.errors import ArgumentError, ShapeError
from mmdemosaick.metrics import psnr


class TestPatterns:
    def test_bayer_rggb_cell(self):
        p = make_pattern("bayer_rggb")
        assert p.cell.shape == (2, 2)
        assert p.counts() == (1, 2, 1)
        assert p.channel_at(0, 0) == R

    def test_xtrans_counts(self):
        p = make_pattern("xtrans")
        assert p.cell.shape == (6, 6)
        assert p.counts() == (8, 20, 8)

    def test_bggr_origin_is_blue(self):
        assert make_pattern("bayer_bggr").channel_at(0, 0) == B

    def test_unknown_kind(self):
        with pytest.raises(ArgumentError):
            make_pattern("quad_bayer")

    @pytest.mark.parametrize("kind", PATTERN_KINDS)
    def test_tiling(self, kind):
        p = make_pattern(kind)
        chan = p.channel_map(13, 11)
        for r in range(13):
            for c in range(11):
                assert chan[r, c] == p.cell[r % p.period_h, c % p.period_w]

    @pytest.mark.parametrize("kind", PATTERN_KINDS)
    def test_one_channel_per_pixel(self, kind):
        mask = make_pattern(kind).mask(12, 12)
        assert np.all(mask.sum(axis=2) == 1)


class TestMosaic:
    @settings(max_examples=30, deadline=None)
    @given(kind=st.sampled_from(PATTERN_KINDS), seed=st.integers(0, 2**32 - 1))
    def test_idempotent(self, kind, seed):
        x = np.random.default_rng(seed).uniform(0, 255, size=(7, 9, 3))
        p = make_pattern(kind)
        once = mosaic(x, p).data
        np.testing.assert_array_equal(mosaic(once, p).data, once)

    def test_white_bayer_has_one_sample_per_pixel(self):
        y = mosaic(np.full((2, 2, 3), 255.0), make_pattern("bayer_rggb"))
        assert np.count_nonzero(y.data) == 4

    @pytest.mark.parametrize("kind", PATTERN_KINDS)
    def test_nonzero_count_per_pixel(self, kind, rng):
        y = mosaic(rng.uniform(1, 255, size=(12, 12, 3)), make_pattern(kind))
        assert np.all(np.count_nonzero(y.data, axis=2) == 1)

    def test_needs_three_channels(self):
        with pytest.raises(ShapeError):
            mosaic(np.zeros((4, 4, 1)), make_pattern("bayer_rggb"))


class TestDataConsistency:
    def test_zero_estimate_gives_observation(self, observation):
        np.testing.assert_array_equal(data_consistency(np.zeros(observation.shape), observation), observation.data)

    def test_ground_truth_is_fixed_point(self, clean_image, observation):
        np.testing.assert_array_equal(data_consistency(clean_image, observation), clean_image)

    def test_matches_masked_update(self, rng, clean_image, observation):
        u = rng.normal(size=clean_image.shape)
        m = observation.mask()
        out = data_consistency(u, observation)
        np.testing.assert_allclose(out, u + m * (clean_image - u))
        np.testing.assert_array_equal(out[m > 0], observation.data[m > 0])

    def test_shape_mismatch(self, observation):
        with pytest.raises(ShapeError):
            data_consistency(np.zeros((4, 4, 3)), observation)


class TestBilinear:
    @pytest.mark.parametrize("kind", PATTERN_KINDS)
    def test_constant_colour_is_exact(self, kind):
        x = np.empty((12, 12, 3))
        x[...] = [200.0, 120.0, 40.0]
        out = bilinear_demosaick(mosaic(x, make_pattern(kind)))
        assert psnr(out, x) == float("inf")

    def test_green_at_red_is_axial_mean(self, rng):
        x = rng.uniform(0, 255, size=(6, 6, 3))
        out = bilinear_demosaick(mosaic(x, make_pattern("bayer_rggb")))
        expected = (x[1, 2, G] + x[3, 2, G] + x[2, 1, G] + x[2, 3, G]) / 4
        assert out[2, 2, G] == pytest.approx(expected)

    @pytest.mark.parametrize("kind", ["bayer_rggb", "bayer_grbg", "bayer_gbrg", "bayer_bggr"])
    def test_linear_ramp_interior(self, kind):
        hh, ww = np.mgrid[0:10, 0:12].astype(np.float64)
        x = np.stack([10 + 3 * hh + 2 * ww, 50 + hh - ww, 100 + 0.5 * hh + 4 * ww], axis=2)
        out = bilinear_demosaick(mosaic(x, make_pattern(kind)))
        np.testing.assert_allclose(out[2:-2, 2:-2], x[2:-2, 2:-2], atol=1e-9)

    @pytest.mark.parametrize("kind", PATTERN_KINDS)
    def test_keeps_samples(self, kind, rng):
        y = mosaic(rng.uniform(0, 255, size=(12, 12, 3)), make_pattern(kind))
        out = bilinear_demosaick(y)
        m = y.mask() > 0
        np.testing.assert_array_equal(out[m], y.data[m])
