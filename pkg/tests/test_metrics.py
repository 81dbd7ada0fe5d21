import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mmdemosaick.errors import ShapeError
from mmdemosaick.metrics import SRGB_KNEE, linrgb_to_srgb, psnr


class TestPsnr:
    def test_identical(self, clean_image):
        assert psnr(clean_image, clean_image) == float("inf")

    def test_unit_error(self):
        a = np.zeros((4, 4, 3))
        assert psnr(a, a + 1.0) == pytest.approx(48.1308, abs=1e-4)

    def test_full_scale_error(self):
        a = np.zeros((4, 4, 3))
        assert psnr(a, a + 255.0) == pytest.approx(0.0, abs=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_symmetric(self, seed):
        rng = np.random.default_rng(seed)
        a, b = rng.uniform(0, 255, size=(2, 5, 5, 3))
        assert psnr(a, b) == psnr(b, a)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            psnr(np.zeros((2, 2, 3)), np.zeros((2, 3, 3)))


class TestSrgb:
    def test_endpoints(self):
        np.testing.assert_allclose(linrgb_to_srgb(np.array([0.0, 255.0])), [0.0, 255.0])

    def test_knee(self):
        below = linrgb_to_srgb(np.array([SRGB_KNEE * 255])) / 255
        above = 1.055 * SRGB_KNEE ** (1 / 2.4) - 0.055
        assert below[0] == pytest.approx(0.0404499, abs=1e-7)
        assert below[0] == pytest.approx(above, abs=1e-7)

    def test_mid_grey(self):
        assert linrgb_to_srgb(np.array([0.18 * 255]))[0] / 255 == pytest.approx(0.46138, abs=1e-4)

    def test_strictly_monotone(self):
        u = np.linspace(0, 255, 20001)
        assert np.all(np.diff(linrgb_to_srgb(u)) > 0)

    def test_clips_out_of_range(self):
        np.testing.assert_array_equal(linrgb_to_srgb(np.array([-10.0, 300.0])), [0.0, 255.0])
