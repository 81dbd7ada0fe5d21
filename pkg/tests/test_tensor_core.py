import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mmdemosaick.errors import ArgumentError, DimensionError, ShapeError
from mmdemosaick.gradcheck import OP_TOLERANCE, check_ops
from mmdemosaick.tensor_core import (
    FilterBank,
    adjoint_of,
    as_image,
    clip,
    conv2d,
    conv_transpose2d,
    prelu,
    reflexive_pad,
)


def naive_conv2d(x, weights, bias):
    o, c, kh, kw = weights.shape
    xp = np.pad(x, ((kh // 2, kh // 2), (kw // 2, kw // 2), (0, 0)), mode="reflect")
    out = np.zeros(x.shape[:2] + (o,))
    for h in range(x.shape[0]):
        for w in range(x.shape[1]):
            for oc in range(o):
                total = bias[oc]
                for ic in range(c):
                    for i in range(kh):
                        for j in range(kw):
                            total += xp[h + i, w + j, ic] * weights[oc, ic, i, j]
                out[h, w, oc] = total
    return out


class TestAsImage:
    def test_promotes_2d_to_single_channel(self):
        img = as_image(np.arange(6).reshape(2, 3))
        assert img.shape == (2, 3, 1)
        assert img.dtype == np.float64

    def test_rejects_1d(self):
        with pytest.raises(ShapeError):
            as_image(np.arange(3))


class TestReflexivePad:
    def test_row_reflects_without_repeating_edge(self):
        x = np.array([[1.0, 2.0, 3.0]])
        out = reflexive_pad(x, 1)[:, :, 0]
        np.testing.assert_array_equal(out, np.tile([2.0, 1.0, 2.0, 3.0, 2.0], (3, 1)))

    def test_constant_stays_constant(self):
        out = reflexive_pad(np.full((4, 4, 2), 7.0), 2)
        assert out.shape == (8, 8, 2)
        assert np.all(out == 7.0)

    def test_zero_pad_is_identity(self, rng):
        x = rng.normal(size=(3, 4, 2))
        np.testing.assert_array_equal(reflexive_pad(x, 0), x)

    def test_pad_too_large(self):
        with pytest.raises(DimensionError):
            reflexive_pad(np.zeros((3, 3, 1)), 3)


class TestConv2d:
    def test_constant_input_zero_mean_kernel(self, rng):
        w = rng.normal(size=(2, 3, 3, 3))
        w -= w.mean(axis=(1, 2, 3), keepdims=True)
        out = conv2d(np.full((5, 5, 3), 42.0), FilterBank(w, np.zeros(2)))
        np.testing.assert_allclose(out, 0.0, atol=1e-12)

    def test_single_pixel_average(self):
        out = conv2d(np.array([[[5.0]]]), FilterBank(np.full((1, 1, 3, 3), 1 / 9), np.zeros(1)))
        np.testing.assert_allclose(out, [[[5.0]]])

    def test_matches_direct_summation(self, rng):
        x = rng.normal(size=(4, 4, 2))
        w = rng.normal(size=(3, 2, 3, 3))
        b = rng.normal(size=3)
        np.testing.assert_allclose(conv2d(x, FilterBank(w, b)), naive_conv2d(x, w, b), rtol=1e-12, atol=1e-12)

    def test_same_size_and_pure(self, rng):
        x = rng.normal(size=(6, 5, 3))
        bank = FilterBank(rng.normal(size=(4, 3, 5, 5)))
        first, second = conv2d(x, bank), conv2d(x, bank)
        assert first.shape == (6, 5, 4)
        np.testing.assert_array_equal(first, second)

    @pytest.mark.parametrize("shape", [(1, 6), (2, 6), (3, 6), (6, 2), (2, 2)])
    def test_thin_input_reflects_repeatedly(self, rng, shape):
        x = rng.normal(size=shape + (2,))
        w = rng.normal(size=(3, 2, 5, 5))
        b = rng.normal(size=3)
        np.testing.assert_allclose(conv2d(x, FilterBank(w, b)), naive_conv2d(x, w, b), rtol=1e-12, atol=1e-12)

    def test_channel_mismatch(self, rng):
        with pytest.raises(ShapeError):
            conv2d(np.zeros((4, 4, 2)), FilterBank(rng.normal(size=(1, 3, 3, 3))))

    def test_even_kernel_rejected(self):
        with pytest.raises(ShapeError):
            FilterBank(np.zeros((1, 1, 2, 2)))


class TestConvTranspose2d:
    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), h=st.integers(3, 7), w=st.integers(3, 7),
           k=st.sampled_from([1, 3, 5]))
    def test_adjoint_identity(self, seed, h, w, k):
        rng = np.random.default_rng(seed)
        bank = FilterBank(rng.normal(size=(3, 2, k, k)))
        a = rng.normal(size=(h, w, 2))
        b = rng.normal(size=(h, w, 3))
        lhs = float((conv2d(a, bank) * b).sum())
        rhs = float((a * conv_transpose2d(b, bank)).sum())
        assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-10)

    @pytest.mark.parametrize("shape", [(1, 5), (2, 5), (2, 2), (5, 2)])
    def test_adjoint_identity_on_thin_inputs(self, rng, shape):
        bank = FilterBank(rng.normal(size=(3, 2, 5, 5)))
        a = rng.normal(size=shape + (2,))
        b = rng.normal(size=shape + (3,))
        lhs = float((conv2d(a, bank) * b).sum())
        rhs = float((a * conv_transpose2d(b, bank)).sum())
        assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-10)

    def test_zero_input(self, rng):
        bank = FilterBank(rng.normal(size=(3, 2, 3, 3)), np.zeros(2))
        assert np.all(conv_transpose2d(np.zeros((4, 4, 3)), bank) == 0)

    def test_pointwise_kernel_mixes_channels(self, rng):
        w = rng.normal(size=(3, 2, 1, 1))
        x = rng.normal(size=(4, 5, 3))
        np.testing.assert_allclose(conv_transpose2d(x, FilterBank(w)), x @ w[:, :, 0, 0])


class TestPointwise:
    def test_prelu_branches(self):
        x = np.array([[[3.0], [-2.0]]])
        np.testing.assert_allclose(prelu(x, np.array([0.25])), [[[3.0], [-0.5]]])

    def test_prelu_unit_slope_is_identity(self, rng):
        x = rng.normal(size=(3, 3, 2))
        np.testing.assert_array_equal(prelu(x, np.ones(2)), x)

    def test_clip(self):
        out = clip(np.array([[[300.0], [-4.0], [128.0]]]), 0, 255)
        np.testing.assert_array_equal(out[:, :, 0], [[255.0, 0.0, 128.0]])

    def test_clip_needs_ordered_range(self):
        with pytest.raises(ArgumentError):
            clip(np.zeros((1, 1, 1)), 5, 5)


class TestAdjointOf:
    def test_clip_gradient_saturated(self):
        g = adjoint_of("clip", np.ones((1, 2, 1)), {"input": np.array([[[300.0], [255.0]]]), "lo": 0, "hi": 255})
        assert np.all(g["input"] == 0)

    def test_prelu_slope_gradient_positive_input(self, rng):
        x = rng.uniform(0.1, 1.0, size=(3, 3, 2))
        g = adjoint_of("prelu", rng.normal(size=x.shape), {"input": x, "slopes": np.full(2, 0.25)})
        assert np.all(g["slopes"] == 0)

    def test_unknown_op(self):
        with pytest.raises(ArgumentError):
            adjoint_of("softmax", np.zeros((1, 1, 1)), {"input": np.zeros((1, 1, 1))})

    def test_missing_cache_entry(self):
        with pytest.raises(ShapeError):
            adjoint_of("conv2d", np.zeros((2, 2, 1)), {"input": np.zeros((2, 2, 1))})

    def test_finite_differences(self):
        rows = check_ops(seed=7)
        assert rows
        for row in rows:
            assert row["rel_error"] < OP_TOLERANCE, row
