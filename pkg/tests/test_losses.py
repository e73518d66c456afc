"""Tests for NCC, PNCC and the masked perceptual loss."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from polarsep.models.losses import FeaturePyramidSpec
from polarsep.services.losses import (
    DEFAULT_ALPHAS,
    default_level_weights,
    masked_perceptual,
    ncc,
    normalize01,
    pncc,
    pncc_curve,
    positive_pncc,
)
from polarsep.services.synthesis import random_texture
from polarsep.utils.gradcheck import finite_difference_gradient, max_relative_error
from polarsep.utils.validation import DimensionError, ParameterError

GRAD_TOLERANCE = 1e-4


def _extremes(*images):
    """Boolean mask of pixels holding the min or max of any image."""
    mask = np.zeros(images[0].shape, dtype=bool)
    for img in images:
        mask |= (img == img.min()) | (img == img.max())
    return mask


class TestNormalize:

    def test_two_values(self):
        np.testing.assert_array_equal(normalize01(np.array([2.0, 4.0])), [0.0, 1.0])

    def test_constant(self):
        np.testing.assert_array_equal(normalize01(np.full((3, 3), 5.0)), 0.0)

    @given(arrays(np.float64, 12, elements=st.floats(-1e3, 1e3).map(lambda v: round(v, 3))))
    def test_range(self, values):
        if values.min() == values.max():
            return
        out = normalize01(values)
        assert out.min() == 0.0
        assert out.max() == pytest.approx(1.0)


class TestNCC:

    def test_self_correlation(self, rng):
        x = rng.random((8, 8))
        assert ncc(x, x) == pytest.approx(1.0, abs=1e-6)
        assert ncc(x, -x) == pytest.approx(-1.0, abs=1e-6)

    @settings(deadline=None)
    @given(st.floats(0.1, 10.0), st.floats(-5.0, 5.0))
    def test_affine_invariance(self, a, b):
        x = np.random.default_rng(3).random((8, 8))
        assert ncc(x, a * x + b) == pytest.approx(1.0, abs=1e-6)

    def test_symmetric(self, rng):
        x, y = rng.random((2, 6, 6))
        assert ncc(x, y) == ncc(y, x)

    def test_bounded(self, rng):
        for _ in range(20):
            x, y = rng.normal(size=(2, 5, 5))
            assert -1.0 <= ncc(x, y) <= 1.0

    def test_constant_input(self, rng):
        assert ncc(np.ones((4, 4)), rng.random((4, 4))) == 0.0

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            ncc(np.zeros((2, 3)), np.zeros((3, 2)))

    def test_single_element_rejected(self):
        with pytest.raises(DimensionError):
            ncc(np.ones(1), np.ones(1))

    def test_gradient(self, rng):
        x, y = rng.random((2, 10, 10))
        result = ncc(x, y, with_grad=True)
        numeric_x = finite_difference_gradient(lambda v: ncc(v, y), x)
        numeric_y = finite_difference_gradient(lambda v: ncc(x, v), y)
        assert max_relative_error(result.grad_a, numeric_x) < GRAD_TOLERANCE
        assert max_relative_error(result.grad_b, numeric_y) < GRAD_TOLERANCE


class TestPNCC:

    def test_identical_images(self, rng):
        x = rng.random((16, 16))
        result = pncc(x, x)
        assert result.value == pytest.approx(3.0, abs=1e-4)
        assert len(result.per_level) == 3

    def test_gradient_without_normalization(self, rng):
        a, b = rng.random((2, 16, 16))
        result = pncc(a, b, normalize=False)
        numeric_a = finite_difference_gradient(lambda v: pncc(v, b, normalize=False).value, a)
        numeric_b = finite_difference_gradient(lambda v: pncc(a, v, normalize=False).value, b)
        assert max_relative_error(result.grad_a, numeric_a) < GRAD_TOLERANCE
        assert max_relative_error(result.grad_b, numeric_b) < GRAD_TOLERANCE

    def test_gradient_with_normalization_away_from_extremes(self, rng):
        a = rng.random((16, 16)) * 3.0 + 1.0
        b = rng.random((16, 16)) * 0.5
        result = pncc(a, b)
        numeric = finite_difference_gradient(lambda v: pncc(v, b).value, a)
        keep = ~_extremes(a)
        assert max_relative_error(result.grad_a[keep], numeric[keep]) < GRAD_TOLERANCE

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            pncc(np.zeros((16, 16)), np.zeros((16, 8)))

    def test_too_small(self):
        with pytest.raises(DimensionError):
            pncc(np.zeros((4, 4)), np.zeros((4, 4)))

    def test_monotone_in_mixing(self):
        rng = np.random.default_rng(2024)
        decreasing = 0
        steps = 0
        for _ in range(20):
            R = random_texture((128, 128), rng)
            T = random_texture((128, 128), rng)
            values = pncc_curve(R, T)["pncc"].to_numpy()
            diffs = np.diff(values)
            decreasing += int(np.sum(diffs < 0))
            steps += len(diffs)
            assert values[0] > values[-1]
        assert decreasing / steps >= 0.95


class TestPositivePNCC:

    def test_identical_images(self, rng):
        x = rng.random((16, 16))
        assert positive_pncc(x, x).value == pytest.approx(3.0, abs=1e-3)

    def test_anti_correlated_pair_is_free(self, rng):
        x = rng.random((16, 16))
        result = positive_pncc(x, 1.0 - x)
        assert pncc(x, 1.0 - x).value == pytest.approx(-3.0, abs=1e-3)
        assert result.value == 0.0
        np.testing.assert_array_equal(result.grad_a, 0.0)
        np.testing.assert_array_equal(result.grad_b, 0.0)

    def test_never_negative(self, rng):
        for _ in range(10):
            a, b = rng.random((2, 16, 16))
            assert positive_pncc(a, b).value >= 0.0

    def test_gradient(self, rng):
        a, b = rng.random((2, 16, 16))
        result = positive_pncc(a, b, normalize=False)
        numeric_a = finite_difference_gradient(lambda v: positive_pncc(v, b, normalize=False).value, a)
        numeric_b = finite_difference_gradient(lambda v: positive_pncc(a, v, normalize=False).value, b)
        assert max_relative_error(result.grad_a, numeric_a) < GRAD_TOLERANCE
        assert max_relative_error(result.grad_b, numeric_b) < GRAD_TOLERANCE


class TestPNCCCurve:

    def test_default_grid(self):
        assert DEFAULT_ALPHAS[0] == 0.01
        assert DEFAULT_ALPHAS[-1] == 1.0
        assert len(DEFAULT_ALPHAS) == 21

    def test_columns(self, rng):
        R, T = rng.random((2, 16, 16))
        curve = pncc_curve(R, T, alphas=[0.25, 0.5], normalize=False)
        assert list(curve.columns) == ["alpha", "pncc"]
        assert curve["alpha"].tolist() == [0.25, 0.5]

    @pytest.mark.parametrize("alpha", [0.0, 1.5])
    def test_rejects_alpha_outside_unit_interval(self, rng, alpha):
        R, T = rng.random((2, 16, 16))
        with pytest.raises(ParameterError):
            pncc_curve(R, T, alphas=[alpha])


class TestMaskedPerceptual:

    def test_identical_is_zero(self, rng):
        T = rng.random((16, 16))
        assert masked_perceptual(T, T, np.ones((16, 16))).value == 0.0

    def test_fully_masked_is_zero(self, rng):
        T, T_hat = rng.random((2, 16, 16))
        result = masked_perceptual(T, T_hat, np.zeros((16, 16)))
        assert result.value == 0.0
        assert not np.any(result.grad_b)

    def test_default_weights(self):
        weights = default_level_weights(FeaturePyramidSpec(), (16, 16))
        assert weights == [1 / (3 * 64), 1 / (3 * 16), 1 / (3 * 4)]

    def test_gradient(self, rng):
        T, T_hat = rng.random((2, 16, 16))
        O = (rng.random((16, 16)) > 0.2).astype(np.uint8)
        result = masked_perceptual(T, T_hat, O)
        numeric = finite_difference_gradient(lambda v: masked_perceptual(T, v, O).value, T_hat, eps=1e-6)
        assert max_relative_error(result.grad_b, numeric) < GRAD_TOLERANCE
        np.testing.assert_array_equal(result.grad_a, -result.grad_b)

    def test_non_binary_mask_rejected(self, rng):
        T = rng.random((16, 16))
        with pytest.raises(ParameterError):
            masked_perceptual(T, T, np.full((16, 16), 0.5))

    def test_weight_count_checked(self, rng):
        T = rng.random((16, 16))
        with pytest.raises(ParameterError):
            masked_perceptual(T, T, np.ones((16, 16)), beta=[1.0])
