"""Tests for image quality metrics and the synthetic benchmark."""

import math
import warnings

import numpy as np
import pytest
from skimage.metrics import peak_signal_noise_ratio

from polarsep.models.losses import FeaturePyramidSpec
from polarsep.models.separation import SeparatorConfig
from polarsep.services.evaluation import baseline_rescaled_input, evaluate_instance, psnr, run_benchmark, ssim
from polarsep.utils.validation import DimensionError

FAST = SeparatorConfig(max_iters=60, pyramid=FeaturePyramidSpec.from_factors([2, 4]))


class TestMetrics:
    def test_psnr_identical_is_infinite(self, rng):
        x = rng.random((8, 8))
        assert psnr(x, x) == math.inf

    def test_psnr_known_value(self):
        reference = np.zeros((4, 4))
        estimate = np.ones((4, 4))
        assert psnr(estimate, reference, data_range=10.0) == pytest.approx(20.0)

    def test_psnr_default_range_from_reference(self):
        reference = np.array([[0.0, 100.0], [0.0, 100.0]])
        estimate = reference + 10.0
        assert psnr(estimate, reference) == pytest.approx(20.0)

    def test_psnr_agrees_with_skimage(self, rng):
        reference = rng.uniform(0, 4095, (16, 16))
        estimate = reference + rng.normal(0, 20, (16, 16))
        expected = peak_signal_noise_ratio(reference, estimate, data_range=8190.0)
        assert psnr(estimate, reference, data_range=8190.0) == pytest.approx(expected)

    def test_psnr_identical_without_warnings(self, rng):
        x = rng.random((8, 8))
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            assert psnr(x, x.copy(), data_range=1.0) == math.inf

    def test_psnr_shape_mismatch(self):
        with pytest.raises(DimensionError):
            psnr(np.zeros((4, 4)), np.zeros((4, 5)))

    def test_ssim_identical_is_one(self, rng):
        x = rng.random((16, 16))
        assert ssim(x, x) == pytest.approx(1.0)

    def test_ssim_drops_with_noise(self, rng):
        x = rng.random((32, 32))
        noisy = x + rng.normal(0, 0.3, size=x.shape)
        assert ssim(noisy, x, data_range=1.0) < 0.9


class TestBaseline:
    def test_matches_transmission_mean(self, rng):
        m = rng.uniform(10, 20, size=(8, 8))
        t = rng.uniform(0, 5, size=(8, 8))
        out = baseline_rescaled_input(m, t)
        assert out.mean() == pytest.approx(t.mean())
        np.testing.assert_allclose(out / m, t.mean() / m.mean())

    def test_dark_input_gives_zeros(self):
        out = baseline_rescaled_input(np.zeros((3, 3)), np.ones((3, 3)))
        assert not out.any()


class TestBenchmark:
    def test_instance_row(self):
        row = evaluate_instance(3, size=32, cfg=FAST)
        assert set(row) == {
            "seed",
            "theta_deg",
            "rho_r",
            "psnr_separated",
            "psnr_baseline",
            "ssim_separated",
            "ssim_baseline",
            "converged",
            "monotone",
        }
        assert row["seed"] == 3
        assert 50.0 <= row["theta_deg"] <= 70.0
        assert 0.0 < row["rho_r"] <= 1.0
        assert np.isfinite(row["psnr_separated"])
        assert row["monotone"]

    def test_instance_is_deterministic(self):
        a = evaluate_instance(4, size=32, cfg=FAST)
        b = evaluate_instance(4, size=32, cfg=FAST)
        assert a == b

    def test_run_benchmark_rows(self):
        frame = run_benchmark(count=2, size=32, seed=5, cfg=FAST)
        assert list(frame["seed"]) == [5, 6]
        assert frame["monotone"].all()
