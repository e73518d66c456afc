"""Tests for settings, validation helpers, metrics and gradient checking."""

import numpy as np
import pytest
from pydantic import ValidationError

from polarsep.config.settings import get_settings, reset_settings
from polarsep.utils.gradcheck import finite_difference_gradient, max_relative_error
from polarsep.utils.metrics import write_metrics
from polarsep.utils.validation import (
    DimensionError,
    ImageValidator,
    ParameterError,
    PolarsepError,
    RangeError,
    SolverError,
    require_binary,
    require_interval,
    require_mosaic,
    require_pattern,
    require_stack,
    require_unit_interval,
)


class TestSettings:
    def test_defaults(self):
        settings = get_settings()
        assert settings.WORKERS == 1
        assert settings.LOG_LEVEL == "INFO"

    def test_singleton_until_reset(self, monkeypatch):
        first = get_settings()
        monkeypatch.setenv("POLARSEP_WORKERS", "3")
        assert get_settings() is first
        reset_settings()
        assert get_settings().WORKERS == 3

    def test_level_is_normalized(self, monkeypatch):
        monkeypatch.setenv("POLARSEP_LOG_LEVEL", "debug")
        assert get_settings().LOG_LEVEL == "DEBUG"

    def test_invalid_values(self, monkeypatch):
        monkeypatch.setenv("POLARSEP_LOG_LEVEL", "chatty")
        with pytest.raises(ValidationError):
            get_settings()


class TestImageValidator:
    def setup_method(self):
        self.validator = ImageValidator()

    def test_valid_mosaic(self):
        valid, errors = self.validator.validate_mosaic(np.zeros((4, 6)), 12)
        assert valid and errors == []

    def test_collects_every_error(self):
        valid, errors = self.validator.validate_mosaic(np.full((3, 5), 5000), 12)
        assert not valid
        assert len(errors) == 2

    def test_pattern_bijection(self):
        assert self.validator.validate_pattern(((0, 45), (135, 90)))[0]
        valid, error = self.validator.validate_pattern(((0, 45), (45, 90)))
        assert not valid and "bijection" in error


class TestRequire:
    def test_error_hierarchy(self):
        for cls in (DimensionError, RangeError, ParameterError, SolverError):
            assert issubclass(cls, PolarsepError)
            assert not issubclass(cls, ValueError)

    def test_mosaic_errors_are_typed(self):
        with pytest.raises(DimensionError):
            require_mosaic(np.zeros((3, 4)), 12)
        with pytest.raises(RangeError):
            require_mosaic(np.full((2, 2), 4096), 12)
        with pytest.raises(ParameterError):
            require_mosaic(np.zeros((2, 2)), 20)

    def test_pattern(self):
        with pytest.raises(ParameterError):
            require_pattern(((0, 45), (90,)))

    def test_stack(self):
        with pytest.raises(DimensionError):
            require_stack(np.zeros((3, 2, 2)), linear=True)
        with pytest.raises(RangeError):
            require_stack(-np.ones((4, 2, 2)), linear=True)
        require_stack(-np.ones((4, 2, 2)), linear=False)

    def test_interval_bounds(self):
        assert require_interval("x", 0.0, low=0.0) == 0.0
        with pytest.raises(ParameterError, match=r"x must be in \(0.0"):
            require_interval("x", 0.0, low=0.0, low_open=True)
        with pytest.raises(ParameterError):
            require_interval("x", 1.0, high=1.0, high_open=True)
        with pytest.raises(ParameterError, match="finite"):
            require_interval("x", float("nan"))

    def test_unit_interval_and_binary(self):
        require_unit_interval("rho", np.array([0.0, 0.5, 1.0]))
        with pytest.raises(ParameterError):
            require_unit_interval("rho", 1.01)
        require_binary("mask", np.array([0, 1, 1]))
        with pytest.raises(ParameterError):
            require_binary("mask", np.array([0, 2]))

    def test_solver_error_payload(self):
        err = SolverError("boom", iterate=np.zeros(2), trace=(3.0, 2.0))
        assert err.trace == [3.0, 2.0]
        assert err.partial is None
        assert SolverError("plain").trace == []


class TestGradcheck:
    def test_quadratic(self, rng):
        x = rng.normal(size=(3, 4))
        numeric = finite_difference_gradient(lambda v: float(np.sum(v**2)), x)
        assert max_relative_error(2 * x, numeric) < 1e-8

    def test_input_not_modified(self):
        x = np.arange(4.0)
        finite_difference_gradient(lambda v: float(v.sum()), x)
        np.testing.assert_array_equal(x, np.arange(4.0))

    def test_vanishing_reference_uses_absolute_error(self):
        assert max_relative_error(np.full(3, 1e-3), np.zeros(3)) == pytest.approx(1e-3)


def test_metrics_textfile(tmp_path):
    path = tmp_path / "metrics.prom"
    write_metrics(path)
    text = path.read_text()
    assert "polarsep_solver_iterations_total" in text
    assert "polarsep_separation_duration_seconds" in text
