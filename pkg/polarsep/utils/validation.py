"""
Image and Parameter Validation Utilities

Validates arrays and scalar parameters before they enter the polarization
pipeline, so that shape, range and domain mistakes surface as typed errors
at the boundary instead of as silent NaNs deep inside a solver.
"""

import logging
from typing import Any, List, Optional, Sequence, Tuple

import numpy as np

logger = logging.getLogger(__name__)


class PolarsepError(Exception):
    """Base class for all toolkit errors."""
    pass


class DimensionError(PolarsepError):
    """Raised when array shapes are odd, mismatched or too small."""
    pass


class RangeError(PolarsepError):
    """Raised when sample values fall outside the representable range."""
    pass


class DomainError(PolarsepError):
    """Raised when linear-only arithmetic is applied to gamma-encoded data."""
    pass


class ParameterError(PolarsepError):
    """Raised when a scalar parameter is outside its valid interval."""
    pass


class FormatError(PolarsepError):
    """Raised when a file cannot be decoded or encoded."""
    pass


class SolverError(PolarsepError):
    """
    Raised when an optimization stage produces a non-finite objective.

    Args:
        message: Human readable description
        iterate: Last iterate the solver evaluated
        trace: Objective values accepted before the failure
        partial: Optional partial result assembled by the caller
    """

    def __init__(
        self,
        message: str,
        iterate: Optional[np.ndarray] = None,
        trace: Optional[Sequence[float]] = None,
        partial: Any = None,
    ):
        super().__init__(message)
        self.iterate = iterate
        self.trace = list(trace) if trace is not None else []
        self.partial = partial


class ImageValidator:
    """
    Validates image arrays against the constraints of the sensor pipeline.

    Methods return ``(is_valid, errors)`` so callers can collect every
    problem at once; the module-level ``require_*`` helpers raise instead.
    """

    DEFAULT_BIT_DEPTH = 12
    MAX_BIT_DEPTH = 16
    ANGLES_DEG = (0, 45, 90, 135)

    def validate_mosaic(
        self,
        data: np.ndarray,
        bit_depth: int = DEFAULT_BIT_DEPTH,
    ) -> Tuple[bool, List[str]]:
        """
        Validate a raw sensor mosaic.

        Args:
            data: 2-D array of raw samples
            bit_depth: Sensor bit depth

        Returns:
            Tuple of (is_valid, list_of_errors)
        """
        errors = []
        if data.ndim != 2:
            return False, [f"mosaic must be 2-D (got {data.ndim}-D)"]

        height, width = data.shape
        if height % 2 or width % 2:
            errors.append(f"mosaic dimensions must be even (got {height}x{width})")

        if not 1 <= bit_depth <= self.MAX_BIT_DEPTH:
            errors.append(f"bit_depth must be in [1, {self.MAX_BIT_DEPTH}] (got {bit_depth})")
        elif data.size:
            ceiling = 2**bit_depth - 1
            low, high = data.min(), data.max()
            if low < 0 or high > ceiling:
                errors.append(f"mosaic samples must lie in [0, {ceiling}] (got [{low}, {high}])")

        return len(errors) == 0, errors

    def validate_pattern(self, pattern: Sequence[Sequence[int]]) -> Tuple[bool, Optional[str]]:
        """Check that a 2x2 pattern assigns each polarizer angle exactly once."""
        try:
            if len(pattern) != 2 or any(len(row) != 2 for row in pattern):
                return False, "pattern must be a 2x2 grid of angles"
            cells = [int(pattern[r][c]) for r in range(2) for c in range(2)]
        except (TypeError, ValueError):
            return False, "pattern must be a 2x2 grid of angles"
        if sorted(cells) != sorted(self.ANGLES_DEG):
            return False, f"pattern must be a bijection onto {self.ANGLES_DEG} (got {cells})"
        return True, None

    def validate_stack(self, channels: np.ndarray, linear: bool) -> Tuple[bool, List[str]]:
        """
        Validate a four-channel polarized stack.

        Args:
            channels: Array of shape (4, H, W)
            linear: Whether the stack is tagged linear_raw

        Returns:
            Tuple of (is_valid, list_of_errors)
        """
        if channels.ndim != 3 or channels.shape[0] != 4:
            return False, [f"stack must have shape (4, H, W) (got {channels.shape})"]
        errors = []
        if not np.all(np.isfinite(channels)):
            errors.append("stack contains non-finite values")
        elif linear and channels.size and channels.min() < 0:
            errors.append(f"linear_raw stack has negative values (min {channels.min()})")
        return len(errors) == 0, errors


_validator = ImageValidator()


def require_same_shape(*arrays: np.ndarray, what: str = "inputs") -> None:
    """Raise DimensionError unless all arrays share one shape."""
    shapes = {np.shape(a) for a in arrays}
    if len(shapes) > 1:
        raise DimensionError(f"{what} must share a shape (got {sorted(shapes)})")


def require_mosaic(data: np.ndarray, bit_depth: int) -> None:
    """Raise DimensionError or RangeError for an invalid mosaic."""
    valid, errors = _validator.validate_mosaic(data, bit_depth)
    if valid:
        return
    message = "; ".join(errors)
    if data.ndim != 2 or any("even" in e for e in errors):
        raise DimensionError(message)
    if any("bit_depth" in e for e in errors):
        raise ParameterError(message)
    raise RangeError(message)


def require_pattern(pattern: Sequence[Sequence[int]]) -> None:
    """Raise ParameterError unless the pattern is a bijection onto the four angles."""
    valid, error = _validator.validate_pattern(pattern)
    if not valid:
        raise ParameterError(error)


def require_stack(channels: np.ndarray, linear: bool) -> None:
    """Raise DimensionError or RangeError for an invalid stack."""
    valid, errors = _validator.validate_stack(channels, linear)
    if valid:
        return
    message = "; ".join(errors)
    if channels.ndim != 3 or channels.shape[0] != 4:
        raise DimensionError(message)
    raise RangeError(message)


def require_interval(
    name: str,
    value: float,
    low: Optional[float] = None,
    high: Optional[float] = None,
    low_open: bool = False,
    high_open: bool = False,
) -> float:
    """
    Raise ParameterError unless ``value`` lies in the given interval.

    Args:
        name: Parameter name for the error message
        value: Value to check
        low: Lower bound, or None for unbounded
        high: Upper bound, or None for unbounded
        low_open: Exclude the lower bound
        high_open: Exclude the upper bound

    Returns:
        The value as a float
    """
    value = float(value)
    if not np.isfinite(value):
        raise ParameterError(f"{name} must be finite (got {value})")
    if low is not None and (value < low or (low_open and value == low)):
        bracket = "(" if low_open else "["
        raise ParameterError(f"{name} must be in {bracket}{low}, {high if high is not None else 'inf'} (got {value})")
    if high is not None and (value > high or (high_open and value == high)):
        bracket = ")" if high_open else "]"
        raise ParameterError(f"{name} must be in [{low if low is not None else '-inf'}, {high}{bracket} (got {value})")
    return value


def require_unit_interval(name: str, values: Any) -> None:
    """Raise ParameterError unless every value lies in [0, 1]."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.size and (not np.all(np.isfinite(arr)) or arr.min() < 0.0 or arr.max() > 1.0):
        raise ParameterError(f"{name} must lie in [0, 1] (got [{arr.min()}, {arr.max()}])")


def require_binary(name: str, values: np.ndarray) -> None:
    """Raise ParameterError unless every value is 0 or 1."""
    arr = np.asarray(values)
    if not np.all((arr == 0) | (arr == 1)):
        raise ParameterError(f"{name} must be binary (values in {{0, 1}})")
