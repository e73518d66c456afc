"""
Loss Data Models

Schemas describing the fixed linear feature pyramid and loss values with
their gradients.
"""

from typing import Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator, model_validator

from polarsep.utils.validation import DimensionError, ParameterError

FILTER_BANK: Tuple[str, ...] = ("gaussian", "dx", "dy")


class PyramidLevelSpec(BaseModel):
    """One pyramid level: a decimation factor and the filters applied before it."""

    model_config = ConfigDict(frozen=True)

    factor: int
    filters: Tuple[str, ...] = FILTER_BANK

    @model_validator(mode="after")
    def _check(self) -> "PyramidLevelSpec":
        if self.factor < 1:
            raise ParameterError(f"downsample factor must be >= 1 (got {self.factor})")
        if not self.filters:
            raise ParameterError("a pyramid level needs at least one filter")
        unknown = [f for f in self.filters if f not in FILTER_BANK]
        if unknown:
            raise ParameterError(f"unknown filters {unknown}; available: {FILTER_BANK}")
        return self


class FeaturePyramidSpec(BaseModel):
    """Ordered pyramid levels with strictly increasing decimation factors."""

    model_config = ConfigDict(frozen=True)

    levels: Tuple[PyramidLevelSpec, ...] = (
        PyramidLevelSpec(factor=2),
        PyramidLevelSpec(factor=4),
        PyramidLevelSpec(factor=8),
    )

    @model_validator(mode="after")
    def _check(self) -> "FeaturePyramidSpec":
        if not self.levels:
            raise ParameterError("a feature pyramid needs at least one level")
        factors = [level.factor for level in self.levels]
        if any(b <= a for a, b in zip(factors, factors[1:])):
            raise ParameterError(f"downsample factors must be strictly increasing (got {factors})")
        return self

    @classmethod
    def from_factors(cls, factors, filters: Tuple[str, ...] = FILTER_BANK) -> "FeaturePyramidSpec":
        return cls(levels=tuple(PyramidLevelSpec(factor=int(f), filters=filters) for f in factors))

    @property
    def min_size(self) -> int:
        return max(level.factor for level in self.levels)


class LossValueWithGrad(BaseModel):
    """
    Scalar loss with gradients with respect to both inputs.

    ``per_level`` holds the contribution of each pyramid level when the loss
    is built on a feature pyramid.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    value: float
    grad_a: np.ndarray
    grad_b: np.ndarray
    per_level: Tuple[float, ...] = ()

    @field_validator("grad_a", "grad_b", mode="before")
    @classmethod
    def _coerce(cls, value) -> np.ndarray:
        return np.asarray(value, dtype=np.float64)

    @model_validator(mode="after")
    def _check(self) -> "LossValueWithGrad":
        if not np.isfinite(self.value):
            raise ParameterError(f"loss value must be finite (got {self.value})")
        if self.grad_a.shape != self.grad_b.shape:
            raise DimensionError(f"gradient shapes differ: {self.grad_a.shape} vs {self.grad_b.shape}")
        return self
