"""
Polarization Data Models

Pydantic schemas for raw sensor mosaics, four-angle polarized stacks,
Stokes maps and light states. Arrays are copied on construction and
frozen, so model instances can be shared across workers.
"""

import math
from typing import Literal, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator, model_validator

from polarsep.utils.validation import (
    DimensionError,
    RangeError,
    require_mosaic,
    require_pattern,
    require_stack,
    require_unit_interval,
)

ANGLES_DEG: Tuple[int, int, int, int] = (0, 45, 90, 135)
ANGLES_RAD: Tuple[float, float, float, float] = tuple(math.radians(a) for a in ANGLES_DEG)

MosaicPattern = Tuple[Tuple[int, int], Tuple[int, int]]
DEFAULT_PATTERN: MosaicPattern = ((0, 45), (90, 135))

Domain = Literal["linear_raw", "gamma"]
ArrayLike = Union[float, np.ndarray]


def _frozen(values, dtype) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


class RawMosaic(BaseModel):
    """Single-plane sensor image carrying a 2x2 polarizer pattern."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    data: np.ndarray
    bit_depth: int = 12
    pattern: MosaicPattern = DEFAULT_PATTERN

    @field_validator("data", mode="before")
    @classmethod
    def _coerce_data(cls, value) -> np.ndarray:
        arr = np.asarray(value)
        if arr.ndim == 2 and arr.size and (arr.min() < 0 or arr.max() > np.iinfo(np.uint16).max):
            raise RangeError(f"mosaic samples must fit in 16 bits (got [{arr.min()}, {arr.max()}])")
        if arr.ndim == 2 and np.issubdtype(arr.dtype, np.floating) and not np.array_equal(arr, np.rint(arr)):
            raise RangeError("mosaic samples must be integers")
        return _frozen(arr, np.uint16) if arr.ndim == 2 else arr

    @model_validator(mode="after")
    def _check(self) -> "RawMosaic":
        require_pattern(self.pattern)
        require_mosaic(self.data, self.bit_depth)
        return self

    @property
    def height(self) -> int:
        return int(self.data.shape[0])

    @property
    def width(self) -> int:
        return int(self.data.shape[1])

    @property
    def white_level(self) -> int:
        return 2**self.bit_depth - 1


class PolarizedStack(BaseModel):
    """
    Four co-registered polarizer-angle images.

    Channels are ordered I1..I4 for 0, 45, 90 and 135 degrees. ``white_level``
    is the saturation ceiling used to normalize channels for overexposure
    masking; it defaults to the 12-bit ceiling.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    channels: np.ndarray
    domain: Domain = "linear_raw"
    white_level: float = 4095.0

    @field_validator("channels", mode="before")
    @classmethod
    def _coerce_channels(cls, value) -> np.ndarray:
        return _frozen(value, np.float64)

    @model_validator(mode="after")
    def _check(self) -> "PolarizedStack":
        require_stack(self.channels, linear=self.domain == "linear_raw")
        if not self.white_level > 0:
            raise RangeError(f"white_level must be positive (got {self.white_level})")
        return self

    @property
    def height(self) -> int:
        return int(self.channels.shape[1])

    @property
    def width(self) -> int:
        return int(self.channels.shape[2])

    @property
    def shape(self) -> Tuple[int, int]:
        return self.height, self.width

    def channel(self, angle_deg: int) -> np.ndarray:
        """Return the channel captured behind the polarizer at ``angle_deg``."""
        return self.channels[ANGLES_DEG.index(angle_deg)]

    def intensity(self) -> np.ndarray:
        """Total intensity, (I1 + I2 + I3 + I4) / 2."""
        return self.channels.sum(axis=0) / 2.0

    def with_channels(self, channels: np.ndarray) -> "PolarizedStack":
        """Return a stack with new channel data and the same tags."""
        return PolarizedStack(channels=channels, domain=self.domain, white_level=self.white_level)


class StokesMaps(BaseModel):
    """Per-pixel intensity, degree and angle of polarization plus the overexposure mask."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    intensity: np.ndarray
    dop: np.ndarray
    aop: np.ndarray
    mask: np.ndarray
    clamped_count: int = 0

    @field_validator("intensity", "dop", "aop", mode="before")
    @classmethod
    def _coerce_float(cls, value) -> np.ndarray:
        return _frozen(value, np.float64)

    @field_validator("mask", mode="before")
    @classmethod
    def _coerce_mask(cls, value) -> np.ndarray:
        return _frozen(value, np.uint8)

    @model_validator(mode="after")
    def _check(self) -> "StokesMaps":
        shapes = {self.intensity.shape, self.dop.shape, self.aop.shape, self.mask.shape}
        if len(shapes) != 1:
            raise DimensionError(f"Stokes maps must share a shape (got {sorted(shapes)})")
        return self


class LightState(BaseModel):
    """
    Intensity, degree and angle of polarization of incident light.

    Fields may be scalars or broadcast-compatible arrays, which makes the
    same model serve a single ray and a whole image.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    intensity: ArrayLike
    dop: ArrayLike = 0.0
    aop: ArrayLike = 0.0

    @field_validator("intensity", "dop", "aop", mode="before")
    @classmethod
    def _coerce(cls, value):
        arr = np.asarray(value, dtype=np.float64)
        return float(arr) if arr.ndim == 0 else _frozen(arr, np.float64)

    @model_validator(mode="after")
    def _check(self) -> "LightState":
        intensity = np.asarray(self.intensity)
        if not np.all(np.isfinite(intensity)) or (intensity.size and intensity.min() < 0):
            raise RangeError("light intensity must be finite and >= 0")
        require_unit_interval("dop", self.dop)
        if not np.all(np.isfinite(np.asarray(self.aop))):
            raise RangeError("aop must be finite")
        try:
            np.broadcast_shapes(np.shape(self.intensity), np.shape(self.dop), np.shape(self.aop))
        except ValueError as e:
            raise DimensionError(f"light state fields do not broadcast: {e}") from e
        return self

    def shape(self) -> Tuple[int, ...]:
        return np.broadcast_shapes(np.shape(self.intensity), np.shape(self.dop), np.shape(self.aop))
