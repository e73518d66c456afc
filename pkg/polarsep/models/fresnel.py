"""
Fresnel Interface Models

Schemas for a single non-absorbing dielectric interface and its power
coefficients.
"""

import math
from typing import NamedTuple

from pydantic import BaseModel, ConfigDict, model_validator

from polarsep.utils.validation import require_interval

DEFAULT_REFRACTIVE_INDEX = 1.7


class InterfaceSpec(BaseModel):
    """Refractive index and incidence angle (radians) of an air/dielectric interface."""

    model_config = ConfigDict(frozen=True)

    n: float = DEFAULT_REFRACTIVE_INDEX
    theta_i: float = 0.0

    @model_validator(mode="after")
    def _check(self) -> "InterfaceSpec":
        require_interval("n", self.n, low=1.0, low_open=True)
        require_interval("theta_i", self.theta_i, low=0.0, high=math.pi / 2, high_open=True)
        return self

    @classmethod
    def from_degrees(cls, n: float, theta_deg: float) -> "InterfaceSpec":
        return cls(n=n, theta_i=math.radians(theta_deg))


class PowerCoefficients(NamedTuple):
    """Reflected and transmitted power fractions for s and p polarizations."""

    rs: float
    rp: float
    ts: float
    tp: float
