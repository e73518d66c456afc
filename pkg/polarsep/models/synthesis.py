"""
Synthesis Data Models

Configuration and result schemas for raw-linear {M, R, T} triple generation
and the M-R data cleaning rules.
"""

import math
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, model_validator

from polarsep.models.fresnel import DEFAULT_REFRACTIVE_INDEX
from polarsep.models.polarization import PolarizedStack
from polarsep.utils.validation import require_interval

CleaningReason = Literal["accept", "reject_ratio", "reject_empty_transmission"]


class SynthConfig(BaseModel):
    """
    Parameters of one synthetic triple.

    ``noise_sigma`` is in LSB at ``bit_depth``. ``exposure_scale`` maps base
    intensity to digital numbers; when unset the peak of M is placed at 95 %
    of the white level. ``phi_t`` is drawn from ``seed`` when unset.
    """

    model_config = ConfigDict(frozen=True)

    a: float = 1.0
    b: float = 1.0
    n: float = DEFAULT_REFRACTIVE_INDEX
    theta_i: float = math.radians(55.0)
    rho_r_override: Optional[float] = None
    rho_t_override: Optional[float] = None
    phi_r: float = 0.0
    phi_t: Optional[float] = None
    noise_sigma: float = 0.0
    bit_depth: int = 12
    seed: int = 0
    quantize: bool = True
    exposure_scale: Optional[float] = None
    attenuate_background: bool = False

    @model_validator(mode="after")
    def _check(self) -> "SynthConfig":
        require_interval("a", self.a, low=0.0, high=1.0, low_open=True)
        require_interval("b", self.b, low=0.0, high=1.0, low_open=True)
        require_interval("n", self.n, low=1.0, low_open=True)
        require_interval("theta_i", self.theta_i, low=0.0, high=math.pi / 2, high_open=True)
        require_interval("noise_sigma", self.noise_sigma, low=0.0)
        require_interval("bit_depth", self.bit_depth, low=1, high=16)
        for name in ("rho_r_override", "rho_t_override"):
            value = getattr(self, name)
            if value is not None:
                require_interval(name, value, low=0.0, high=1.0)
        if self.exposure_scale is not None:
            require_interval("exposure_scale", self.exposure_scale, low=0.0, low_open=True)
        return self

    @property
    def white_level(self) -> int:
        return 2**self.bit_depth - 1


class CleaningVerdict(BaseModel):
    """Outcome of the mean-ratio cleaning rule for one (R, T) pair."""

    accepted: bool
    reason: CleaningReason
    ratio: Optional[float] = None
    clamped_count: int = 0


class TriplePair(BaseModel):
    """Aligned mixed, reflection and transmission stacks with their provenance."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    M: PolarizedStack
    R: PolarizedStack
    T: PolarizedStack
    config: SynthConfig
    rho_r: float
    rho_t: float
    scale: float = 1.0
    verdict: Optional[CleaningVerdict] = None


class LinearityReport(BaseModel):
    """Residuals of M - R against T computed in raw and in gamma space, in LSB."""

    raw_max: float
    raw_mean: float
    gamma_max: float
    gamma_mean: float
    gamma: float
    white_level: float

    @property
    def mean_ratio(self) -> float:
        """Gamma mean residual over raw mean residual (inf when raw is exact)."""
        if self.raw_mean == 0:
            return math.inf if self.gamma_mean > 0 else 1.0
        return self.gamma_mean / self.raw_mean
