"""Models Package"""

from polarsep.models.fresnel import InterfaceSpec, PowerCoefficients
from polarsep.models.losses import FeaturePyramidSpec, LossValueWithGrad, PyramidLevelSpec
from polarsep.models.polarization import (
    ANGLES_DEG,
    ANGLES_RAD,
    DEFAULT_PATTERN,
    LightState,
    PolarizedStack,
    RawMosaic,
    StokesMaps,
)
from polarsep.models.separation import SeparationResult, SeparatorConfig
from polarsep.models.synthesis import CleaningVerdict, LinearityReport, SynthConfig, TriplePair

__all__ = [
    "ANGLES_DEG",
    "ANGLES_RAD",
    "DEFAULT_PATTERN",
    "CleaningVerdict",
    "FeaturePyramidSpec",
    "InterfaceSpec",
    "LightState",
    "LinearityReport",
    "LossValueWithGrad",
    "PolarizedStack",
    "PowerCoefficients",
    "PyramidLevelSpec",
    "RawMosaic",
    "SeparationResult",
    "SeparatorConfig",
    "StokesMaps",
    "SynthConfig",
    "TriplePair",
]
