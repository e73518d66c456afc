"""
Polarization Core Service

Sensor mosaic packing, Malus-law rendering of partially polarized light,
Stokes recovery and overexposure masking. All functions are pure.

Conventions:
- Channels I1..I4 are the 0, 45, 90 and 135 degree polarizer images.
- I = (I1 + I2 + I3 + I4) / 2, rho = sqrt((I1 - I3)^2 + (I2 - I4)^2) / I.
- phi = atan2(I2 - I4, I1 - I3) / 2, wrapped to [-pi/2, pi/2).
"""

import logging
from typing import Tuple, Union

import numpy as np

from polarsep.models.polarization import (
    ANGLES_DEG,
    DEFAULT_PATTERN,
    LightState,
    MosaicPattern,
    PolarizedStack,
    RawMosaic,
    StokesMaps,
)
from polarsep.utils.metrics import dop_clamped_pixels
from polarsep.utils.validation import (
    DomainError,
    RangeError,
    require_interval,
    require_pattern,
    require_same_shape,
)

logger = logging.getLogger(__name__)

DEFAULT_DELTA = 0.98
DEFAULT_GAMMA = 1.0 / 2.2
DEFAULT_WHITE_LEVEL = 4095.0


def _pattern_slots(pattern: MosaicPattern):
    """Yield (row offset, col offset, channel index) for each sub-pixel."""
    for r in range(2):
        for c in range(2):
            yield r, c, ANGLES_DEG.index(int(pattern[r][c]))


def demux_mosaic(m: RawMosaic) -> PolarizedStack:
    """
    Split a raw mosaic into four half-resolution angle channels.

    Args:
        m: Raw sensor mosaic

    Returns:
        Linear stack of shape (4, H/2, W/2)
    """
    channels = np.empty((4, m.height // 2, m.width // 2), dtype=np.float64)
    for r, c, k in _pattern_slots(m.pattern):
        channels[k] = m.data[r::2, c::2]
    return PolarizedStack(channels=channels, domain="linear_raw", white_level=m.white_level)


def remux_mosaic(
    s: PolarizedStack,
    pattern: MosaicPattern = DEFAULT_PATTERN,
    bit_depth: int = 12,
    clamp: bool = False,
) -> RawMosaic:
    """
    Pack a stack back into a sensor mosaic.

    Args:
        s: Linear stack
        pattern: 2x2 angle layout of the target sensor
        bit_depth: Target bit depth
        clamp: Clip out-of-range values instead of raising

    Returns:
        RawMosaic of shape (2H, 2W)
    """
    if s.domain != "linear_raw":
        raise DomainError(f"remux requires a linear_raw stack (got {s.domain})")
    require_pattern(pattern)
    ceiling = 2**bit_depth - 1
    values = np.rint(s.channels)
    if values.min() < 0 or values.max() > ceiling:
        if not clamp:
            raise RangeError(
                f"stack values [{values.min()}, {values.max()}] exceed [0, {ceiling}] at {bit_depth} bits"
            )
        values = np.clip(values, 0, ceiling)

    data = np.empty((2 * s.height, 2 * s.width), dtype=np.uint16)
    for r, c, k in _pattern_slots(pattern):
        data[r::2, c::2] = values[k]
    return RawMosaic(data=data, bit_depth=bit_depth, pattern=pattern)


def malus_render(light: LightState, theta: float) -> Union[float, np.ndarray]:
    """Intensity behind a linear polarizer at ``theta``: I/2 (1 + rho cos 2(theta - phi))."""
    intensity = np.asarray(light.intensity)
    dop = np.asarray(light.dop)
    aop = np.asarray(light.aop)
    out = intensity / 2.0 * (1.0 + dop * np.cos(2.0 * (theta - aop)))
    return float(out) if out.ndim == 0 else out


def render_stack(light: LightState, white_level: float = DEFAULT_WHITE_LEVEL) -> PolarizedStack:
    """
    Render the four sensor channels of a per-pixel light state.

    Channels are built from the Stokes components so that I1 + I3 and I2 + I4
    both equal I up to rounding.
    """
    shape = light.shape()
    if len(shape) != 2:
        raise RangeError(f"light state must describe a 2-D image (got shape {shape})")
    intensity = np.broadcast_to(np.asarray(light.intensity), shape)
    polarized = intensity * np.asarray(light.dop)
    s1 = polarized * np.cos(2.0 * np.asarray(light.aop))
    s2 = polarized * np.sin(2.0 * np.asarray(light.aop))
    half = intensity / 2.0
    channels = np.stack(
        [
            half + s1 / 2.0,
            half + s2 / 2.0,
            half - s1 / 2.0,
            half - s2 / 2.0,
        ]
    )
    return PolarizedStack(channels=np.maximum(channels, 0.0), domain="linear_raw", white_level=white_level)


def _wrap_aop(phi: np.ndarray) -> np.ndarray:
    return np.where(phi >= np.pi / 2, phi - np.pi, phi)


def compute_stokes(s: PolarizedStack, delta: float = DEFAULT_DELTA) -> StokesMaps:
    """
    Recover intensity, degree and angle of polarization from a linear stack.

    Args:
        s: Linear stack
        delta: Overexposure threshold on normalized channel values

    Returns:
        StokesMaps; rho values above 1 are clamped and counted
    """
    if s.domain != "linear_raw":
        raise DomainError("Stokes recovery holds only on linear raw data (got gamma stack)")
    i1, i2, i3, i4 = s.channels
    intensity = (i1 + i2 + i3 + i4) / 2.0
    s1 = i1 - i3
    s2 = i2 - i4
    polarized = np.hypot(s1, s2)

    dop = np.zeros_like(intensity)
    lit = intensity > 0
    dop[lit] = polarized[lit] / intensity[lit]
    over = dop > 1.0
    clamped = int(np.count_nonzero(over))
    if clamped:
        dop[over] = 1.0
        dop_clamped_pixels.inc(clamped)
        logger.debug(f"Clamped {clamped} pixels with degree of polarization above 1")

    aop = _wrap_aop(0.5 * np.arctan2(s2, s1))
    aop[dop == 0] = 0.0

    mask = overexposure_mask(s, delta)
    return StokesMaps(intensity=intensity, dop=dop, aop=aop, mask=mask, clamped_count=clamped)


def overexposure_mask(s: PolarizedStack, delta: float = DEFAULT_DELTA) -> np.ndarray:
    """Binary mask, 0 where any channel normalized by the white level strictly exceeds delta."""
    require_interval("delta", delta, low=0.0, high=1.0, low_open=True)
    peak = s.channels.max(axis=0) / s.white_level
    return (peak <= delta).astype(np.uint8)


def complete_from_three(
    i1: np.ndarray,
    i2: np.ndarray,
    i3: np.ndarray,
    white_level: float = DEFAULT_WHITE_LEVEL,
) -> PolarizedStack:
    """
    Build a stack from the 0, 45 and 90 degree channels only.

    The missing 135 degree channel follows from I1 + I3 = I2 + I4; values
    driven below zero by noise are clipped.
    """
    require_same_shape(i1, i2, i3, what="channels")
    i4 = np.asarray(i1, dtype=np.float64) + np.asarray(i3, dtype=np.float64) - np.asarray(i2, dtype=np.float64)
    negative = int(np.count_nonzero(i4 < 0))
    if negative:
        logger.info(f"Clipped {negative} negative pixels in the derived 135 degree channel")
    channels = np.stack([i1, i2, i3, np.maximum(i4, 0.0)]).astype(np.float64)
    return PolarizedStack(channels=channels, domain="linear_raw", white_level=white_level)


def to_gamma(s: PolarizedStack, gamma: float = DEFAULT_GAMMA) -> PolarizedStack:
    """Gamma-encode a linear stack, keeping the white level as the output ceiling."""
    if s.domain != "linear_raw":
        raise DomainError("stack is already gamma encoded")
    normalized = np.clip(s.channels / s.white_level, 0.0, 1.0)
    return PolarizedStack(channels=s.white_level * normalized**gamma, domain="gamma", white_level=s.white_level)


def gamma_preview(s: PolarizedStack, gamma: float = DEFAULT_GAMMA) -> np.ndarray:
    """Mean of the four channels, gamma corrected to [0, 1]."""
    mean = s.channels.mean(axis=0) / s.white_level
    if s.domain == "gamma":
        return np.clip(mean, 0.0, 1.0)
    return np.clip(mean, 0.0, 1.0) ** gamma


def assemble_input_channels(s: PolarizedStack, delta: float = DEFAULT_DELTA) -> np.ndarray:
    """
    Stack I1..I4, I, rho, phi and the overexposure mask into an (8, H, W) array.

    Intensities are normalized by the white level.
    """
    stokes = compute_stokes(s, delta)
    return np.concatenate(
        [
            s.channels / s.white_level,
            (stokes.intensity / s.white_level)[None],
            stokes.dop[None],
            stokes.aop[None],
            stokes.mask[None].astype(np.float64),
        ]
    )


def dop_histogram(stokes: StokesMaps, bins: int = 10) -> Tuple[np.ndarray, np.ndarray]:
    """Histogram of rho over lit, unsaturated pixels, with bin edges on [0, 1]."""
    valid = (stokes.intensity > 0) & (stokes.mask == 1)
    counts, edges = np.histogram(stokes.dop[valid], bins=bins, range=(0.0, 1.0))
    return counts, edges

