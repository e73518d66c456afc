"""
Synthesis Service

Generates aligned {M, R, T} polarization triples in raw-linear space and
applies the M-R data cleaning rules. The generator is the inverse of the
capture pipeline that photographs M and R and obtains T = M - R: layers
receive their degree of polarization from the Fresnel equations, are mixed
linearly, then share one exposure scale and quantizer so the subtraction
identity survives rounding.
"""

import logging
from typing import Optional, Tuple, Union

import numpy as np
from scipy.ndimage import gaussian_filter

from polarsep.models.fresnel import InterfaceSpec
from polarsep.models.polarization import LightState, PolarizedStack
from polarsep.models.synthesis import CleaningVerdict, LinearityReport, SynthConfig, TriplePair
from polarsep.services.fresnel import dop_reflected, dop_transmitted, mean_transmittance
from polarsep.services.polarization import DEFAULT_GAMMA, DEFAULT_WHITE_LEVEL, render_stack
from polarsep.utils.metrics import pairs_cleaned
from polarsep.utils.validation import (
    DomainError,
    ParameterError,
    RangeError,
    require_interval,
    require_same_shape,
    require_unit_interval,
)

logger = logging.getLogger(__name__)

RATIO_LOW = 0.1
RATIO_HIGH = 10.0
# Peak of M after automatic exposure, as a fraction of the white level.
EXPOSURE_HEADROOM = 0.95

StackOrArray = Union[PolarizedStack, np.ndarray]


def polarize_layer(
    base: np.ndarray,
    rho: Union[float, np.ndarray],
    phi: float,
    white_level: float = DEFAULT_WHITE_LEVEL,
) -> PolarizedStack:
    """
    Render an intensity image as a partially polarized layer.

    Args:
        base: Intensity image, >= 0
        rho: Degree of polarization, scalar or per pixel, in [0, 1]
        phi: Angle of polarization in radians
        white_level: Ceiling carried by the returned stack

    Returns:
        Linear stack whose total intensity equals ``base``
    """
    base = np.asarray(base, dtype=np.float64)
    if base.ndim != 2:
        raise RangeError(f"base image must be 2-D (got {base.ndim}-D)")
    require_unit_interval("rho", rho)
    return render_stack(LightState(intensity=base, dop=rho, aop=phi), white_level=white_level)


def compose_mixed(R: PolarizedStack, T: PolarizedStack, a: float = 1.0, b: float = 1.0) -> PolarizedStack:
    """Channel-wise mixture M = a R + b T of two linear stacks."""
    if R.domain != "linear_raw" or T.domain != "linear_raw":
        raise DomainError("layers can only be mixed in linear raw space")
    require_same_shape(R.channels, T.channels, what="reflection and transmission stacks")
    require_interval("a", a, low=0.0, high=1.0, low_open=True)
    require_interval("b", b, low=0.0, high=1.0, low_open=True)
    return R.with_channels(a * R.channels + b * T.channels)


def _to_counts(
    channels: np.ndarray,
    scale: float,
    sigma: float,
    white_level: float,
    quantize: bool,
    rng: np.random.Generator,
) -> np.ndarray:
    values = channels * scale
    if sigma > 0:
        values = values + rng.normal(0.0, sigma, size=values.shape)
    values = np.clip(values, 0.0, white_level)
    return np.rint(values) if quantize else values


def degrade(
    s: PolarizedStack,
    cfg: SynthConfig,
    scale: float = 1.0,
    rng: Optional[np.random.Generator] = None,
) -> PolarizedStack:
    """
    Apply exposure scale, seeded Gaussian noise and quantization to the sensor range.

    Args:
        s: Linear stack
        cfg: Supplies noise_sigma, bit_depth, quantize and seed
        scale: Digital numbers per unit of input intensity
        rng: Noise generator; seeded from cfg.seed when omitted

    Returns:
        Linear stack clipped to [0, 2^bit_depth - 1], integer-valued when cfg.quantize is set
    """
    if s.domain != "linear_raw":
        raise DomainError("noise and quantization are modelled on linear raw data")
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    counts = _to_counts(s.channels, scale, cfg.noise_sigma, cfg.white_level, cfg.quantize, rng)
    return PolarizedStack(channels=counts, domain="linear_raw", white_level=cfg.white_level)


def _as_array(x: StackOrArray) -> np.ndarray:
    return np.array(x.channels if isinstance(x, PolarizedStack) else x, dtype=np.float64)


def clean_pair(
    R: StackOrArray,
    T: StackOrArray,
    low: float = RATIO_LOW,
    high: float = RATIO_HIGH,
) -> Tuple[CleaningVerdict, np.ndarray, np.ndarray]:
    """
    Apply the mean-ratio rule and zero negative pixels.

    Args:
        R: Reflection layer
        T: Transmission layer, typically M - R
        low: Smallest accepted mean(R) / mean(T)
        high: Largest accepted mean(R) / mean(T)

    Returns:
        Tuple of (verdict, clamped R, clamped T)
    """
    r = _as_array(R)
    t = _as_array(T)
    require_same_shape(r, t, what="reflection and transmission")
    clamped = int(np.count_nonzero(r < 0) + np.count_nonzero(t < 0))
    r = np.maximum(r, 0.0)
    t = np.maximum(t, 0.0)

    mean_t = float(t.mean())
    if mean_t == 0:
        verdict = CleaningVerdict(accepted=False, reason="reject_empty_transmission", clamped_count=clamped)
    else:
        ratio = float(r.mean()) / mean_t
        accepted = low <= ratio <= high
        verdict = CleaningVerdict(
            accepted=accepted,
            reason="accept" if accepted else "reject_ratio",
            ratio=ratio,
            clamped_count=clamped,
        )

    pairs_cleaned.labels(reason=verdict.reason).inc()
    if not verdict.accepted:
        logger.info(f"Rejected pair: {verdict.reason} (ratio={verdict.ratio})")
    return verdict, r, t


def mr_subtract(M: PolarizedStack, R: PolarizedStack) -> np.ndarray:
    """Transmission estimate T = M - R; negative values are left for clean_pair."""
    if M.domain != "linear_raw" or R.domain != "linear_raw":
        raise DomainError("M - R is only valid on linear raw data")
    require_same_shape(M.channels, R.channels, what="mixed and reflection stacks")
    return M.channels - R.channels


def random_texture(shape: Tuple[int, int], rng: np.random.Generator, sigma: float = 2.0) -> np.ndarray:
    """Smooth random image in [0, 1]: blurred uniform noise, min-max normalized."""
    field = gaussian_filter(rng.random(shape), sigma=sigma, mode="reflect")
    low, high = field.min(), field.max()
    if high == low:
        return np.zeros(shape)
    return (field - low) / (high - low)


def make_triple(baseR: np.ndarray, baseT: np.ndarray, cfg: SynthConfig) -> TriplePair:
    """
    Generate an aligned {M, R, T} triple.

    Layer DoP comes from the Fresnel equations at (cfg.n, cfg.theta_i) unless
    overridden. When quantizing, R and T are scaled, noised and rounded first
    and M is composed from the rounded layers, so M - R == T holds within
    1.5 LSB for a = b = 1.

    Args:
        baseR: Reflection intensity image, >= 0
        baseT: Transmission (or background) intensity image, >= 0
        cfg: Synthesis configuration

    Returns:
        TriplePair with the resolved configuration and cleaning verdict
    """
    baseR = np.asarray(baseR, dtype=np.float64)
    baseT = np.asarray(baseT, dtype=np.float64)
    require_same_shape(baseR, baseT, what="base images")
    if baseR.size == 0 or min(baseR.min(), baseT.min()) < 0:
        raise RangeError("base images must be non-empty and >= 0")

    interface = InterfaceSpec(n=cfg.n, theta_i=cfg.theta_i)
    rho_r = cfg.rho_r_override if cfg.rho_r_override is not None else dop_reflected(interface)
    rho_t = cfg.rho_t_override if cfg.rho_t_override is not None else dop_transmitted(interface)

    noise_r, noise_t, angle = np.random.SeedSequence(cfg.seed).spawn(3)
    phi_t = cfg.phi_t
    if phi_t is None:
        phi_t = float(np.random.default_rng(angle).uniform(-np.pi / 2, np.pi / 2))
    resolved = cfg.model_copy(update={"phi_t": phi_t})

    if cfg.attenuate_background:
        baseT = baseT * mean_transmittance(interface)

    white = float(cfg.white_level)
    R = polarize_layer(baseR, rho_r, cfg.phi_r, white_level=white)
    T = polarize_layer(baseT, rho_t, phi_t, white_level=white)

    mixed_peak = float((cfg.a * R.channels + cfg.b * T.channels).max())
    if cfg.exposure_scale is not None:
        scale = cfg.exposure_scale
    elif mixed_peak > 0:
        scale = EXPOSURE_HEADROOM * white / mixed_peak
    else:
        scale = 1.0

    R = degrade(R, cfg, scale, rng=np.random.default_rng(noise_r))
    T = degrade(T, cfg, scale, rng=np.random.default_rng(noise_t))
    mixed = compose_mixed(R, T, cfg.a, cfg.b)
    m_counts = np.clip(mixed.channels, 0.0, white)
    if cfg.quantize:
        m_counts = np.rint(m_counts)
    M = mixed.with_channels(m_counts)
    verdict, _, _ = clean_pair(R, T)
    logger.info(
        f"Synthesized triple seed={cfg.seed} rho_r={rho_r:.4f} rho_t={rho_t:.4f} "
        f"scale={scale:.3f} verdict={verdict.reason}"
    )
    return TriplePair(M=M, R=R, T=T, config=resolved, rho_r=rho_r, rho_t=rho_t, scale=scale, verdict=verdict)


def _gamma_encode(x: np.ndarray, white: float, gamma: float) -> np.ndarray:
    return white * np.clip(x / white, 0.0, 1.0) ** gamma


def gamma_subtraction_demo(triple: TriplePair, gamma: float = DEFAULT_GAMMA) -> LinearityReport:
    """
    Compare M - R against T in raw space and after gamma encoding.

    Residuals are reported in LSB of the sensor white level.
    """
    if triple.config.a != 1.0 or triple.config.b != 1.0:
        raise ParameterError("the linearity demonstration needs a triple mixed with a = b = 1")
    white = triple.M.white_level
    M, R, T = triple.M.channels, triple.R.channels, triple.T.channels

    raw = np.abs(M - R - T)
    encoded = np.abs(
        _gamma_encode(M, white, gamma) - _gamma_encode(R, white, gamma) - _gamma_encode(T, white, gamma)
    )
    report = LinearityReport(
        raw_max=float(raw.max()),
        raw_mean=float(raw.mean()),
        gamma_max=float(encoded.max()),
        gamma_mean=float(encoded.mean()),
        gamma=gamma,
        white_level=white,
    )
    logger.info(
        f"Linearity check: raw mean residual {report.raw_mean:.3f} LSB, "
        f"gamma mean residual {report.gamma_mean:.3f} LSB"
    )
    return report
