"""
Fresnel Service

Power reflectance and transmittance of a single air/dielectric interface
for unpolarized incident light, and the degree of polarization of the
reflected and transmitted beams. Used to pick physically plausible layer
DoP values during synthesis.
"""

import logging
import math
from typing import Tuple

import numpy as np
import pandas as pd
from scipy.optimize import brentq

from polarsep.models.fresnel import InterfaceSpec, PowerCoefficients
from polarsep.utils.validation import ParameterError, require_interval

logger = logging.getLogger(__name__)

# Closest angle to grazing incidence that is still evaluated.
GRAZING_LIMIT = math.pi / 2 - 1e-9


def _power_coefficients(n: float, theta: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized (Rs, Rp, Ts, Tp) over incidence angles in radians."""
    cos_i = np.cos(theta)
    sin_t = np.sin(theta) / n
    cos_t = np.sqrt(1.0 - sin_t**2)
    rs = (cos_i - n * cos_t) / (cos_i + n * cos_t)
    rp = (n * cos_i - cos_t) / (n * cos_i + cos_t)
    big_rs = rs**2
    big_rp = rp**2
    return big_rs, big_rp, 1.0 - big_rs, 1.0 - big_rp


def _degree(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    total = a + b
    safe = np.where(total > 0, total, 1.0)
    return np.where(total > 0, np.abs(a - b) / safe, 0.0)


def fresnel_power_coefficients(spec: InterfaceSpec) -> PowerCoefficients:
    """
    Fresnel power coefficients of an interface.

    Args:
        spec: Refractive index and incidence angle

    Returns:
        PowerCoefficients(rs, rp, ts, tp) with rs + ts == 1 and rp + tp == 1
    """
    rs, rp, ts, tp = _power_coefficients(spec.n, np.asarray(spec.theta_i))
    return PowerCoefficients(float(rs), float(rp), float(ts), float(tp))


def brewster_angle(n: float) -> float:
    """Incidence angle arctan(n) at which p-polarized reflectance vanishes."""
    if not n > 0:
        raise ParameterError(f"refractive index must be positive (got {n})")
    return math.atan(n)


def dop_reflected(spec: InterfaceSpec) -> float:
    """|Rs - Rp| / (Rs + Rp), defined as 0 when nothing is reflected."""
    coeffs = fresnel_power_coefficients(spec)
    return float(_degree(np.asarray(coeffs.rs), np.asarray(coeffs.rp)))


def dop_transmitted(spec: InterfaceSpec) -> float:
    """|Ts - Tp| / (Ts + Tp)."""
    coeffs = fresnel_power_coefficients(spec)
    return float(_degree(np.asarray(coeffs.ts), np.asarray(coeffs.tp)))


def mean_transmittance(spec: InterfaceSpec) -> float:
    """Fraction of unpolarized light transmitted, (Ts + Tp) / 2."""
    coeffs = fresnel_power_coefficients(spec)
    return (coeffs.ts + coeffs.tp) / 2.0


def dop_crossover_angle(n: float) -> float:
    """
    Incidence angle above Brewster where reflected and transmitted DoP are equal.

    Below it the reflected beam is the more polarized one. The crossing is
    where Rs + Rp = 1.
    """
    require_interval("n", n, low=1.0, low_open=True)

    def excess(theta: float) -> float:
        rs, rp, _, _ = _power_coefficients(n, np.asarray(theta))
        return float(rs + rp - 1.0)

    return float(brentq(excess, brewster_angle(n), GRAZING_LIMIT, xtol=1e-14))


def dop_curve(n: float = 1.7, samples: int = 91) -> pd.DataFrame:
    """
    Reflected and transmitted DoP over an equally spaced [0, 90] degree grid.

    The 90 degree row is evaluated at the grazing limit.

    Args:
        n: Refractive index
        samples: Number of grid points, at least 2

    Returns:
        DataFrame with columns theta_deg, rho_r, rho_t
    """
    require_interval("n", n, low=1.0, low_open=True)
    if samples < 2:
        raise ParameterError(f"samples must be >= 2 (got {samples})")

    theta_deg = np.linspace(0.0, 90.0, samples)
    theta = np.minimum(np.radians(theta_deg), GRAZING_LIMIT)
    rs, rp, ts, tp = _power_coefficients(n, theta)
    curve = pd.DataFrame(
        {
            "theta_deg": theta_deg,
            "rho_r": _degree(rs, rp),
            "rho_t": _degree(ts, tp),
        }
    )
    logger.debug(f"Computed DoP curve for n={n} with {samples} samples")
    return curve
