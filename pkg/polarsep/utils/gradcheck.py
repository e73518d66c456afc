"""
Finite-Difference Gradient Checking

Central differences over every entry of an array argument, used to verify
the analytic gradients of the losses and the separator objectives.
"""

from typing import Callable

import numpy as np


def finite_difference_gradient(
    func: Callable[[np.ndarray], float],
    x: np.ndarray,
    eps: float = 1e-4,
) -> np.ndarray:
    """
    Approximate the gradient of a scalar function by central differences.

    Args:
        func: Scalar function of an array
        x: Point of evaluation (not modified)
        eps: Step applied to each entry

    Returns:
        Array shaped like ``x`` holding (f(x + e) - f(x - e)) / (2 eps)
    """
    x = np.array(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    out = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        f_plus = func(x)
        flat[i] = orig - eps
        f_minus = func(x)
        flat[i] = orig
        out[i] = (f_plus - f_minus) / (2.0 * eps)
    return grad


def max_relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """max |analytic - numeric| / max |numeric|; absolute error when numeric vanishes."""
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    scale = np.max(np.abs(numeric))
    diff = np.max(np.abs(analytic - numeric))
    if scale < 1e-12:
        return float(diff)
    return float(diff / scale)
