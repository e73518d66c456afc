"""
Decomposition Loss Service

Normalized cross-correlation (NCC), its multi-scale perceptual form PNCC
and the overexposure-masked perceptual L1 loss, all with analytic
gradients through the linear feature pyramid.
"""

import logging
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from polarsep.models.losses import FeaturePyramidSpec, LossValueWithGrad
from polarsep.services.pyramid import get_pyramid
from polarsep.utils.validation import (
    DimensionError,
    ParameterError,
    require_binary,
    require_same_shape,
)

logger = logging.getLogger(__name__)

NCC_EPS = 1e-8
DEFAULT_ALPHAS = [0.01] + [round(0.05 * k, 2) for k in range(1, 21)]


def _normalize_with_scale(img: np.ndarray) -> Tuple[np.ndarray, float]:
    """Min-max normalized image and the scale 1 / (max - min), 0 for constant input."""
    low, high = float(img.min()), float(img.max())
    if high == low:
        return np.zeros_like(img, dtype=np.float64), 0.0
    scale = 1.0 / (high - low)
    return (img - low) * scale, scale


def normalize01(img: np.ndarray) -> np.ndarray:
    """Rescale to [0, 1]; a constant image maps to zeros."""
    return _normalize_with_scale(np.asarray(img, dtype=np.float64))[0]


def ncc(
    X: np.ndarray,
    Y: np.ndarray,
    with_grad: bool = False,
    eps: float = NCC_EPS,
) -> Union[float, LossValueWithGrad]:
    """
    Zero-mean normalized cross-correlation.

    NCC = sum(x y) / (|x| |y| + eps) over the centered arrays, clamped to
    [-1, 1].

    Args:
        X: First array
        Y: Second array of the same shape
        with_grad: Also return gradients with respect to X and Y
        eps: Denominator guard

    Returns:
        The scalar value, or LossValueWithGrad when ``with_grad`` is set
    """
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    require_same_shape(X, Y, what="NCC inputs")
    if X.size < 2:
        raise DimensionError(f"NCC needs at least 2 elements (got {X.size})")

    xc = X - X.mean()
    yc = Y - Y.mean()
    norm_x = float(np.sqrt(np.sum(xc * xc)))
    norm_y = float(np.sqrt(np.sum(yc * yc)))
    cross = float(np.sum(xc * yc))
    denom = norm_x * norm_y + eps
    value = min(1.0, max(-1.0, cross / denom))
    if not with_grad:
        return value

    grad_x = yc / denom
    grad_y = xc / denom
    if norm_x > 0:
        grad_x = grad_x - cross * norm_y * xc / (norm_x * denom**2)
    if norm_y > 0:
        grad_y = grad_y - cross * norm_x * yc / (norm_y * denom**2)
    return LossValueWithGrad(value=value, grad_a=grad_x, grad_b=grad_y)


def _signed(value: float) -> Tuple[float, float]:
    return value, 1.0


def _positive_squared(value: float) -> Tuple[float, float]:
    positive = max(value, 0.0)
    return positive * positive, 2.0 * positive


def _pyramid_ncc(
    I_A: np.ndarray,
    I_B: np.ndarray,
    spec: Optional[FeaturePyramidSpec],
    normalize: bool,
    penalty: Callable[[float], Tuple[float, float]],
) -> LossValueWithGrad:
    I_A = np.asarray(I_A, dtype=np.float64)
    I_B = np.asarray(I_B, dtype=np.float64)
    require_same_shape(I_A, I_B, what="PNCC inputs")
    if I_A.ndim != 2:
        raise DimensionError(f"PNCC expects 2-D images (got {I_A.ndim}-D)")

    if normalize:
        A, scale_a = _normalize_with_scale(I_A)
        B, scale_b = _normalize_with_scale(I_B)
    else:
        A, scale_a, B, scale_b = I_A, 1.0, I_B, 1.0

    pyramid = get_pyramid(spec or FeaturePyramidSpec(), I_A.shape)
    feats_a = pyramid.forward(A)
    feats_b = pyramid.forward(B)

    per_level: List[float] = []
    grads_a: List[np.ndarray] = []
    grads_b: List[np.ndarray] = []
    for level_a, level_b in zip(feats_a, feats_b):
        channels = level_a.shape[0]
        level_value = 0.0
        grad_a = np.empty_like(level_a)
        grad_b = np.empty_like(level_b)
        for c in range(channels):
            result = ncc(level_a[c], level_b[c], with_grad=True)
            value, slope = penalty(result.value)
            level_value += value
            grad_a[c] = slope * result.grad_a / channels
            grad_b[c] = slope * result.grad_b / channels
        per_level.append(level_value / channels)
        grads_a.append(grad_a)
        grads_b.append(grad_b)

    return LossValueWithGrad(
        value=float(sum(per_level)),
        grad_a=pyramid.adjoint(grads_a) * scale_a,
        grad_b=pyramid.adjoint(grads_b) * scale_b,
        per_level=tuple(per_level),
    )


def pncc(
    I_A: np.ndarray,
    I_B: np.ndarray,
    spec: Optional[FeaturePyramidSpec] = None,
    normalize: bool = True,
) -> LossValueWithGrad:
    """
    Perceptual NCC: per level, the mean NCC over filter channels; summed over levels.

    Inputs are min-max normalized first unless ``normalize`` is False. The
    normalization bounds are held constant when differentiating.

    Args:
        I_A: First image
        I_B: Second image
        spec: Feature pyramid spec
        normalize: Apply normalize01 to both inputs

    Returns:
        LossValueWithGrad with per-level contributions
    """
    return _pyramid_ncc(I_A, I_B, spec, normalize, _signed)


def positive_pncc(
    I_A: np.ndarray,
    I_B: np.ndarray,
    spec: Optional[FeaturePyramidSpec] = None,
    normalize: bool = True,
) -> LossValueWithGrad:
    """
    Correlation penalty on the PNCC pyramid: per level, the mean of max(NCC, 0)^2.

    Zero once no filter channel is positively correlated, so minimizing it
    decorrelates the pair without driving it towards anti-correlation.
    Differentiable everywhere.
    """
    return _pyramid_ncc(I_A, I_B, spec, normalize, _positive_squared)


def default_level_weights(spec: FeaturePyramidSpec, shape: Tuple[int, int]) -> List[float]:
    """One over the element count (channels x h x w) of each level."""
    height, width = shape
    return [
        1.0 / (len(level.filters) * (height // level.factor) * (width // level.factor))
        for level in spec.levels
    ]


def masked_perceptual(
    T: np.ndarray,
    T_hat: np.ndarray,
    O: np.ndarray,
    spec: Optional[FeaturePyramidSpec] = None,
    beta: Optional[Sequence[float]] = None,
) -> LossValueWithGrad:
    """
    Feature-space L1 distance between O*T and O*T_hat, weighted per level.

    Args:
        T: Reference image
        T_hat: Estimate
        O: Binary mask, 0 on overexposed pixels
        spec: Feature pyramid spec
        beta: Per-level weights, default 1 / element count

    Returns:
        LossValueWithGrad; ``grad_a`` is with respect to T, ``grad_b`` to T_hat
    """
    T = np.asarray(T, dtype=np.float64)
    T_hat = np.asarray(T_hat, dtype=np.float64)
    O = np.asarray(O)
    require_same_shape(T, T_hat, O, what="perceptual loss inputs")
    require_binary("mask", O)
    spec = spec or FeaturePyramidSpec()
    if beta is None:
        beta = default_level_weights(spec, T.shape)
    elif len(beta) != len(spec.levels):
        raise ParameterError(f"expected {len(spec.levels)} level weights (got {len(beta)})")

    mask = O.astype(np.float64)
    pyramid = get_pyramid(spec, T.shape)
    feats_ref = pyramid.forward(mask * T)
    feats_est = pyramid.forward(mask * T_hat)

    value = 0.0
    per_level: List[float] = []
    sign_grads: List[np.ndarray] = []
    for weight, ref, est in zip(beta, feats_ref, feats_est):
        diff = ref - est
        level_value = float(weight * np.abs(diff).sum())
        per_level.append(level_value)
        value += level_value
        sign_grads.append(weight * np.sign(diff))

    grad_ref = mask * pyramid.adjoint(sign_grads)
    return LossValueWithGrad(value=value, grad_a=grad_ref, grad_b=-grad_ref, per_level=tuple(per_level))


def pncc_curve(
    R: np.ndarray,
    T: np.ndarray,
    alphas: Optional[Sequence[float]] = None,
    normalize: bool = True,
    spec: Optional[FeaturePyramidSpec] = None,
) -> pd.DataFrame:
    """
    PNCC(T + (1 - alpha) R, alpha R) over a grid of mixing coefficients.

    A well-behaved loss falls as alpha grows and the reflection moves out
    of the first input.

    Args:
        R: Reflection image
        T: Transmission image
        alphas: Mixing coefficients in (0, 1], default DEFAULT_ALPHAS
        normalize: Min-max normalize both inputs of each evaluation
        spec: Feature pyramid spec

    Returns:
        DataFrame with columns alpha, pncc
    """
    R = np.asarray(R, dtype=np.float64)
    T = np.asarray(T, dtype=np.float64)
    require_same_shape(R, T, what="reflection and transmission images")
    alphas = list(DEFAULT_ALPHAS if alphas is None else alphas)
    for alpha in alphas:
        if not 0.0 < alpha <= 1.0:
            raise ParameterError(f"alpha must lie in (0, 1] (got {alpha})")
    values = [pncc(T + (1.0 - alpha) * R, alpha * R, spec, normalize=normalize).value for alpha in alphas]
    return pd.DataFrame({"alpha": alphas, "pncc": values})
