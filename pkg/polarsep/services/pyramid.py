"""
Linear Feature Pyramid Service

Fixed multi-scale filter bank standing in for learned perceptual features.
Every level blurs with a sampled Gaussian (sigma = factor / 2), optionally
takes a central-difference derivative, then block-sums factor x factor
cells. Each channel is an explicit separable operator L @ X @ R.T, so the
adjoint L.T @ G @ R used for gradients is exact.
"""

import logging
import math
from functools import lru_cache
from typing import List, Optional, Tuple

import numpy as np

from polarsep.models.losses import FeaturePyramidSpec
from polarsep.utils.validation import DimensionError

logger = logging.getLogger(__name__)

TRUNCATE = 4.0
DERIVATIVE_KERNEL = np.array([-0.5, 0.0, 0.5])


def gaussian_kernel(sigma: float) -> np.ndarray:
    """Sampled Gaussian truncated at 4 sigma, normalized to unit sum."""
    radius = max(1, int(math.ceil(TRUNCATE * sigma)))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-(x**2) / (2.0 * sigma**2))
    return kernel / kernel.sum()


def _reflect(index: int, n: int) -> int:
    """Half-sample symmetric boundary: d c b a | a b c d | d c b a."""
    while index < 0 or index >= n:
        index = -index - 1 if index < 0 else 2 * n - index - 1
    return index


def filter_matrix(n: int, kernel: np.ndarray) -> np.ndarray:
    """Dense (n, n) correlation matrix of an odd-length kernel with reflected borders."""
    radius = len(kernel) // 2
    matrix = np.zeros((n, n), dtype=np.float64)
    for i in range(n):
        for offset, weight in enumerate(kernel):
            matrix[i, _reflect(i + offset - radius, n)] += weight
    return matrix


def decimation_matrix(n: int, factor: int) -> np.ndarray:
    """Block-sum of consecutive ``factor`` samples; a trailing remainder is dropped."""
    out = n // factor
    matrix = np.zeros((out, n), dtype=np.float64)
    for i in range(out):
        matrix[i, i * factor : (i + 1) * factor] = 1.0
    return matrix


def _axis_operators(n: int, factor: int) -> Tuple[np.ndarray, np.ndarray]:
    """(smooth, derivative) operators along one axis for a level."""
    blur = filter_matrix(n, gaussian_kernel(factor / 2.0))
    decimate = decimation_matrix(n, factor)
    smooth = decimate @ blur
    derivative = decimate @ filter_matrix(n, DERIVATIVE_KERNEL) @ blur
    return smooth, derivative


class FeaturePyramid:
    """
    Feature pyramid bound to one image shape.

    Args:
        spec: Levels and filters
        shape: (height, width) of the images it will process
    """

    def __init__(self, spec: FeaturePyramidSpec, shape: Tuple[int, int]):
        height, width = shape
        if height < spec.min_size or width < spec.min_size:
            raise DimensionError(
                f"image of {height}x{width} is too small for the feature pyramid; "
                f"minimum size is {spec.min_size}x{spec.min_size}"
            )
        self.spec = spec
        self.shape = (height, width)
        self.operators: List[List[Tuple[np.ndarray, np.ndarray]]] = []
        for level in spec.levels:
            rows_smooth, rows_deriv = _axis_operators(height, level.factor)
            cols_smooth, cols_deriv = _axis_operators(width, level.factor)
            bank = {
                "gaussian": (rows_smooth, cols_smooth),
                "dx": (rows_smooth, cols_deriv),
                "dy": (rows_deriv, cols_smooth),
            }
            self.operators.append([bank[name] for name in level.filters])
        logger.debug(f"Built feature pyramid for {height}x{width} with {len(spec.levels)} levels")

    def forward(self, img: np.ndarray) -> List[np.ndarray]:
        """Feature maps per level, each of shape (channels, h, w)."""
        if img.shape != self.shape:
            raise DimensionError(f"pyramid built for {self.shape}, got image {img.shape}")
        return [np.stack([left @ img @ right.T for left, right in level]) for level in self.operators]

    def adjoint(self, grads: List[np.ndarray]) -> np.ndarray:
        """Pull per-level feature gradients back to image space."""
        out = np.zeros(self.shape, dtype=np.float64)
        for level, level_grad in zip(self.operators, grads):
            for (left, right), channel_grad in zip(level, level_grad):
                out += left.T @ channel_grad @ right
        return out


@lru_cache(maxsize=32)
def get_pyramid(spec: FeaturePyramidSpec, shape: Tuple[int, int]) -> FeaturePyramid:
    """Cached pyramid for a spec and image shape."""
    return FeaturePyramid(spec, shape)


def feature_pyramid(img: np.ndarray, spec: Optional[FeaturePyramidSpec] = None) -> List[np.ndarray]:
    """
    Compute the linear feature pyramid of an image.

    Args:
        img: 2-D image
        spec: Pyramid spec, default three levels with factors 2, 4, 8

    Returns:
        List of per-level arrays of shape (channels, h, w)
    """
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2:
        raise DimensionError(f"feature pyramid expects a 2-D image (got {img.ndim}-D)")
    return get_pyramid(spec or FeaturePyramidSpec(), img.shape).forward(img)
