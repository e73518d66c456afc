"""
16-bit PNG I/O

Lossless single-channel 16-bit PNG files. Sensor data with fewer bits is
shifted into the high bits on write and back on read; the original bit
depth travels in a ``polarsep:bit_depth`` text chunk.
"""

import logging
from pathlib import Path
from typing import Optional, Union

import imageio.v3 as iio
import numpy as np
from PIL import Image
from PIL.PngImagePlugin import PngInfo

from polarsep.utils.validation import FormatError

logger = logging.getLogger(__name__)

BIT_DEPTH_KEY = "polarsep:bit_depth"
SUPPORTED_BIT_DEPTHS = (12, 16)

PathLike = Union[str, Path]


def _check_bit_depth(bit_depth: int) -> int:
    if bit_depth not in SUPPORTED_BIT_DEPTHS:
        raise FormatError(f"unsupported bit depth {bit_depth}; expected one of {SUPPORTED_BIT_DEPTHS}")
    return 16 - bit_depth


def write_png16(path: PathLike, image: np.ndarray, bit_depth: int = 16) -> None:
    """
    Write a single-channel image as a 16-bit PNG.

    Args:
        path: Output path
        image: 2-D array of integers in [0, 2^bit_depth - 1]
        bit_depth: 12 or 16
    """
    shift = _check_bit_depth(bit_depth)
    image = np.asarray(image)
    if image.ndim != 2:
        raise FormatError(f"PNG16 images must be single-channel 2-D arrays (got shape {image.shape})")
    ceiling = 2**bit_depth - 1
    if image.size and (image.min() < 0 or image.max() > ceiling or not np.array_equal(image, np.rint(image))):
        raise FormatError(f"PNG16 samples must be integers in [0, {ceiling}] at {bit_depth} bits")

    stored = np.left_shift(image.astype(np.uint16), shift)
    info = PngInfo()
    info.add_text(BIT_DEPTH_KEY, str(bit_depth))
    iio.imwrite(path, stored, extension=".png", pnginfo=info)
    logger.debug(f"Wrote {image.shape} {bit_depth}-bit PNG to {path}")


def read_png16(path: PathLike, bit_depth: Optional[int] = None) -> np.ndarray:
    """
    Read a 16-bit single-channel PNG.

    Args:
        path: Input path
        bit_depth: Override the bit depth recorded in the file (default 16 if absent)

    Returns:
        uint16 array with the stored shift undone
    """
    try:
        image = iio.imread(path)
        with Image.open(path) as handle:
            recorded = handle.info.get(BIT_DEPTH_KEY)
    except (OSError, ValueError, SyntaxError) as e:
        raise FormatError(f"cannot decode PNG {path}: {e}") from e

    if image.ndim != 2:
        raise FormatError(f"expected a single-channel PNG (got shape {image.shape})")
    if image.dtype == np.uint8 or not np.issubdtype(image.dtype, np.integer):
        raise FormatError(f"expected 16-bit samples (got {image.dtype})")
    if image.size and (image.min() < 0 or image.max() > 65535):
        raise FormatError("PNG samples exceed the 16-bit range")

    if bit_depth is None:
        bit_depth = int(recorded) if recorded is not None else 16
    shift = _check_bit_depth(bit_depth)
    return np.right_shift(image.astype(np.uint16), shift)
