"""
CLI Input Loading

Resolves image paths given on the command line into mosaics, stacks or
intensity images. ``.png`` files are 16-bit mosaics or single-channel
images; anything else is read as a TensorFile.
"""

import logging
from pathlib import Path

import numpy as np

from polarsep.io.png16 import read_png16
from polarsep.io.tensor_file import read_tensor
from polarsep.models.polarization import DEFAULT_PATTERN, MosaicPattern, PolarizedStack, RawMosaic
from polarsep.services.polarization import demux_mosaic
from polarsep.utils.validation import FormatError, ParameterError

logger = logging.getLogger(__name__)


def parse_pattern(text: str) -> MosaicPattern:
    """Parse "0,45,90,135" (row-major 2x2) into a mosaic pattern."""
    try:
        angles = [int(part) for part in text.split(",")]
    except ValueError as e:
        raise ParameterError(f"pattern must be four comma-separated angles (got {text!r})") from e
    if len(angles) != 4:
        raise ParameterError(f"pattern must list four angles (got {text!r})")
    return ((angles[0], angles[1]), (angles[2], angles[3]))


def _is_png(path: Path) -> bool:
    return path.suffix.lower() == ".png"


def load_mosaic(path: Path, bit_depth: int = 12, pattern: MosaicPattern = DEFAULT_PATTERN) -> RawMosaic:
    """Load a mosaic from a PNG or a 2-D TensorFile."""
    path = Path(path)
    data = read_png16(path, bit_depth) if _is_png(path) else read_tensor(path)
    if data.ndim != 2:
        raise FormatError(f"{path} does not hold a 2-D mosaic (shape {data.shape})")
    return RawMosaic(data=data, bit_depth=bit_depth, pattern=pattern)


def load_stack(path: Path, bit_depth: int = 12, pattern: MosaicPattern = DEFAULT_PATTERN) -> PolarizedStack:
    """Load a four-channel stack from a (4, H, W) TensorFile or demultiplex a mosaic."""
    path = Path(path)
    if _is_png(path):
        return demux_mosaic(load_mosaic(path, bit_depth, pattern))
    data = read_tensor(path)
    if data.ndim == 2:
        return demux_mosaic(RawMosaic(data=data, bit_depth=bit_depth, pattern=pattern))
    if data.ndim != 3 or data.shape[0] != 4:
        raise FormatError(f"{path} holds shape {data.shape}; expected (4, H, W) or a 2-D mosaic")
    return PolarizedStack(channels=data, white_level=2**bit_depth - 1)


def load_image(path: Path) -> np.ndarray:
    """Load a single intensity image; four-channel stacks are reduced to total intensity."""
    path = Path(path)
    if _is_png(path):
        return read_png16(path).astype(np.float64)
    data = read_tensor(path).astype(np.float64)
    if data.ndim == 3 and data.shape[0] == 4:
        return data.sum(axis=0) / 2.0
    if data.ndim != 2:
        raise FormatError(f"{path} holds shape {data.shape}; expected a 2-D image")
    return data
