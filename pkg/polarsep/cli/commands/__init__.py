"""
CLI Command Modules

Each module registers its subcommands and the handlers that run them.
Handlers receive the parsed arguments and the run's metadata record,
write their outputs under ``--out-dir`` and fill in the metadata.
"""

import argparse
from contextlib import contextmanager
from pathlib import Path
from typing import Iterator

from polarsep.cli.inputs import parse_pattern
from polarsep.models.polarization import MosaicPattern
from polarsep.utils.validation import ParameterError, require_pattern


class FlagError(ParameterError):
    """A flag value that parsed but lies outside the range its setting accepts."""
    pass


@contextmanager
def flag_values() -> Iterator[None]:
    """Report ParameterError raised while building settings from flags as a FlagError."""
    try:
        yield
    except FlagError:
        raise
    except ParameterError as e:
        raise FlagError(str(e)) from e


def pattern_argument(text: str) -> MosaicPattern:
    """argparse type for ``--pattern``."""
    try:
        pattern = parse_pattern(text)
        require_pattern(pattern)
    except ParameterError as e:
        raise argparse.ArgumentTypeError(str(e)) from e
    return pattern


def add_output_dir(parser: argparse.ArgumentParser, default: str = ".") -> None:
    parser.add_argument("--out-dir", type=Path, default=Path(default), help="output directory")


def add_sensor_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--bit-depth", type=int, default=12, help="sensor bit depth")
    parser.add_argument(
        "--pattern",
        type=pattern_argument,
        default="0,45,90,135",
        help="polarizer angles of the 2x2 cell, row-major",
    )
