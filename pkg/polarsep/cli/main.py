"""
Command-Line Entry Point

Dispatches subcommands, configures logging, and guarantees that every run
leaves a metadata sidecar behind. Exit codes: 0 success, 1 usage error
(including out-of-range flag values), 2 data or solver error.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from pydantic import ValidationError

from polarsep import __version__
from polarsep.cli.commands import FlagError, fresnel, polarization, separation, synthesis
from polarsep.config.settings import LOG_FORMAT, get_settings
from polarsep.io.sidecar import RunMetadata, write_metadata
from polarsep.utils.metrics import write_metrics
from polarsep.utils.validation import PolarsepError, SolverError

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
METADATA_NAME = "metadata.json"


class UsageError(Exception):
    """Raised instead of exiting when the command line cannot be parsed."""
    pass


class CliParser(argparse.ArgumentParser):
    """ArgumentParser that raises UsageError so the caller controls the exit code."""

    def error(self, message: str) -> None:
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def build_parser() -> CliParser:
    """Build the top-level parser with one subparser per command."""
    parser = CliParser(prog="polarsep", description="Polarized reflection separation toolkit")
    parser.add_argument("--version", action="version", version=f"polarsep {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    parser.add_argument("-q", "--quiet", action="store_true", help="warnings and errors only")
    parser.add_argument("--workers", type=int, default=None, help="worker processes for batch runs")
    parser.add_argument("--metrics-file", type=Path, default=None, help="write Prometheus metrics here")

    subparsers = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)
    for module in (polarization, fresnel, synthesis, separation):
        module.register(subparsers)
    return parser


def configure_logging(args: argparse.Namespace) -> None:
    settings = get_settings()
    level = settings.LOG_LEVEL
    if args.verbose:
        level = "DEBUG"
    elif args.quiet:
        level = "WARNING"
    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr, force=True)


def _workers(args: argparse.Namespace) -> int:
    if args.workers is not None:
        if args.workers < 1:
            raise UsageError(f"--workers must be >= 1 (got {args.workers})")
        return args.workers
    return get_settings().WORKERS


def cli_dispatch(argv: Optional[List[str]] = None) -> int:
    """
    Parse ``argv``, run the selected command and return the exit code.

    Args:
        argv: Arguments without the program name; defaults to sys.argv[1:]

    Returns:
        0 on success, 1 on usage errors, 2 on data or solver errors
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        get_settings()
        args.workers = _workers(args)
    except UsageError as e:
        print(str(e), file=sys.stderr)
        return EXIT_USAGE
    except ValidationError as e:
        print(f"polarsep: invalid environment settings: {e}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as e:
        return int(e.code or 0)

    configure_logging(args)
    out_dir = Path(args.out_dir)
    metadata = RunMetadata(command=args.command, seed=getattr(args, "seed", None))
    code = EXIT_OK
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        args.handler(args, metadata)
    except SolverError as e:
        logger.error(f"{args.command} failed in the solver: {e}")
        metadata.status = "solver_error"
        metadata.error = str(e)
        metadata.results["trace_length"] = len(e.trace)
        code = EXIT_DATA
    except FlagError as e:
        print(f"polarsep {args.command}: {e}", file=sys.stderr)
        metadata.status = "usage_error"
        metadata.error = f"{type(e).__name__}: {e}"
        code = EXIT_USAGE
    except PolarsepError as e:
        logger.error(f"{args.command} failed: {e}", extra={"command": args.command, "out_dir": str(out_dir)})
        metadata.status = "error"
        metadata.error = f"{type(e).__name__}: {e}"
        code = EXIT_DATA
    except OSError as e:
        logger.error(f"{args.command} failed on I/O: {e}", exc_info=True)
        metadata.status = "error"
        metadata.error = f"{type(e).__name__}: {e}"
        code = EXIT_DATA
    finally:
        try:
            out_dir.mkdir(parents=True, exist_ok=True)
            write_metadata(out_dir / METADATA_NAME, metadata)
        except OSError as e:
            logger.error(f"Could not write metadata: {e}", exc_info=True)
        if args.metrics_file is not None:
            write_metrics(args.metrics_file)
    return code


def main() -> int:
    return cli_dispatch(sys.argv[1:])


if __name__ == "__main__":
    sys.exit(main())
