"""
Pipeline Metrics

Prometheus collectors for the numerical pipeline. They live in a dedicated
registry so batch runs can dump them with ``write_metrics`` for a textfile
collector without exposing an HTTP endpoint.
"""

import logging
from pathlib import Path
from typing import Union

from prometheus_client import CollectorRegistry, Counter, Histogram, write_to_textfile

logger = logging.getLogger(__name__)

REGISTRY = CollectorRegistry()

dop_clamped_pixels = Counter(
    "polarsep_dop_clamped_pixels_total",
    "Pixels whose degree of polarization exceeded 1 and was clamped",
    registry=REGISTRY,
)

pairs_cleaned = Counter(
    "polarsep_pairs_cleaned_total",
    "Reflection/transmission pairs evaluated by the cleaning rule",
    ["reason"],
    registry=REGISTRY,
)

solver_iterations = Counter(
    "polarsep_solver_iterations_total",
    "Accepted projected-gradient iterations",
    ["stage"],
    registry=REGISTRY,
)

solver_errors = Counter(
    "polarsep_solver_errors_total",
    "Optimization stages aborted on a non-finite objective",
    ["stage"],
    registry=REGISTRY,
)

separation_duration = Histogram(
    "polarsep_separation_duration_seconds",
    "Wall time of a full two-stage separation",
    registry=REGISTRY,
)


def write_metrics(path: Union[str, Path]) -> None:
    """Write the registry in Prometheus text format."""
    write_to_textfile(str(path), REGISTRY)
    logger.info(f"Wrote metrics to {path}")
