"""
Separation Data Models

Solver configuration and result schemas for the two-stage reflection and
transmission separator.
"""

from typing import Dict, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from polarsep.models.losses import FeaturePyramidSpec
from polarsep.models.polarization import PolarizedStack
from polarsep.utils.validation import ParameterError, require_interval


class SeparatorConfig(BaseModel):
    """
    Weights and solver settings of the separator.

    The objective is evaluated on M normalized by its peak channel value,
    so ``step_size`` and ``tv_epsilon`` are in normalized units. The solver
    is deterministic; ``seed`` is recorded with the run for provenance.
    """

    model_config = ConfigDict(frozen=True)

    lambda_pol: float = 1.0
    lambda_pncc: float = 0.1
    lambda_tv: float = 0.01
    lambda_prox: float = 10.0
    step_size: float = 0.1
    max_iters: int = 500
    tol: float = 1e-6
    seed: int = 0
    tv_epsilon: float = 1e-3
    armijo: float = 1e-4
    min_step: float = 1e-12
    pyramid: FeaturePyramidSpec = Field(default_factory=FeaturePyramidSpec)

    @model_validator(mode="after")
    def _check(self) -> "SeparatorConfig":
        for name in ("lambda_pol", "lambda_pncc", "lambda_tv", "lambda_prox", "tol"):
            require_interval(name, getattr(self, name), low=0.0)
        for name in ("step_size", "tv_epsilon", "min_step"):
            require_interval(name, getattr(self, name), low=0.0, low_open=True)
        require_interval("armijo", self.armijo, low=0.0, high=1.0, high_open=True)
        if self.max_iters < 1:
            raise ParameterError(f"max_iters must be >= 1 (got {self.max_iters})")
        return self


class SeparationResult(BaseModel):
    """
    Estimated reflection stack and transmission intensity.

    ``objective_trace`` maps each stage name to its accepted objective
    values, each sequence non-increasing.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    R_hat: PolarizedStack
    T_hat: np.ndarray
    objective_trace: Dict[str, Tuple[float, ...]]
    converged: bool
    pncc_before: Optional[float] = None
    pncc_after: Optional[float] = None
    dop_histogram: Tuple[int, ...] = ()
    dop_bin_edges: Tuple[float, ...] = ()
    suspect_polarized_transmission: bool = False
    scale: float = 1.0

    @field_validator("T_hat", mode="before")
    @classmethod
    def _coerce(cls, value) -> np.ndarray:
        arr = np.array(value, dtype=np.float64)
        arr.setflags(write=False)
        return arr

    @property
    def stage1_trace(self) -> Tuple[float, ...]:
        return self.objective_trace.get("stage1", ())

    @property
    def stage2_trace(self) -> Tuple[float, ...]:
        return self.objective_trace.get("stage2", ())
