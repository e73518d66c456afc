"""
Run Metadata and Tabular Outputs

Every CLI run writes a JSON sidecar describing its inputs, configuration,
seed, package versions, outputs and status. Tables are written as CSV with
a header row, '.' decimals and LF line endings.
"""

import json
import logging
import platform
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field

import polarsep

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def _versions() -> Dict[str, str]:
    import scipy

    return {
        "polarsep": polarsep.__version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "pandas": pd.__version__,
    }


class RunMetadata(BaseModel):
    """JSON sidecar written next to the outputs of a CLI run."""

    command: str
    status: str = "ok"
    inputs: Dict[str, Any] = Field(default_factory=dict)
    config: Dict[str, Any] = Field(default_factory=dict)
    seed: Optional[int] = None
    outputs: List[str] = Field(default_factory=list)
    results: Dict[str, Any] = Field(default_factory=dict)
    error: Optional[str] = None
    versions: Dict[str, str] = Field(default_factory=_versions)
    created_at: str = Field(default_factory=lambda: datetime.now(timezone.utc).isoformat())


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, float) and not np.isfinite(value):
        return str(value)
    if isinstance(value, Path):
        return str(value)
    return value


def write_metadata(path: PathLike, metadata: RunMetadata) -> None:
    """Write the sidecar as indented JSON."""
    payload = _jsonable(metadata.model_dump())
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    logger.info(f"Wrote metadata to {path}")


def write_csv(path: PathLike, frame: pd.DataFrame) -> None:
    """Write a table with a header row and LF line endings."""
    frame.to_csv(path, index=False, lineterminator="\n", float_format="%.10g")
    logger.info(f"Wrote {len(frame)} rows to {path}")
