"""
Curve Plots

Optional PNG renderings of the DoP and PNCC curves.
"""

import logging
from pathlib import Path
from typing import Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402

logger = logging.getLogger(__name__)


def plot_dop_curve(curve: pd.DataFrame, path: Union[str, Path], n: float) -> None:
    """Plot reflected and transmitted DoP against incidence angle."""
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(curve["theta_deg"], curve["rho_r"], label="reflected")
    ax.plot(curve["theta_deg"], curve["rho_t"], label="transmitted")
    ax.set_xlabel("incidence angle (deg)")
    ax.set_ylabel("degree of polarization")
    ax.set_title(f"n = {n}")
    ax.set_xlim(0, 90)
    ax.set_ylim(0, 1.05)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    logger.info(f"Saved DoP plot to {path}")


def plot_pncc_curve(curve: pd.DataFrame, path: Union[str, Path]) -> None:
    """Plot PNCC against the mixing coefficient alpha."""
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(curve["alpha"], curve["pncc"], marker="o")
    ax.set_xlabel("alpha")
    ax.set_ylabel("PNCC")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    logger.info(f"Saved PNCC plot to {path}")
