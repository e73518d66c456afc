"""Shared fixtures for the polarsep test suite."""

import math

import numpy as np
import pytest

from polarsep.config.settings import reset_settings
from polarsep.models.polarization import PolarizedStack
from polarsep.models.synthesis import SynthConfig
from polarsep.services.synthesis import make_triple, random_texture


@pytest.fixture(autouse=True)
def _fresh_settings(monkeypatch):
    for name in ("POLARSEP_WORKERS", "POLARSEP_LOG_LEVEL"):
        monkeypatch.delenv(name, raising=False)
    reset_settings()
    yield
    reset_settings()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def random_stack(rng):
    def build(height=6, width=5, white_level=4095.0):
        return PolarizedStack(channels=rng.uniform(0, white_level, size=(4, height, width)), white_level=white_level)

    return build


@pytest.fixture
def small_triple():
    """Noise-free 32x32 triple with unpolarized transmission near the Brewster angle."""
    rng = np.random.default_rng(7)
    base_r = random_texture((32, 32), rng)
    base_t = random_texture((32, 32), rng)
    cfg = SynthConfig(theta_i=math.radians(60.0), rho_t_override=0.0, seed=7)
    return make_triple(base_r, base_t, cfg)
