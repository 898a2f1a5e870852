from __future__ import annotations

import os

import pytest
from hypothesis import HealthCheck, settings

from qpulse.units import FS

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

TAU0 = 100 * FS


@pytest.fixture
def tau0() -> float:
    return TAU0


@pytest.fixture(scope="session")
def fig5_spectrograms():
    """Spectrograms of the three bundled fig5 recipes, computed once per session."""
    from qpulse.cli import compute_spectrogram
    from qpulse.config import load_recipe

    return {k: compute_spectrogram(load_recipe(f"fig5{k}")) for k in "abc"}


@pytest.fixture(scope="session")
def recipe_sweep():
    """Memoized ``run_sweep`` of a bundled sweep recipe (fig3, fig4a, fig4b, fig4c)."""
    from qpulse.config import load_recipe
    from qpulse.sweeps import run_sweep

    cache = {}

    def get(name):
        if name not in cache:
            cache[name] = run_sweep(load_recipe(name).sweep_plan())
        return cache[name]

    return get
