"""Shared fixtures for the phasefield tests."""
from pathlib import Path

import numpy as np
import pytest

from app.phasefield.energies import ModelParams
from app.phasefield.potentials import Potential
from app.phasefield.spectral import Grid, SpectralField

REPO_ROOT = Path(__file__).resolve().parents[1]

TWO_PI = 2.0 * np.pi
FOUR_PI_SQ = 4.0 * np.pi**2


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def line():
    return Grid((16,))


@pytest.fixture
def square():
    return Grid((16, 16))


@pytest.fixture
def film():
    return Grid.film(8, 8)


@pytest.fixture
def double_well():
    return Potential.double_well(1.0)


@pytest.fixture
def pfc_params(double_well):
    return ModelParams.pfc(1.0, 0.0, double_well)


@pytest.fixture
def cosine():
    """Factory for cos(2 pi k x_axis) sampled on a grid."""

    def make(grid: Grid, k: int = 1, axis: int = 0) -> SpectralField:
        return SpectralField.from_function(grid, lambda *x: np.cos(TWO_PI * k * x[axis]))

    return make
