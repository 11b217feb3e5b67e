"""Pseudospectral phase-field energies and the global-optimality oracle for the uniform state.

The CLI in ``app.cli`` is a thin layer over this package.
"""
from app.phasefield.energies import ModelParams
from app.phasefield.errors import NumericalFailure, PreconditionError
from app.phasefield.oracle import SearchConfig, Verdict, decide_uniform
from app.phasefield.potentials import Potential
from app.phasefield.spectral import Grid, SpectralField

__all__ = [
    "Grid",
    "ModelParams",
    "NumericalFailure",
    "Potential",
    "PreconditionError",
    "SearchConfig",
    "SpectralField",
    "Verdict",
    "decide_uniform",
]
