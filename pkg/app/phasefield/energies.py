"""PFC and Ohta-Kawasaki energies on the unit torus, their gradients and the quartic split.

Both energies are a diagonal quadratic form plus a local potential term:

    E(phi) = 1/2 * sum_k weight_k |phi_k|**2 symbol(k) + integral W(phi)

with symbol (alpha - |k|**2)**2 for PFC and |k|**2/gamma**2 + 1/|k|**2 (k != 0)
for Ohta-Kawasaki. Energies are per unit volume. The potential integral uses
the padded grid, which is exact for polynomial W up to degree four.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import Any, Protocol

import numpy as np

from app.phasefield.errors import InvalidGridError, ModelMismatchError, PreconditionError
from app.phasefield.potentials import Potential
from app.phasefield.spectral import (
    Grid,
    RealArray,
    SpectralField,
    inverse_laplacian_zero_mean,
    integrate_product,
    moments,
    norm_l2,
    partial_derivative,
    pointwise,
)

logger = logging.getLogger(__name__)

PFC = "pfc"
OK = "ok"
MODELS = (PFC, OK)

MEAN_TOLERANCE = 1e-10


class QuadraticModel(Protocol):
    """What a gradient flow needs: a diagonal symbol, a potential and the mass."""

    @property
    def m(self) -> float: ...

    @property
    def potential(self) -> Potential: ...

    def symbol(self, grid: Grid) -> RealArray: ...


@dataclass(frozen=True)
class ModelParams:
    model: str
    m: float
    potential: Potential
    alpha: float = 0.0
    gamma: float = 1.0

    def __post_init__(self) -> None:
        if self.model not in MODELS:
            raise ModelMismatchError(f"unknown model {self.model!r}; expected one of {MODELS}")
        for name in ("m", "alpha", "gamma"):
            if not math.isfinite(getattr(self, name)):
                raise PreconditionError(f"{name} must be finite")
        if self.model == OK and self.gamma <= 0:
            raise PreconditionError(f"gamma must be positive, got {self.gamma}")

    @classmethod
    def pfc(cls, alpha: float, m: float, potential: Potential) -> ModelParams:
        return cls(PFC, float(m), potential, alpha=float(alpha))

    @classmethod
    def ok(cls, gamma: float, m: float, potential: Potential) -> ModelParams:
        return cls(OK, float(m), potential, gamma=float(gamma))

    def with_mass(self, m: float) -> ModelParams:
        return replace(self, m=float(m))

    def with_potential(self, potential: Potential) -> ModelParams:
        return replace(self, potential=potential)

    def require(self, model: str) -> None:
        if self.model != model:
            raise ModelMismatchError(f"expected a {model} model, got {self.model}")

    def symbol(self, grid: Grid) -> RealArray:
        k2 = grid.k_squared
        if grid.neumann:
            raise InvalidGridError("bulk energies live on periodic grids; use the thin-film energy")
        if self.model == PFC:
            return (self.alpha - k2) ** 2
        inverse = np.divide(1.0, k2, out=np.zeros_like(k2), where=k2 > 0)
        return k2 / self.gamma**2 + inverse

    def describe(self) -> dict[str, Any]:
        body: dict[str, Any] = {"model": self.model, "m": self.m, "potential": self.potential.describe()}
        if self.model == PFC:
            body["alpha"] = self.alpha
        else:
            body["gamma"] = self.gamma
        return body


@dataclass(frozen=True)
class AbcTriple:
    A: float
    B: float
    C: float

    def polynomial(self, t: float) -> float:
        return self.A * t * t + self.B * t**3 + self.C * t**4

    def to_dict(self) -> dict[str, float]:
        return {"A": self.A, "B": self.B, "C": self.C}


def quadratic_energy(phi: SpectralField, model: QuadraticModel) -> float:
    grid = phi.grid
    return 0.5 * float(np.sum(grid.weights * model.symbol(grid) * np.abs(phi.spectrum) ** 2))


def potential_energy(phi: SpectralField, potential: Potential) -> float:
    return float(np.mean(potential.value(phi.padded_values())))


def pfc_energy(phi: SpectralField, params: ModelParams) -> float:
    params.require(PFC)
    return quadratic_energy(phi, params) + potential_energy(phi, params.potential)


def ok_energy(phi: SpectralField, params: ModelParams) -> float:
    params.require(OK)
    return quadratic_energy(phi, params) + potential_energy(phi, params.potential)


def energy(phi: SpectralField, params: ModelParams) -> float:
    if params.model == PFC:
        return pfc_energy(phi, params)
    return ok_energy(phi, params)


def uniform_energy(params: ModelParams) -> float:
    """E(m) of the constant state, in closed form."""
    m = params.m
    base = float(params.potential.value(m))
    if params.model == PFC:
        return 0.5 * params.alpha**2 * m * m + base
    return base


def ok_hminus1_spectral(phi: SpectralField) -> float:
    """||phi - mean||^2 in H^-1, as sum over k != 0 of |phi_k|^2 / |k|^2."""
    k2 = phi.grid.k_squared
    inverse = np.divide(1.0, k2, out=np.zeros_like(k2), where=k2 > 0)
    return float(np.sum(phi.grid.weights * inverse * np.abs(phi.spectrum) ** 2))


def ok_hminus1_real_space(phi: SpectralField) -> float:
    """The same norm through psi = (-Laplacian)^-1 (phi - mean), as the integral of |grad psi|^2."""
    psi = inverse_laplacian_zero_mean(phi)
    total = 0.0
    for axis in range(phi.grid.rank):
        d = partial_derivative(psi, axis)
        total += integrate_product(d, d)
    return total


def variational_gradient(phi: SpectralField, model: QuadraticModel) -> SpectralField:
    """Mass-projected first variation: symbol * phi + W'(phi), minus its mean."""
    nonlinear = pointwise(phi, model.potential.d1)
    spectrum = model.symbol(phi.grid) * phi.spectrum + nonlinear.spectrum
    spectrum[phi.grid.zero_mode] = 0.0
    return SpectralField(phi.grid, spectrum=spectrum)


def _require_zero_mean(u: SpectralField) -> None:
    if abs(u.mean) > MEAN_TOLERANCE * (1.0 + norm_l2(u)):
        raise PreconditionError(f"direction must have zero mean, got mean {u.mean:.3e}")


def second_variation(params: ModelParams, u: SpectralField) -> float:
    """d^2/dt^2 E(m + t u) at t = 0 for zero-mean u (twice the A coefficient)."""
    quad = 2.0 * quadratic_energy(u, params)
    m2, _, _ = moments(u)
    return quad + float(params.potential.d2(params.m)) * m2


def abc_decomposition(u: SpectralField, params: ModelParams) -> AbcTriple:
    """A, B, C with E(m + t u) - E(m) >= A t^2 + B t^3 + C t^4 (equality for constant d4)."""
    _require_zero_mean(u)
    w = params.potential.require_w()
    m2, m3, m4 = moments(u)
    quad = 2.0 * quadratic_energy(u, params)
    a_coef = 0.5 * (quad + float(params.potential.d2(params.m)) * m2)
    b_coef = float(params.potential.d3(params.m)) / 6.0 * m3
    c_coef = w * w / 24.0 * m4
    return AbcTriple(a_coef, b_coef, c_coef)


def quartic_exactness_residual(u: SpectralField, t: float, params: ModelParams) -> float:
    params.potential.require_constant_d4()
    abc = abc_decomposition(u, params)
    shifted = (t * u).shifted(params.m)
    direct = energy(shifted, params) - uniform_energy(params)
    return abs(direct - abc.polynomial(t))


def taylor_lower_bound(phi: SpectralField, params: ModelParams) -> float:
    """W(m) + W''(m)/2 M2 + W'''(m)/6 M3 + w^2/24 M4 of u = phi - m; bounds the potential integral."""
    potential = params.potential
    u = phi.shifted(-params.m)
    m2, m3, m4 = moments(u)
    m = params.m
    return (
        float(potential.value(m))
        + 0.5 * float(potential.d2(m)) * m2
        + float(potential.d3(m)) / 6.0 * m3
        + potential.w**2 / 24.0 * m4
    )
