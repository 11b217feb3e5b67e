"""The rescaled thin-film energy on [0,1)^2 x (0,1) and its two-dimensional limit.

    F_{L,h}(phi) = integral of 1/2 (alpha phi + L^-2 Lap' phi + (L h)^-2 d33 phi)^2 + W(phi)

In-plane axes are periodic; the vertical axis is a cosine series, so the
null-flux condition at x3 = 0 and x3 = 1 holds for every admissible field.
The symbol of the quadratic part is (alpha - |k'|^2/L^2 - pi^2 p^2/(L h)^2)^2.
"""
from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, replace
from typing import Any, NamedTuple

import numpy as np

from app.phasefield import jobs
from app.phasefield.energies import (
    ModelParams,
    potential_energy,
    quadratic_energy,
    variational_gradient,
)
from app.phasefield.errors import InvalidGridError, PreconditionError, ResonanceError
from app.phasefield.lattice import FOUR_PI_SQ, representable_norms, search_bound
from app.phasefield.potentials import Potential
from app.phasefield.records import FilmRecord
from app.phasefield.relaxation import (
    FlowConfig,
    RelaxationResult,
    multistart_min,
    random_initial,
    relax,
)
from app.phasefield.spectral import (
    NEUMANN,
    PERIODIC,
    Grid,
    RealArray,
    SpectralField,
    inner,
    integrate_product,
    partial_derivative,
    random_field,
    translation_aligned_distance,
)

logger = logging.getLogger(__name__)

RESONANCE_TOL = 1e-9
DEFAULT_H_LIST = (0.2, 0.1, 0.05)
DEFAULT_L_LIST = (1.1, 1.05, 1.0)


def resonant(alpha: float, L: float) -> bool:
    """Does alpha equal |k|^2 / L^2 for some nonzero k in 2 pi Z^2 (within 1e-9)?"""
    target = alpha * L * L
    if target <= 0:
        return False
    for q in representable_norms(2, search_bound(alpha=target)):
        if abs(alpha - FOUR_PI_SQ * q / (L * L)) <= RESONANCE_TOL * (1.0 + abs(alpha)):
            return True
    return False


@dataclass(frozen=True)
class ThinFilmParams:
    L: float
    h: float
    alpha: float
    m: float
    potential: Potential

    def __post_init__(self) -> None:
        if not (self.L > 0 and math.isfinite(self.L)):
            raise PreconditionError(f"L must be positive, got {self.L}")
        if not (self.h > 0 and math.isfinite(self.h)):
            raise PreconditionError(f"h must be positive, got {self.h}")

    @property
    def resonant(self) -> bool:
        return resonant(self.alpha, self.L)

    def symbol(self, grid: Grid) -> RealArray:
        require_film_grid(grid)
        vertical = grid.axis_k_squared(grid.rank - 1)
        return (self.alpha - grid.inplane_k_squared / self.L**2 - vertical / (self.L * self.h) ** 2) ** 2

    def limit(self) -> ModelParams:
        """The two-dimensional PFC model the film energies converge to."""
        return ModelParams.pfc(self.alpha, self.m, self.potential)

    def describe(self) -> dict[str, Any]:
        return {"L": self.L, "h": self.h, "alpha": self.alpha, "m": self.m, "potential": self.potential.describe()}


def require_film_grid(grid: Grid) -> None:
    if grid.rank != 3 or grid.axis_kinds != (PERIODIC, PERIODIC, NEUMANN):
        raise InvalidGridError(
            f"film fields need periodic, periodic, neumann axes; got {grid.axis_kinds}"
        )


def flh_energy(phi: SpectralField, params: ThinFilmParams) -> float:
    require_film_grid(phi.grid)
    return quadratic_energy(phi, params) + potential_energy(phi, params.potential)


def flh_gradient(phi: SpectralField, params: ThinFilmParams) -> SpectralField:
    require_film_grid(phi.grid)
    return variational_gradient(phi, params)


def relax3d(phi0: SpectralField, params: ThinFilmParams, cfg: FlowConfig | None = None) -> RelaxationResult:
    require_film_grid(phi0.grid)
    return relax(phi0, params, cfg)


def vertical_energy(phi: SpectralField) -> float:
    """Integral of (d3 phi)^2 over the film."""
    require_film_grid(phi.grid)
    d3 = partial_derivative(phi, 2)
    return inner(d3, d3)


class CrossingResiduals(NamedTuple):
    r1: float
    r2: float
    scale: float


def h2_norm_squared(phi: SpectralField) -> float:
    k2 = phi.grid.k_squared
    return float(np.sum(phi.grid.weights * (1.0 + k2 + k2 * k2) * np.abs(phi.spectrum) ** 2))


def crossing_identity_check(phi: SpectralField) -> CrossingResiduals:
    """Integration-by-parts identities of the film, evaluated two independent ways.

    r1 = |int phi d33 phi + int (d3 phi)^2| and
    r2 = max_j |int djj phi d33 phi - int (dj3 phi)^2|; left sides by padded
    quadrature, right sides by Parseval. ``scale`` is 1 + ||phi||_{H2}^2.
    """
    require_film_grid(phi.grid)
    d3 = partial_derivative(phi, 2)
    d33 = partial_derivative(d3, 2)
    r1 = abs(integrate_product(phi, d33) + inner(d3, d3))
    r2 = 0.0
    for axis in (0, 1):
        dj = partial_derivative(phi, axis)
        djj = partial_derivative(dj, axis)
        dj3 = partial_derivative(dj, 2)
        r2 = max(r2, abs(integrate_product(djj, d33) - inner(dj3, dj3)))
    return CrossingResiduals(r1, r2, 1.0 + h2_norm_squared(phi))


def poincare_ratio(phi: SpectralField) -> float:
    """int (d33 phi)^2 / int (d3 phi)^2, at least pi^2 for admissible fields."""
    d3 = partial_derivative(phi, 2)
    d33 = partial_derivative(d3, 2)
    denominator = inner(d3, d3)
    if denominator == 0:
        raise PreconditionError("the field has no vertical variation")
    return inner(d33, d33) / denominator


class CoercivityCheck(NamedTuple):
    lhs: float
    rhs: float
    c_min: float


def inplane_coercivity_check(phi: SpectralField, L: float, alpha: float) -> CoercivityCheck:
    """Both sides of int (L^2 alpha phi + Lap' phi)^2 >= L^4 alpha^2 m^2 + c_min int (Lap' phi)^2.

    c_min = min over k != 0 in 2 pi Z^2 of (L^2 alpha / |k|^2 - 1)^2.
    """
    grid = phi.grid
    target = L * L * alpha
    norms = np.asarray(representable_norms(2, search_bound(alpha=abs(target))), dtype=float)
    c_min = float(np.min((target / (FOUR_PI_SQ * norms) - 1.0) ** 2))
    kp2 = grid.inplane_k_squared
    power = grid.weights * np.abs(phi.spectrum) ** 2
    lhs = float(np.sum(power * (target - kp2) ** 2))
    rhs = target**2 * phi.mean**2 + c_min * float(np.sum(power * kp2**2))
    return CoercivityCheck(lhs, rhs, c_min)


def vertical_average(phi: SpectralField) -> SpectralField:
    """The p = 0 cosine slice as a periodic two-dimensional field."""
    require_film_grid(phi.grid)
    plane = Grid(phi.grid.shape[:2])
    return SpectralField(plane, spectrum=np.array(phi.spectrum[..., 0]))


def extend_vertically(phi2: SpectralField, n_vertical: int) -> SpectralField:
    """The x3-invariant film field equal to ``phi2`` on every layer."""
    if phi2.grid.rank != 2 or phi2.grid.neumann:
        raise InvalidGridError("only periodic two-dimensional fields extend to films")
    grid = Grid(phi2.grid.shape + (n_vertical,), (PERIODIC, PERIODIC, NEUMANN))
    spectrum = np.zeros(grid.shape, dtype=complex)
    spectrum[..., 0] = phi2.spectrum
    return SpectralField(grid, spectrum=spectrum)


def film_initial(m: float, cfg: FlowConfig, grid: Grid) -> SpectralField:
    """In-plane part from the same seed as the 2D run plus an explicit vertical part.

    Each part carries half of the perturbation energy.
    """
    require_film_grid(grid)
    plane = Grid(grid.shape[:2])
    half = cfg.init_amplitude / math.sqrt(2.0)
    inplane = extend_vertically(random_initial(0.0, replace(cfg, init_amplitude=half), plane), grid.shape[2])
    if half == 0:
        return inplane.shifted(m)
    rng = np.random.default_rng([cfg.seed, 1])
    vertical = random_field(grid, rng, cfg.init_band)
    spectrum = np.array(vertical.spectrum)
    spectrum[..., 0] = 0.0
    vertical = SpectralField(grid, spectrum=spectrum)
    size = math.sqrt(max(inner(vertical, vertical), 0.0))
    if size > 0:
        vertical = vertical * (half / size)
    return (inplane + vertical).shifted(m)


def _sequence_points(h_list: Sequence[float], L_list: Sequence[float]) -> list[tuple[float, float]]:
    if not h_list:
        raise PreconditionError("the h sequence is empty")
    if any(b >= a for a, b in zip(h_list, h_list[1:])):
        raise PreconditionError(f"h values must decrease, got {list(h_list)}")
    if len(L_list) == 1:
        L_list = list(L_list) * len(h_list)
    if len(L_list) != len(h_list):
        raise PreconditionError(f"{len(L_list)} L values for {len(h_list)} h values")
    return list(zip(L_list, h_list))


def gamma_sequence_experiment(
    h_list: Sequence[float],
    L_list: Sequence[float],
    alpha: float,
    m: float,
    potential: Potential,
    *,
    grid: Grid | None = None,
    cfg: FlowConfig | None = None,
    restarts: int = 4,
    threads: int | None = 1,
) -> list[FilmRecord]:
    """Minimize F_{L,h} along a sequence of (L, h) and compare with the 2D minimizer.

    The 2D reference comes from the same multistart settings on the in-plane
    grid. Failed points are reported in their record and do not stop the rest.
    """
    grid = grid or Grid.film()
    require_film_grid(grid)
    cfg = cfg or FlowConfig()
    points = _sequence_points(h_list, L_list)
    for L, h in points:
        if resonant(alpha, L):
            raise ResonanceError(f"alpha = {alpha} is resonant at L = {L}: coercivity fails")

    plane = Grid(grid.shape[:2])
    reference = multistart_min(ModelParams.pfc(alpha, m, potential), plane, restarts, cfg, threads=threads)
    reference_field = reference.best.field
    logger.info("2D reference energy %.12g", reference.energy)

    def run(point: tuple[float, float]) -> FilmRecord:
        L, h = point
        params = ThinFilmParams(L, h, alpha, m, potential)
        result = multistart_min(
            params, grid, restarts, cfg, initial=lambda c: film_initial(m, c, grid)
        ).best
        vertical = vertical_energy(result.field)
        distance = translation_aligned_distance(vertical_average(result.field), reference_field)
        logger.info("L = %g, h = %g: E = %.12g, vertical %.3g", L, h, result.energy, vertical)
        return FilmRecord(
            L=L,
            h=h,
            energy3d=result.energy,
            energy2d_ref=reference.energy,
            vertical_energy=vertical,
            vertical_energy_over_h4=vertical / h**4,
            dist_to_2d=distance,
            mass_drift=abs(result.field.mean - m),
            restarts=restarts,
            seed=cfg.seed,
        )

    records = []
    for (L, h), outcome in zip(points, jobs.run_points(run, points, threads), strict=True):
        if outcome.ok:
            records.append(outcome.unwrap())
            continue
        logger.warning("L = %g, h = %g failed: %s", L, h, outcome.error)
        records.append(
            FilmRecord(L, h, None, reference.energy, None, None, None, None, restarts, cfg.seed, str(outcome.error))
        )
    return records
