"""Spectral identity suite behind ``selftest``.

Each check evaluates one identity two independent ways (Parseval sums on the
stored spectrum against quadrature on the padded grid) over seeded random
band-limited fields, and reports the worst relative residual.
"""
from __future__ import annotations

import logging
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np

from app.phasefield.energies import ok_hminus1_real_space, ok_hminus1_spectral
from app.phasefield.spectral import Grid, SpectralField, integrate_product, laplacian, plancherel_quadratic, random_field
from app.phasefield.thin_film import crossing_identity_check

logger = logging.getLogger(__name__)

DEFAULT_SAMPLES = 50
DEFAULT_TOLERANCE = 1e-10


@dataclass(frozen=True)
class CheckResult:
    name: str
    samples: int
    worst: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.worst <= self.tolerance

    def to_dict(self) -> dict[str, object]:
        return {
            "name": self.name,
            "samples": self.samples,
            "worst": self.worst,
            "tolerance": self.tolerance,
            "passed": self.passed,
        }


def _relative(a: float, b: float) -> float:
    return abs(a - b) / (1.0 + max(abs(a), abs(b)))


def _grids() -> dict[int, Grid]:
    return {1: Grid((32,)), 2: Grid((16, 16)), 3: Grid((8, 8, 8))}


def _worst(samples: int, seed: int, draw: Callable[[np.random.Generator], float]) -> float:
    rng = np.random.default_rng(seed)
    return max(draw(rng) for _ in range(samples))


def check_plancherel(rank: int, samples: int, seed: int, tolerance: float) -> CheckResult:
    grid = _grids()[rank]
    band = grid.shape[0] // 2 - 1

    def draw(rng: np.random.Generator) -> float:
        phi = random_field(grid, rng, band, mean=float(rng.normal()), rms=1.0)
        alpha = float(rng.uniform(-50.0, 50.0))
        linear = alpha * phi + laplacian(phi)
        return _relative(plancherel_quadratic(phi, alpha), integrate_product(linear, linear))

    return CheckResult(f"plancherel rank {rank}", samples, _worst(samples, seed, draw), tolerance)


def check_hminus1(rank: int, samples: int, seed: int, tolerance: float) -> CheckResult:
    grid = _grids()[rank]
    band = grid.shape[0] // 2 - 1

    def draw(rng: np.random.Generator) -> float:
        phi = random_field(grid, rng, band, mean=float(rng.normal()), rms=1.0)
        return _relative(ok_hminus1_spectral(phi), ok_hminus1_real_space(phi))

    return CheckResult(f"negative Sobolev norm rank {rank}", samples, _worst(samples, seed, draw), tolerance)


def check_crossing(samples: int, seed: int, tolerance: float) -> CheckResult:
    grid = Grid.film(8, 8)

    def draw(rng: np.random.Generator) -> float:
        phi: SpectralField = random_field(grid, rng, 3, mean=float(rng.normal()), rms=1.0)
        residuals = crossing_identity_check(phi)
        return max(residuals.r1, residuals.r2) / residuals.scale

    return CheckResult("film crossing identities", samples, _worst(samples, seed, draw), tolerance)


def run_suite(
    samples: int = DEFAULT_SAMPLES, seed: int = 0, tolerance: float = DEFAULT_TOLERANCE
) -> list[CheckResult]:
    results = []
    for rank in (1, 2, 3):
        results.append(check_plancherel(rank, samples, seed + rank, tolerance))
        results.append(check_hminus1(rank, samples, seed + 10 + rank, tolerance))
    results.append(check_crossing(samples, seed + 20, tolerance))
    for result in results:
        log = logger.info if result.passed else logger.error
        log("%s: worst %.3e (tol %.0e)", result.name, result.worst, result.tolerance)
    return results
