"""Mass-conserving gradient-flow relaxation toward minimizers.

Each step treats the diagonal linear symbol and a stabilization constant S
implicitly per mode and the potential derivative explicitly (dealiased):

    conserved H^-1:  phi' = (phi - dt k^2 (N - S phi)) / (1 + dt k^2 (symbol + S))
    projected L2:    phi' = (phi - dt (N - S phi)) / (1 + dt (symbol + S)), mean kept

with N = W'(phi). A step that raises the energy is rejected and retried with
half the time step; dt is never increased again. A rise within roundoff of E
is accepted while the field is not yet critical, since the energy can no
longer tell such steps apart.

A run counts as converged only when the mass-projected gradient is below
RESIDUAL_RTOL * (1 + ||phi||); a small energy change alone is not enough.
"""
from __future__ import annotations

import csv
import logging
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, NamedTuple

import numpy as np

from app.phasefield import jobs
from app.phasefield.energies import QuadraticModel, potential_energy, quadratic_energy, variational_gradient
from app.phasefield.errors import PreconditionError, RecordWriteError, StalledFlowError
from app.phasefield.spectral import Grid, SpectralField, norm_l2, pointwise, random_field

logger = logging.getLogger(__name__)

CONSERVED = "conserved-h-1"
PROJECTED = "projected-l2"
SCHEMES = (CONSERVED, PROJECTED)

MIN_DT = 1e-12
ROUNDOFF_RTOL = 1e-14
RESIDUAL_RTOL = 1e-4
MASS_TOL = 1e-12


@dataclass(frozen=True)
class FlowConfig:
    """Relaxation settings. ``stabilization=None`` means S = max|W''(phi)| / 2 per step."""

    scheme: str = CONSERVED
    dt: float = 1e-3
    max_steps: int = 200_000
    energy_tol: float = 1e-12
    seed: int = 0
    init_amplitude: float = 0.5
    init_band: int = 4
    stabilization: float | None = None

    def __post_init__(self) -> None:
        if self.scheme not in SCHEMES:
            raise PreconditionError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")
        if not self.dt > 0:
            raise PreconditionError(f"dt must be positive, got {self.dt}")
        if self.max_steps < 1:
            raise PreconditionError(f"max_steps must be positive, got {self.max_steps}")
        if not self.energy_tol > 0:
            raise PreconditionError(f"energy_tol must be positive, got {self.energy_tol}")
        if self.init_amplitude < 0:
            raise PreconditionError("init_amplitude must be non-negative")
        if self.init_band < 1:
            raise PreconditionError("init_band must be at least 1")
        if self.stabilization is not None and self.stabilization < 0:
            raise PreconditionError("stabilization must be non-negative")

    def to_dict(self) -> dict[str, Any]:
        return {
            "scheme": self.scheme,
            "dt": self.dt,
            "max_steps": self.max_steps,
            "energy_tol": self.energy_tol,
            "seed": self.seed,
            "init_amplitude": self.init_amplitude,
            "init_band": self.init_band,
            "stabilization": self.stabilization,
        }


class TraceRow(NamedTuple):
    step: int
    energy: float
    dt: float


@dataclass
class RelaxationResult:
    field: SpectralField
    trace: list[TraceRow]
    converged: bool
    residual: float

    @property
    def energy(self) -> float:
        return self.trace[-1].energy

    @property
    def steps(self) -> int:
        return self.trace[-1].step


@dataclass
class MultistartResult:
    best: RelaxationResult
    seeds: list[int]
    energies_by_seed: list[float | None] = field(default_factory=list)

    @property
    def energy(self) -> float:
        return self.best.energy

    @property
    def energies(self) -> list[float]:
        """Final energies of the finished restarts, lowest first."""
        return sorted(e for e in self.energies_by_seed if e is not None)


def flow_energy(phi: SpectralField, model: QuadraticModel) -> float:
    return quadratic_energy(phi, model) + potential_energy(phi, model.potential)


def residual_norm(phi: SpectralField, model: QuadraticModel) -> float:
    """L2 norm of the mass-projected variational gradient."""
    return norm_l2(variational_gradient(phi, model))


def is_critical(phi: SpectralField, model: QuadraticModel) -> bool:
    """Mass-projected gradient below RESIDUAL_RTOL * (1 + ||phi||)."""
    return residual_norm(phi, model) <= RESIDUAL_RTOL * (1.0 + norm_l2(phi))


def _step(
    phi: SpectralField, symbol: np.ndarray, k2: np.ndarray, model: QuadraticModel, dt: float, cfg: FlowConfig
) -> SpectralField:
    if cfg.stabilization is None:
        stab = 0.5 * float(np.max(np.abs(model.potential.d2(phi.padded_values()))))
    else:
        stab = cfg.stabilization
    nonlinear = pointwise(phi, model.potential.d1).spectrum
    current = phi.spectrum
    explicit = nonlinear - stab * current
    if cfg.scheme == CONSERVED:
        spectrum = (current - dt * k2 * explicit) / (1.0 + dt * k2 * (symbol + stab))
    else:
        spectrum = (current - dt * explicit) / (1.0 + dt * (symbol + stab))
        spectrum[phi.grid.zero_mode] = current[phi.grid.zero_mode]
    return SpectralField(phi.grid, spectrum=spectrum)


def relax(phi0: SpectralField, model: QuadraticModel, cfg: FlowConfig | None = None) -> RelaxationResult:
    """Descend the energy from ``phi0`` at fixed mass."""
    cfg = cfg or FlowConfig()
    if abs(phi0.mean - model.m) > MASS_TOL * (1.0 + abs(model.m)):
        raise PreconditionError(f"initial mean {phi0.mean!r} differs from m = {model.m!r}")

    grid = phi0.grid
    symbol = model.symbol(grid)
    k2 = grid.k_squared
    phi = phi0
    current = flow_energy(phi, model)
    trace = [TraceRow(0, current, cfg.dt)]

    residual = residual_norm(phi, model)
    if residual <= ROUNDOFF_RTOL * (1.0 + norm_l2(phi)):
        logger.debug("initial field is already critical")
        return RelaxationResult(phi, trace, True, residual)

    dt = cfg.dt
    converged = False
    step = 0
    while step < cfg.max_steps:
        candidate = _step(phi, symbol, k2, model, dt, cfg)
        energy = flow_energy(candidate, model)
        if energy > current:
            if energy - current > ROUNDOFF_RTOL * (1.0 + abs(current)):
                dt *= 0.5
                logger.debug("step %d: energy rose by %.3g, dt -> %.3g", step, energy - current, dt)
                if dt < MIN_DT:
                    raise StalledFlowError(f"time step underflow at step {step} (E = {current:.12g})", trace)
                continue
            if is_critical(phi, model):
                converged = True
                break
            # rise within roundoff: the energy no longer resolves the step, keep following the flow
        step += 1
        change = current - energy
        phi, current = candidate, energy
        trace.append(TraceRow(step, current, dt))
        if change <= cfg.energy_tol * (1.0 + abs(current)) and is_critical(phi, model):
            converged = True
            break

    residual = residual_norm(phi, model)
    if converged:
        logger.info("relaxed in %d steps: E = %.12g, residual %.3g", step, current, residual)
    else:
        logger.warning("relaxation hit max_steps=%d: E = %.12g, residual %.3g", cfg.max_steps, current, residual)
    return RelaxationResult(phi, trace, converged, residual)


def random_initial(m: float, cfg: FlowConfig, grid: Grid) -> SpectralField:
    """m plus a zero-mean random perturbation of RMS ``init_amplitude``, modes |j| <= init_band."""
    if cfg.init_amplitude == 0:
        return SpectralField.constant(grid, m)
    rng = np.random.default_rng(cfg.seed)
    return random_field(grid, rng, cfg.init_band, mean=m, rms=cfg.init_amplitude)


def multistart_min(
    model: QuadraticModel,
    grid: Grid,
    restarts: int,
    cfg: FlowConfig | None = None,
    *,
    threads: int | None = 1,
    initial: Callable[[FlowConfig], SpectralField] | None = None,
) -> MultistartResult:
    """Relax from seeds seed..seed+restarts-1 and keep the lowest energy.

    Ties go to the earlier seed. Stalled restarts are skipped unless all stall.
    """
    cfg = cfg or FlowConfig()
    if restarts < 1:
        raise PreconditionError(f"restarts must be at least 1, got {restarts}")
    seeds = [cfg.seed + i for i in range(restarts)]
    make_initial = initial or (lambda c: random_initial(model.m, c, grid))

    def run(seed: int) -> RelaxationResult:
        return relax(make_initial(replace(cfg, seed=seed)), model, replace(cfg, seed=seed))

    outcomes = jobs.run_points(run, seeds, threads)
    stalled: list[StalledFlowError] = []
    results: list[RelaxationResult | None] = []
    for outcome in outcomes:
        if isinstance(outcome.error, StalledFlowError):
            stalled.append(outcome.error)
            results.append(None)
            continue
        results.append(outcome.unwrap())

    finished = [(res.energy, i, res) for i, res in enumerate(results) if res is not None]
    if not finished:
        raise stalled[0]
    _, index, best = min(finished, key=lambda item: (item[0], item[1]))
    logger.info("multistart best E = %.12g from seed %d", best.energy, seeds[index])
    return MultistartResult(best, seeds, [None if res is None else res.energy for res in results])


def write_trace_csv(trace: Sequence[TraceRow], path: Path) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(TraceRow._fields)
            for row in trace:
                writer.writerow([row.step, repr(row.energy), repr(row.dt)])
    except OSError as exc:
        raise RecordWriteError(f"Could not write {path}: {exc}") from exc


def distance_to_constant(phi: SpectralField, m: float) -> float:
    return norm_l2(phi.shifted(-m))
