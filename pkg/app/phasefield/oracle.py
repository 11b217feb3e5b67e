"""Is the uniform state m a global minimizer?

The answer is built from three pieces:

* the stability margin W''(m) + min over the lattice of the model symbol, in
  closed form;
* the optimal constant of the cubic-quartic interpolation inequality (the
  infimum over zero-mean u of Quad(u) * M4(u) / M3(u)^2), bounded below in
  closed form and estimated from above by multistart nonlinear conjugate
  gradients;
* the threshold W'''(m)^2 / (3 w^2) that the constant has to clear.

Only the closed-form lower bound ever certifies global optimality. A "not
global" verdict always carries a field whose energy was evaluated directly and
found below E(m).
"""
from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Any, NamedTuple

import numpy as np
from scipy.optimize import minimize_scalar

from app.phasefield import jobs
from app.phasefield.energies import (
    PFC,
    ModelParams,
    abc_decomposition,
    energy,
    uniform_energy,
)
from app.phasefield.errors import (
    ContractViolation,
    DegenerateDirectionError,
    EstimationFailedError,
    PreconditionError,
    UnsupportedPotentialError,
)
from app.phasefield.lattice import FOUR_PI_SQ, LatticeMinResult, lattice_min_ok, lattice_min_pfc
from app.phasefield.spectral import Grid, SpectralField, inner, moments, pointwise, random_field

logger = logging.getLogger(__name__)

CONTRACT_SLACK = 1e-8
DEGENERATE_M3 = 1e-8
RESONANCE_RTOL = 1e-12
VERIFY_RTOL = 1e-9

# Dimensions below which minimizers are known to exist; recorded, not enforced.
EXISTENCE_DIMENSION_BOUND = {"pfc": 12, "ok": 6}


class Verdict(str, enum.Enum):
    CERTIFIED_GLOBAL = "CertifiedGlobal"
    CERTIFIED_GLOBAL_UNIQUE = "CertifiedGlobalUnique"
    CERTIFIED_NOT_GLOBAL = "CertifiedNotGlobal"
    UNSTABLE_NOT_GLOBAL = "UnstableNotGlobal"
    UNDETERMINED = "Undetermined"

    @property
    def is_certified_global(self) -> bool:
        return self in (Verdict.CERTIFIED_GLOBAL, Verdict.CERTIFIED_GLOBAL_UNIQUE)

    @property
    def is_not_global(self) -> bool:
        return self in (Verdict.CERTIFIED_NOT_GLOBAL, Verdict.UNSTABLE_NOT_GLOBAL)


@dataclass(frozen=True)
class SearchConfig:
    """Settings of the optimal-constant estimator. ``band=None`` picks 8 up to rank 2, 4 in 3D."""

    band: int | None = None
    restarts: int = 16
    seed: int = 0
    max_iterations: int = 5000
    gradient_tol: float = 1e-8
    threads: int | None = 1

    def __post_init__(self) -> None:
        if self.band is not None and self.band < 2:
            raise PreconditionError(f"band must be at least 2, got {self.band}")
        if self.restarts < 1:
            raise PreconditionError(f"restarts must be at least 1, got {self.restarts}")
        if self.max_iterations < 1:
            raise PreconditionError("max_iterations must be positive")
        if not self.gradient_tol > 0:
            raise PreconditionError("gradient_tol must be positive")
        if self.threads is not None and self.threads < 1:
            raise PreconditionError(f"threads must be at least 1, got {self.threads}")

    def band_for(self, dim: int) -> int:
        if self.band is not None:
            return self.band
        return 8 if dim <= 2 else 4

    def to_dict(self) -> dict[str, Any]:
        return {
            "band": self.band,
            "restarts": self.restarts,
            "seed": self.seed,
            "max_iterations": self.max_iterations,
            "gradient_tol": self.gradient_tol,
        }


class Stability(NamedTuple):
    stable: bool
    margin: float
    lattice: LatticeMinResult


@dataclass
class PnEstimate:
    upper_bound: float
    witness: SpectralField
    lower_bound: float | None
    restarts_used: int
    iterations: int
    band: int
    diagnostics: list[dict[str, Any]] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return {
            "lower_bound": self.lower_bound,
            "upper_bound": self.upper_bound,
            "restarts_used": self.restarts_used,
            "iterations": self.iterations,
            "band": self.band,
        }


@dataclass
class Decision:
    verdict: Verdict
    margin: float
    threshold: float | None
    witness: SpectralField | None = None
    lower_bound: float | None = None
    upper_bound: float | None = None
    energy_gap: float | None = None
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return {
            "verdict": self.verdict.value,
            "margin": self.margin,
            "threshold": self.threshold,
            "lower_bound": self.lower_bound,
            "upper_bound": self.upper_bound,
            "energy_gap": self.energy_gap,
            "notes": list(self.notes),
        }


# -- closed-form pieces -----------------------------------------------------


def lattice_minimum(params: ModelParams, dim: int) -> LatticeMinResult:
    if params.model == PFC:
        return lattice_min_pfc(params.alpha, dim)
    return lattice_min_ok(params.gamma, dim)


def stability_test(params: ModelParams, dim: int) -> Stability:
    """margin = W''(m) + lattice minimum; stable when margin >= 0."""
    lattice = lattice_minimum(params, dim)
    margin = float(params.potential.d2(params.m)) + lattice.value
    return Stability(margin >= 0, margin, lattice)


def is_resonant(params: ModelParams, stability: Stability) -> bool:
    scale = abs(float(params.potential.d2(params.m))) + abs(stability.lattice.value)
    return abs(stability.margin) <= RESONANCE_RTOL * (1.0 + scale)


def global_threshold(params: ModelParams) -> float:
    """W'''(m)^2 / (3 w^2); 2 m^2 for the double well."""
    w = params.potential.require_w()
    return float(params.potential.d3(params.m)) ** 2 / (3.0 * w * w)


def second_variation_along(params: ModelParams, k: tuple[int, ...]) -> float:
    """d^2/dt^2 E(m + t sin(2 pi k.x)) at t = 0."""
    x = FOUR_PI_SQ * sum(j * j for j in k)
    if x == 0:
        raise PreconditionError("the zero mode is not a mass-preserving direction")
    if params.model == PFC:
        symbol = (params.alpha - x) ** 2
    else:
        symbol = x / params.gamma**2 + 1.0 / x
    return 0.5 * symbol + 0.5 * float(params.potential.d2(params.m))


def moment_quotient(u: SpectralField) -> float:
    """M2 * M4 / M3^2, at least 1 for every u with M3 != 0."""
    m2, m3, m4 = moments(u)
    if abs(m3) <= DEGENERATE_M3 * max(m2, 0.0) ** 1.5:
        raise DegenerateDirectionError("M3 vanishes for this direction")
    return m2 * m4 / (m3 * m3)


def step_moment_quotient(n: int) -> float:
    """Moment quotient of v_n = n on (0, 1/n) and -n/(n-1) on (1/n, 1), in closed form.

    Tends to 1 from above, so the constant 1 in the Hölder chain is sharp.
    """
    if n < 3:
        raise PreconditionError(f"n must be at least 3, got {n}")
    r = n / (n - 1)
    m2 = n + r
    m3 = n * n - r * r
    m4 = n**3 + r**3
    return m2 * m4 / (m3 * m3)


# -- the quotient and its gradient -----------------------------------------


def _effective_symbol(params: ModelParams, grid: Grid) -> np.ndarray:
    """Model symbol plus W''(m); entries that cancel to roundoff are exactly 0."""
    base = params.symbol(grid)
    d2 = float(params.potential.d2(params.m))
    symbol = base + d2
    roundoff = RESONANCE_RTOL * (1.0 + np.abs(base) + abs(d2))
    return np.where(np.abs(symbol) <= roundoff, 0.0, symbol)


def rayleigh_quotient(u: SpectralField, params: ModelParams) -> float:
    """Quad(u) * M4(u) / M3(u)^2 with Quad the Hessian quadratic form at m."""
    if abs(u.mean) > 1e-10 * (1.0 + math.sqrt(max(inner(u, u), 0.0))):
        raise PreconditionError("the quotient is defined on zero-mean directions")
    m2, m3, m4 = moments(u)
    if abs(m3) <= DEGENERATE_M3 * max(m2, 0.0) ** 1.5:
        raise DegenerateDirectionError("M3 vanishes for this direction")
    quad = float(np.sum(u.grid.weights * _effective_symbol(params, u.grid) * np.abs(u.spectrum) ** 2))
    return quad * m4 / (m3 * m3)


class _Quotient:
    """R(u) and its L2 gradient restricted to a band of zero-mean modes."""

    def __init__(self, params: ModelParams, grid: Grid, band: int) -> None:
        self.grid = grid
        self.mask = grid.band_mask(band)
        self.mask[grid.zero_mode] = False
        self.symbol = _effective_symbol(params, grid)
        positive = self.symbol[self.mask]
        scale = 1.0 + float(np.min(np.abs(positive))) if positive.size else 1.0
        self.preconditioner = np.where(self.mask, 1.0 / (1.0 + np.abs(self.symbol) / scale), 0.0)

    def project(self, spectrum: np.ndarray) -> np.ndarray:
        return np.where(self.mask, spectrum, 0.0)

    def value(self, u: SpectralField) -> tuple[float, float, float, float]:
        m2, m3, m4 = moments(u)
        quad = float(np.sum(self.grid.weights * self.symbol * np.abs(u.spectrum) ** 2))
        if abs(m3) <= DEGENERATE_M3 * max(m2, 0.0) ** 1.5:
            return math.inf, quad, m3, m4
        return quad * m4 / (m3 * m3), quad, m3, m4

    def gradient(self, u: SpectralField, quad: float, m3: float, m4: float) -> SpectralField:
        grad_quad = 2.0 * self.symbol * u.spectrum
        grad_m3 = 3.0 * pointwise(u, np.square).spectrum
        grad_m4 = 4.0 * pointwise(u, lambda v: v**3).spectrum
        spectrum = (grad_quad * m4 + quad * grad_m4) / m3**2 - 2.0 * quad * m4 * grad_m3 / m3**3
        return SpectralField(self.grid, spectrum=self.project(spectrum))

    def normalize(self, u: SpectralField) -> tuple[SpectralField, float]:
        """Scale to M2 = 1; returns the field and the factor applied."""
        m2 = inner(u, u)
        factor = 1.0 / math.sqrt(m2) if m2 > 0 else 1.0
        return u * factor, factor


@dataclass
class _RestartResult:
    index: int
    value: float
    witness: SpectralField | None
    iterations: int
    status: str


def _descend(quotient: _Quotient, start: SpectralField, index: int, search: SearchConfig) -> _RestartResult:
    """Preconditioned Polak-Ribiere+ descent with Armijo backtracking."""
    x, _ = quotient.normalize(start)
    r, quad, m3, m4 = quotient.value(x)
    perturbed = False
    if not math.isfinite(r):
        x, _ = quotient.normalize(x + 0.1 * pointwise(x, lambda v: v**3).apply_symbol(quotient.mask))
        r, quad, m3, m4 = quotient.value(x)
        perturbed = True
        logger.debug("restart %d: degenerate start, perturbed toward the cube", index)
        if not math.isfinite(r):
            return _RestartResult(index, math.inf, None, 0, "degenerate")

    g = quotient.gradient(x, quad, m3, m4)
    z = g.apply_symbol(quotient.preconditioner)
    d = -z
    step = 0.1
    iterations = 0
    status = "max_iterations"
    steepest_retry = False
    for iterations in range(1, search.max_iterations + 1):
        grad_norm = math.sqrt(max(inner(g, g), 0.0))
        if grad_norm <= search.gradient_tol * (1.0 + abs(r)):
            status = "converged"
            break
        slope = inner(g, d)
        if slope >= 0:
            d = -z
            slope = inner(g, d)
        d_norm = math.sqrt(max(inner(d, d), 0.0))
        if d_norm == 0:
            status = "converged"
            break

        alpha = min(2.0 * step, 0.5) / d_norm
        accepted = None
        for _ in range(60):
            trial = x + alpha * d
            r_trial, q_trial, m3_trial, m4_trial = quotient.value(trial)
            if r_trial <= r + 1e-4 * alpha * slope:
                accepted = (trial, r_trial, q_trial, m3_trial, m4_trial)
                break
            alpha *= 0.5

        if accepted is None:
            if steepest_retry:
                status = "line_search_stalled"
                break
            steepest_retry = True
            d = -z
            continue
        steepest_retry = False

        trial, r, quad, m3, m4 = accepted
        step = alpha * d_norm
        x, factor = quotient.normalize(trial)
        m3 *= factor**3
        m4 *= factor**4
        quad *= factor**2
        if abs(m3) <= DEGENERATE_M3:
            if perturbed:
                return _RestartResult(index, math.inf, None, iterations, "degenerate")
            perturbed = True
            x, _ = quotient.normalize(x + 0.1 * pointwise(x, lambda v: v**3).apply_symbol(quotient.mask))
            r, quad, m3, m4 = quotient.value(x)
            if not math.isfinite(r):
                return _RestartResult(index, math.inf, None, iterations, "degenerate")
            g = quotient.gradient(x, quad, m3, m4)
            z = g.apply_symbol(quotient.preconditioner)
            d = -z
            continue

        g_new = quotient.gradient(x, quad, m3, m4)
        z_new = g_new.apply_symbol(quotient.preconditioner)
        denominator = inner(g, z)
        beta = max(0.0, inner(g_new, z_new - z) / denominator) if denominator > 0 else 0.0
        d = -z_new + beta * (d * factor)
        g, z = g_new, z_new

    logger.debug("restart %d: R = %.6g after %d iterations (%s)", index, r, iterations, status)
    return _RestartResult(index, r, x, iterations, status)


def search_grid(dim: int, band: int) -> Grid:
    """Smallest grid holding modes |j| <= band without touching Nyquist."""
    return Grid((2 * band + 2,) * dim)


def estimate_pn(params: ModelParams, dim: int, search: SearchConfig | None = None) -> PnEstimate:
    """Multistart estimate of the optimal constant, from above.

    The closed-form lower bound (the stability margin) is attached; the
    estimator refuses to run when it is negative, where the constant is not
    defined. A margin that is zero up to roundoff counts as zero.
    """
    search = search or SearchConfig()
    stability = stability_test(params, dim)
    resonant = is_resonant(params, stability)
    if stability.margin < 0 and not resonant:
        raise PreconditionError(
            f"the stability margin is {stability.margin:.6g} < 0; the optimal constant is not defined"
        )
    band = search.band_for(dim)
    grid = search_grid(dim, band)
    quotient = _Quotient(params, grid, band)

    def run(index: int) -> _RestartResult:
        rng = np.random.default_rng([search.seed, index])
        start = random_field(grid, rng, band, rms=1.0)
        return _descend(quotient, start, index, search)

    outcomes = jobs.run_points(run, list(range(search.restarts)), search.threads)
    results = [outcome.unwrap() for outcome in outcomes]
    diagnostics = [
        {"restart": res.index, "value": res.value, "iterations": res.iterations, "status": res.status}
        for res in results
    ]
    usable = [res for res in results if res.witness is not None and math.isfinite(res.value)]
    if not usable:
        raise EstimationFailedError("every restart ended on a degenerate direction", diagnostics)
    best = min(usable, key=lambda res: (res.value, res.index))

    _, m3, _ = moments(best.witness)  # type: ignore[arg-type]
    witness = best.witness * (1.0 / np.cbrt(m3))  # type: ignore[operator]
    lower = max(stability.margin, 0.0) if resonant else stability.margin
    if lower > best.value + CONTRACT_SLACK:
        raise ContractViolation(
            f"lower bound {lower:.12g} exceeds the estimated upper bound {best.value:.12g}"
        )
    logger.info("optimal constant in [%.6g, %.6g] (band %d, %d restarts)", lower, best.value, band, len(usable))
    return PnEstimate(
        upper_bound=best.value,
        witness=witness,
        lower_bound=lower,
        restarts_used=len(usable),
        iterations=sum(res.iterations for res in results),
        band=band,
        diagnostics=diagnostics,
    )


# -- decisions ----------------------------------------------------------------


def _verified(gap: float, reference: float) -> bool:
    return gap < -VERIFY_RTOL * (1.0 + abs(reference))


def unstable_witness(params: ModelParams, dim: int, stability: Stability) -> tuple[SpectralField, float]:
    """m + t sin(2 pi k.x) along the lattice argmin, t by bounded line minimization.

    Returns the field and its energy minus E(m).
    """
    k = stability.lattice.witness
    n = max(16, 4 * max(k) + 4)
    grid = Grid((n,) * dim)
    coords = grid.coordinates()
    mode = SpectralField(grid, values=np.sin(2.0 * np.pi * sum(j * x for j, x in zip(k, coords, strict=True))))
    e_m = uniform_energy(params)

    def gap(t: float) -> float:
        return energy((t * mode).shifted(params.m), params) - e_m

    w = params.potential.w
    span = 4.0 * math.sqrt(8.0 * abs(stability.margin) / (w * w)) if w > 0 else 1.0 + math.sqrt(abs(stability.margin))
    result = minimize_scalar(gap, bounds=(0.0, span), method="bounded", options={"xatol": 1e-10 * span})
    t = float(result.x)
    return (t * mode).shifted(params.m), gap(t)


def decide_uniform(params: ModelParams, dim: int, search: SearchConfig | None = None) -> Decision:
    search = search or SearchConfig()
    stability = stability_test(params, dim)
    margin = stability.margin
    notes: list[str] = []
    bound = EXISTENCE_DIMENSION_BOUND[params.model]
    notes.append(f"dimension {dim} {'<' if dim < bound else '>='} existence bound {bound}")
    e_m = uniform_energy(params)

    try:
        threshold: float | None = global_threshold(params)
    except UnsupportedPotentialError:
        threshold = None

    if margin < 0 and not is_resonant(params, stability):
        witness, gap = unstable_witness(params, dim, stability)
        if _verified(gap, e_m):
            notes.append(f"unstable along k = {list(stability.lattice.witness)}; witness energy verified")
            logger.info("m = %g unstable, margin %.6g", params.m, margin)
            return Decision(Verdict.UNSTABLE_NOT_GLOBAL, margin, threshold, witness, energy_gap=gap, notes=notes)
        notes.append("negative margin but the line witness did not lower the energy")
        logger.warning("unstable witness failed verification (gap %.3g)", gap)
        return Decision(Verdict.UNDETERMINED, margin, threshold, energy_gap=gap, notes=notes)

    if is_resonant(params, stability):
        notes.append("zero stability margin: resonance, the optimal constant may vanish")
        return Decision(Verdict.UNDETERMINED, margin, threshold, lower_bound=max(margin, 0.0), notes=notes)

    lower = margin
    if threshold is None:
        notes.append("potential has no positive w; no certificate is available")
        return Decision(Verdict.UNDETERMINED, margin, None, lower_bound=lower, notes=notes)

    if lower >= threshold:
        verdict = Verdict.CERTIFIED_GLOBAL_UNIQUE if lower > threshold else Verdict.CERTIFIED_GLOBAL
        notes.append(f"closed-form lower bound {lower:.6g} >= threshold {threshold:.6g}")
        logger.info("m = %g %s", params.m, verdict.value)
        return Decision(verdict, margin, threshold, lower_bound=lower, notes=notes)

    estimate = estimate_pn(params, dim, search)
    decision = Decision(
        Verdict.UNDETERMINED,
        margin,
        threshold,
        lower_bound=lower,
        upper_bound=estimate.upper_bound,
        notes=notes,
    )
    if estimate.upper_bound >= threshold:
        notes.append("threshold lies between the lower bound and the estimate")
        return decision
    if not params.potential.constant_fourth_derivative:
        notes.append("estimate below threshold, but the quartic expansion is only a bound for this potential")
        return decision

    u = estimate.witness
    abc = abc_decomposition(u, params)
    t = -abc.B / (2.0 * abc.C)
    candidate = (t * u).shifted(params.m)
    gap = energy(candidate, params) - e_m
    decision.energy_gap = gap
    if _verified(gap, e_m):
        notes.append(f"quartic witness at t = {t:.6g} verified by direct evaluation")
        decision.verdict = Verdict.CERTIFIED_NOT_GLOBAL
        decision.witness = candidate
        logger.info("m = %g certified not global (gap %.6g)", params.m, gap)
    else:
        notes.append(f"quartic witness did not verify (gap {gap:.3g}); downgraded")
        logger.warning("m = %g: quartic witness failed verification, gap %.3g", params.m, gap)
    return decision
