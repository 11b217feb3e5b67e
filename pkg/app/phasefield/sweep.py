"""Phase diagram of the uniform state in the (m, a) plane for the double well.

For each m the stability boundary is closed form (a = 3 m^2 + lattice
minimum). The global-optimality boundary is traced on the oracle verdict: a
coarse scan in a, then bisection between the last certified-global and the
first not-global point. Points in between that the oracle cannot decide stay
an explicit undetermined band.
"""
from __future__ import annotations

import logging
import time
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from app.phasefield import jobs
from app.phasefield.energies import ModelParams
from app.phasefield.errors import NonMonotoneVerdictError, PreconditionError, UnsupportedPotentialError
from app.phasefield.fieldio import write_field
from app.phasefield.oracle import Decision, SearchConfig, Verdict, decide_uniform, lattice_minimum
from app.phasefield.potentials import DOUBLE_WELL, Potential
from app.phasefield.records import GLOBAL, STABILITY, UNDETERMINED, CurvePoint, SweepRecord

logger = logging.getLogger(__name__)

DEFAULT_M_RANGE = (0.0, 2.0, 0.1)
DEFAULT_A_RANGE = (0.0, 1600.0)
DEFAULT_RESOLUTION = 16
DEFAULT_BISECT_TOL = 0.5


@dataclass
class Evaluation:
    a: float
    decision: Decision
    wallclock: float


@dataclass
class RowResult:
    m: float
    evaluations: list[Evaluation] = field(default_factory=list)
    curve: list[CurvePoint] = field(default_factory=list)


@dataclass
class PhaseDiagram:
    records: list[SweepRecord]
    curve: list[CurvePoint]


def m_grid(lo: float, hi: float, step: float) -> list[float]:
    """Inclusive grid lo, lo+step, ..., hi, rounded to kill accumulated float noise."""
    if step <= 0:
        raise PreconditionError(f"m step must be positive, got {step}")
    if hi < lo:
        raise PreconditionError(f"m range is empty: [{lo}, {hi}]")
    count = int(np.floor((hi - lo) / step + 1e-9)) + 1
    return [round(lo + i * step, 12) for i in range(count)]


def stability_boundary(base: ModelParams, m: float, dim: int) -> float:
    """a at which W''(m) + lattice minimum changes sign: 3 m^2 + lattice minimum."""
    return 3.0 * m * m + lattice_minimum(base, dim).value


def sweep_record(
    params: ModelParams,
    dim: int,
    decision: Decision,
    *,
    seed: int,
    wallclock: float,
    witness_path: str | None = None,
) -> SweepRecord:
    potential = params.potential
    return SweepRecord(
        model=params.model,
        m=params.m,
        a=potential.a if potential.kind == DOUBLE_WELL else None,
        potential=potential.kind,
        alpha=params.alpha if params.model == "pfc" else None,
        gamma=params.gamma if params.model == "ok" else None,
        dim=dim,
        verdict=decision.verdict.value,
        margin=decision.margin,
        pn_lower=decision.lower_bound,
        pn_upper=decision.upper_bound,
        threshold=decision.threshold,
        energy_gap=decision.energy_gap,
        witness_path=witness_path,
        seed=seed,
        wallclock=wallclock,
    )


def check_monotone(m: float, evaluations: Sequence[Evaluation]) -> None:
    """Certified-global verdicts must all lie below every not-global or undetermined one."""
    seen_other: Evaluation | None = None
    seen_not_global: Evaluation | None = None
    for item in sorted(evaluations, key=lambda e: e.a):
        verdict = item.decision.verdict
        if verdict.is_certified_global and seen_other is not None:
            raise NonMonotoneVerdictError(
                f"at m = {m}: {verdict.value} at a = {item.a} after "
                f"{seen_other.decision.verdict.value} at a = {seen_other.a}",
                (m, item.a, verdict.value),
            )
        if not verdict.is_certified_global:
            seen_other = seen_other or item
        if verdict.is_not_global:
            seen_not_global = seen_not_global or item
        elif verdict == Verdict.UNDETERMINED and seen_not_global is not None:
            logger.warning(
                "m = %g: undetermined at a = %g above a not-global verdict at a = %g",
                m, item.a, seen_not_global.a,
            )


def _bisect(
    lo: float,
    hi: float,
    predicate: Callable[[float], bool],
    tol: float,
) -> tuple[float, float]:
    """Shrink [lo, hi] with predicate(lo) true and predicate(hi) false to width <= tol."""
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if predicate(mid):
            lo = mid
        else:
            hi = mid
    return lo, hi


def trace_row(
    base: ModelParams,
    m: float,
    dim: int,
    a_range: tuple[float, float],
    resolution: int,
    bisect_tol: float,
    search: SearchConfig,
) -> RowResult:
    row = RowResult(m)
    a_stab = stability_boundary(base, m, dim)
    row.curve.append(CurvePoint(m, a_stab, a_stab, STABILITY))

    cache: dict[float, Evaluation] = {}

    def evaluate(a: float) -> Decision:
        if a not in cache:
            params = base.with_mass(m).with_potential(Potential.double_well(a))
            started = time.perf_counter()
            decision = decide_uniform(params, dim, search)
            cache[a] = Evaluation(a, decision, time.perf_counter() - started)
        return cache[a].decision

    a_lo, a_hi = a_range
    scan = [a_lo + (a_hi - a_lo) * k / resolution for k in range(resolution + 1)]
    for a in scan:
        evaluate(a)
    check_monotone(m, list(cache.values()))

    globals_ = [a for a in scan if cache[a].decision.verdict.is_certified_global]
    not_globals = [a for a in scan if cache[a].decision.verdict.is_not_global]

    if globals_:
        g_start = max(globals_)
        above = [a for a in scan if a > g_start]
        g_lo, g_hi = (g_start, g_start) if not above else _bisect(
            g_start, min(above), lambda a: evaluate(a).verdict.is_certified_global, bisect_tol
        )
    if not_globals:
        n_end = min(not_globals)
        below = [a for a in scan if a < n_end]
        n_lo, n_hi = (n_end, n_end) if not below else _bisect(
            max(below), n_end, lambda a: not evaluate(a).verdict.is_not_global, bisect_tol
        )

    check_monotone(m, list(cache.values()))
    if globals_ and not_globals:
        row.curve.append(CurvePoint(m, g_lo, n_hi, GLOBAL))
        if n_lo > g_hi:
            row.curve.append(CurvePoint(m, g_hi, n_lo, UNDETERMINED))
    elif globals_ or not_globals:
        logger.warning("m = %g: the a-range holds only one side of the global boundary", m)
    row.evaluations = sorted(cache.values(), key=lambda e: e.a)
    return row


def phase_diagram(
    base: ModelParams,
    dim: int,
    m_values: Sequence[float],
    a_range: tuple[float, float] = DEFAULT_A_RANGE,
    *,
    resolution: int = DEFAULT_RESOLUTION,
    bisect_tol: float = DEFAULT_BISECT_TOL,
    search: SearchConfig | None = None,
    threads: int | None = 1,
    witness_dir: Path | None = None,
) -> PhaseDiagram:
    """Sweep m, trace both boundaries per row, return records and curve points in grid order."""
    if base.potential.kind != DOUBLE_WELL:
        raise UnsupportedPotentialError("the phase diagram is defined for the double-well potential")
    if resolution < 1:
        raise PreconditionError(f"resolution must be at least 1, got {resolution}")
    if not bisect_tol > 0:
        raise PreconditionError(f"bisect_tol must be positive, got {bisect_tol}")
    if a_range[1] <= a_range[0]:
        raise PreconditionError(f"a range is empty: {a_range}")
    search = search or SearchConfig(threads=1)

    outcomes = jobs.run_points(
        lambda m: trace_row(base, m, dim, a_range, resolution, bisect_tol, search),
        list(m_values),
        threads,
    )

    records: list[SweepRecord] = []
    curve: list[CurvePoint] = []
    for outcome in outcomes:
        row = outcome.unwrap()
        curve.extend(row.curve)
        for item in row.evaluations:
            params = base.with_mass(row.m).with_potential(Potential.double_well(item.a))
            witness_path = None
            if witness_dir is not None and item.decision.witness is not None:
                target = Path(witness_dir) / f"witness_m{row.m:.6g}_a{item.a:.6g}.pfcf"
                write_field(target, item.decision.witness)
                witness_path = str(target)
            records.append(
                sweep_record(params, dim, item.decision, seed=search.seed, wallclock=item.wallclock, witness_path=witness_path)
            )
    return PhaseDiagram(records, curve)
