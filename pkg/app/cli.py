"""Thin command-line wrapper over the maintained core in ``app/phasefield``.

Contains no numerical logic: the CLI resolves flags and the optional run
configuration, calls into ``app.phasefield`` and renders the results. Every
verb prints to stdout; logging goes to stderr.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from collections.abc import Mapping, Sequence
from pathlib import Path
from typing import Any

from app.phasefield import config as run_config
from app.phasefield.energies import OK, PFC, ModelParams, energy
from app.phasefield.errors import ModelMismatchError, NumericalFailure, PreconditionError
from app.phasefield.fieldio import read_field, write_field
from app.phasefield.oracle import SearchConfig, decide_uniform, estimate_pn, stability_test
from app.phasefield.potentials import Potential
from app.phasefield.records import (
    build_metadata,
    metadata_path,
    read_metadata,
    render_curve_csv,
    render_ndjson,
    render_records_csv,
    write_curve_csv,
    write_metadata,
    write_ndjson,
    write_records_csv,
)
from app.phasefield.relaxation import FlowConfig, distance_to_constant, multistart_min, write_trace_csv
from app.phasefield.selftest import run_suite
from app.phasefield.spectral import NEUMANN, Grid
from app.phasefield.sweep import (
    DEFAULT_A_RANGE,
    DEFAULT_BISECT_TOL,
    DEFAULT_M_RANGE,
    DEFAULT_RESOLUTION,
    m_grid,
    phase_diagram,
    sweep_record,
)
from app.phasefield.thin_film import (
    DEFAULT_H_LIST,
    DEFAULT_L_LIST,
    ThinFilmParams,
    flh_energy,
    gamma_sequence_experiment,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_PRECONDITION = 2
EXIT_NUMERICAL = 3

PROG = "phasefield-oracle"

# Values used when neither a flag nor the run configuration sets a key.
DEFAULTS: dict[str, Any] = {
    "model": PFC,
    "alpha": 1.0,
    "gamma": 1.0,
    "m": 0.0,
    "dim": 2,
    "seed": 0,
    "format": "ndjson",
    "resolution": DEFAULT_RESOLUTION,
    "bisect_tol": DEFAULT_BISECT_TOL,
    "m_range": list(DEFAULT_M_RANGE),
    "a_range": list(DEFAULT_A_RANGE),
    "h_list": list(DEFAULT_H_LIST),
    "L_list": list(DEFAULT_L_LIST),
}
FLOW_KEYS = ("scheme", "dt", "max_steps", "energy_tol", "init_amplitude", "init_band", "stabilization")


def _number_list(kind: type, lengths: tuple[int, ...] | None = None) -> Any:
    def parse(text: str) -> list[Any]:
        try:
            values = [kind(part) for part in text.split(",") if part.strip()]
        except ValueError as exc:
            raise argparse.ArgumentTypeError(f"not a comma-separated list of {kind.__name__}: {text!r}") from exc
        if lengths and len(values) not in lengths:
            raise argparse.ArgumentTypeError(f"expected {' or '.join(map(str, lengths))} values, got {len(values)}")
        return values

    return parse


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1, got {value}")
    return value


def build_parser() -> argparse.ArgumentParser:
    """Build the argument parser: eight verbs plus shared option groups."""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML run configuration (default: $PHASEFIELD_CONFIG).")
    common.add_argument("--json", action="store_true", help="Emit JSON on stdout.")
    common.add_argument(
        "--log-level",
        default="WARNING",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        help="Log level for messages on stderr (default: WARNING).",
    )
    common.add_argument("--seed", type=int, help="Base seed for every random start (default: 0).")
    common.add_argument("--threads", type=_positive_int, help="Worker threads (default: all cores).")
    common.add_argument("--out", help="Output file.")
    common.add_argument("--format", choices=["ndjson", "csv"], help="Record format, on stdout or in --out (default: ndjson).")

    model = argparse.ArgumentParser(add_help=False)
    model.add_argument("--model", choices=[PFC, OK], help="Energy model (default: pfc).")
    model.add_argument("--alpha", type=float, help="PFC parameter alpha (default: 1).")
    model.add_argument("--gamma", type=float, help="Ohta-Kawasaki parameter gamma (default: 1).")
    model.add_argument("--m", type=float, help="Mass, the mean of the field (default: 0).")
    model.add_argument("--a", type=float, help="Double-well parameter a.")
    model.add_argument("--potential-file", help="YAML potential file instead of --a.")
    model.add_argument("--dim", type=int, choices=[1, 2, 3], help="Torus dimension N (default: 2).")

    search = argparse.ArgumentParser(add_help=False)
    search.add_argument("--band", type=int, help="Estimator band K (default: 8, or 4 in 3D).")
    search.add_argument("--restarts", type=_positive_int, help="Random restarts.")

    flow = argparse.ArgumentParser(add_help=False)
    flow.add_argument("--grid", type=_number_list(int, (1, 2, 3)), help="Samples per axis, e.g. 64,64.")
    flow.add_argument("--scheme", choices=["conserved-h-1", "projected-l2"], help="Gradient flow.")
    flow.add_argument("--dt", type=float, help="Initial time step (default: 1e-3).")
    flow.add_argument("--max-steps", type=_positive_int, help="Step limit (default: 200000).")
    flow.add_argument("--energy-tol", type=float, help="Relative energy change at convergence.")
    flow.add_argument("--init-amplitude", type=float, help="RMS of the random initial perturbation.")
    flow.add_argument("--init-band", type=_positive_int, help="Highest mode index of the perturbation.")

    parser = argparse.ArgumentParser(
        prog=PROG,
        description="Energies, stability and certified global optimality of uniform phase-field states.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    energy_cmd = sub.add_parser("energy", parents=[common, model], help="Evaluate the energy of a PFCF field file.")
    energy_cmd.add_argument("--field", required=True, help="PFCF field file.")
    energy_cmd.add_argument("--L", type=float, dest="L", help="Film in-plane scale (film fields, default 1).")
    energy_cmd.add_argument("--h", type=float, dest="h", help="Film thickness ratio (film fields).")

    sub.add_parser("stability", parents=[common, model], help="Closed-form stability test of the uniform state.")
    sub.add_parser("pn-estimate", parents=[common, model, search], help="Estimate the optimal interpolation constant.")

    decide = sub.add_parser("decide", parents=[common, model, search], help="Decide global optimality of m.")
    decide.add_argument("--witness-dir", help="Directory for lower-energy witness fields.")

    sub.add_parser("relax", parents=[common, model, search, flow], help="Multistart gradient-flow relaxation.").add_argument(
        "--trace", help="CSV file for the energy trace of the best run."
    )

    film = sub.add_parser("thinfilm", parents=[common, model, search, flow], help="Thin-film sequence experiment.")
    film.add_argument("--h-list", type=_number_list(float), help="Decreasing film thicknesses.")
    film.add_argument("--L-list", dest="L_list", type=_number_list(float), help="In-plane scales (one, or one per h).")

    diagram = sub.add_parser("phase-diagram", parents=[common, model, search], help="Trace the (m, a) phase diagram.")
    diagram.add_argument("--m-range", type=_number_list(float, (3,)), help="lo,hi,step (default: 0,2,0.1).")
    diagram.add_argument("--a-range", type=_number_list(float, (2,)), help="lo,hi (default: 0,1600).")
    diagram.add_argument("--resolution", type=_positive_int, help="Coarse a-scan intervals (default: 16).")
    diagram.add_argument("--bisect-tol", type=float, help="Bracket width in a (default: 0.5).")
    diagram.add_argument("--witness-dir", help="Directory for lower-energy witness fields.")
    diagram.add_argument("--curve", help="Curve CSV (default: next to --out).")

    selftest = sub.add_parser("selftest", parents=[common], help="Run the spectral identity suite.")
    selftest.add_argument("--samples", type=_positive_int, default=50, help="Random fields per check (default: 50).")
    return parser


def resolve_config_file(explicit: str | None, env: Mapping[str, str]) -> str | None:
    return run_config.resolve_config_file(explicit, env)


def merge_settings(args: argparse.Namespace, file_values: Mapping[str, Any]) -> argparse.Namespace:
    """Fill unset flags from the run configuration, then from DEFAULTS. Flags win."""
    values = dict(file_values)
    flow_values = values.pop("flow", {}) or {}
    for key, value in values.items():
        if getattr(args, key, None) is None:
            setattr(args, key, value)
    for key, value in flow_values.items():
        if getattr(args, key, None) is None:
            setattr(args, key, value)
    for key, value in DEFAULTS.items():
        if getattr(args, key, None) is None:
            setattr(args, key, value)
    return args


def build_params(args: argparse.Namespace) -> ModelParams:
    if getattr(args, "potential_file", None):
        potential = run_config.load_potential_file(Path(args.potential_file))
    elif getattr(args, "a", None) is not None:
        potential = Potential.double_well(args.a)
    else:
        raise PreconditionError("a potential is needed: pass --a or --potential-file")
    if args.model == PFC:
        return ModelParams.pfc(args.alpha, args.m, potential)
    return ModelParams.ok(args.gamma, args.m, potential)


def build_search(args: argparse.Namespace, *, threads: int | None = None) -> SearchConfig:
    return SearchConfig(
        band=args.band,
        restarts=args.restarts or 16,
        seed=args.seed,
        threads=threads if threads is not None else args.threads,
    )


def build_flow(args: argparse.Namespace) -> FlowConfig:
    values = {key: getattr(args, key, None) for key in FLOW_KEYS}
    return FlowConfig(seed=args.seed, **{key: value for key, value in values.items() if value is not None})


def build_grid(args: argparse.Namespace, *, film: bool = False) -> Grid:
    shape = args.grid
    if film:
        return Grid.film() if not shape else Grid(tuple(shape), ("periodic", "periodic", NEUMANN))
    if not shape:
        return Grid.default(args.dim)
    if len(shape) != args.dim:
        raise PreconditionError(f"--grid has {len(shape)} axes but --dim is {args.dim}")
    return Grid(tuple(shape))


def _emit(payload: Mapping[str, Any], human: str, as_json: bool) -> None:
    print(json.dumps(dict(payload), indent=2, sort_keys=True) if as_json else human)


def _metadata(argv: Sequence[str], args: argparse.Namespace, grid: Grid | None, band: int | None) -> dict[str, Any]:
    return build_metadata(
        [PROG, *argv],
        seed=args.seed,
        grid=grid.shape if grid else None,
        band=band,
        boundary=grid.axis_kinds if grid else None,
    )


def _write_records(path: Path, records: Sequence[Any], fmt: str) -> None:
    if fmt == "csv":
        write_records_csv(path, records)
    else:
        write_ndjson(path, records)


def cmd_energy(args: argparse.Namespace) -> int:
    path = Path(args.field)
    neumann = False
    if metadata_path(path).exists():
        boundary = read_metadata(path).get("boundary") or []
        neumann = bool(boundary) and boundary[-1] == NEUMANN
    phi = read_field(path, neumann_last=neumann)
    params = build_params(args)
    if neumann:
        if params.model != PFC:
            raise ModelMismatchError("film fields carry the PFC film energy only")
        if args.h is None:
            raise PreconditionError("film fields need --h")
        film = ThinFilmParams(args.L or 1.0, args.h, params.alpha, params.m, params.potential)
        value = flh_energy(phi, film)
    else:
        value = energy(phi, params)
    payload = {"energy": value, "grid": list(phi.grid.shape), "mean": phi.mean, "model": params.model}
    _emit(payload, f"energy {value:.12g}  (mean {phi.mean:.6g}, grid {'x'.join(map(str, phi.grid.shape))})", args.json)
    return EXIT_OK


def cmd_stability(args: argparse.Namespace) -> int:
    params = build_params(args)
    result = stability_test(params, args.dim)
    payload = {
        "stable": result.stable,
        "margin": result.margin,
        "lattice": result.lattice.to_dict(),
        "params": params.describe(),
        "dim": args.dim,
    }
    human = (
        f"{'stable' if result.stable else 'unstable'}  margin {result.margin:.6f}  "
        f"(lattice minimum {result.lattice.value:.6f} at q = {list(result.lattice.argmin_norms)})"
    )
    _emit(payload, human, args.json)
    return EXIT_OK


def cmd_pn_estimate(args: argparse.Namespace) -> int:
    params = build_params(args)
    estimate = estimate_pn(params, args.dim, build_search(args))
    payload = {**estimate.to_dict(), "params": params.describe(), "dim": args.dim}
    human = f"optimal constant in [{estimate.lower_bound:.6g}, {estimate.upper_bound:.6g}]  (band {estimate.band})"
    _emit(payload, human, args.json)
    return EXIT_OK


def cmd_decide(args: argparse.Namespace, argv: Sequence[str]) -> int:
    params = build_params(args)
    search = build_search(args)
    started = time.perf_counter()
    decision = decide_uniform(params, args.dim, search)
    wallclock = time.perf_counter() - started

    witness_path = None
    if decision.witness is not None and args.witness_dir:
        target = Path(args.witness_dir) / f"witness_m{params.m:.6g}.pfcf"
        write_field(target, decision.witness)
        write_metadata(target, _metadata(argv, args, decision.witness.grid, None))
        witness_path = str(target)

    record = sweep_record(params, args.dim, decision, seed=args.seed, wallclock=wallclock, witness_path=witness_path)
    if args.out:
        _write_records(Path(args.out), [record], args.format)
        write_metadata(Path(args.out), _metadata(argv, args, None, search.band_for(args.dim)))
    payload = {**decision.to_dict(), "record": record.to_dict()}
    human = decision.verdict.value
    if decision.notes:
        human += "\n" + "\n".join(f"  {note}" for note in decision.notes)
    _emit(payload, human, args.json)
    return EXIT_OK


def cmd_relax(args: argparse.Namespace, argv: Sequence[str]) -> int:
    params = build_params(args)
    grid = build_grid(args)
    cfg = build_flow(args)
    result = multistart_min(params, grid, args.restarts or 1, cfg, threads=args.threads)
    best = result.best
    distance = distance_to_constant(best.field, params.m)
    if args.out:
        write_field(Path(args.out), best.field)
        write_metadata(Path(args.out), _metadata(argv, args, grid, cfg.init_band))
    if args.trace:
        write_trace_csv(best.trace, Path(args.trace))
    payload = {
        "energy": best.energy,
        "converged": best.converged,
        "residual": best.residual,
        "steps": best.steps,
        "distance_to_uniform": distance,
        "energies": result.energies,
        "energies_by_seed": result.energies_by_seed,
        "seeds": result.seeds,
    }
    human = (
        f"E = {best.energy:.12g}  ({'converged' if best.converged else 'not converged'} after {best.steps} steps, "
        f"||phi - m|| = {distance:.3g})"
    )
    _emit(payload, human, args.json)
    return EXIT_OK


def cmd_thinfilm(args: argparse.Namespace, argv: Sequence[str]) -> int:
    params = build_params(args)
    if params.model != PFC:
        raise ModelMismatchError("the thin-film energy is a PFC energy")
    grid = build_grid(args, film=True)
    cfg = build_flow(args)
    records = gamma_sequence_experiment(
        args.h_list,
        args.L_list,
        params.alpha,
        params.m,
        params.potential,
        grid=grid,
        cfg=cfg,
        restarts=args.restarts or 4,
        threads=args.threads,
    )
    if args.out:
        _write_records(Path(args.out), records, args.format)
        write_metadata(Path(args.out), _metadata(argv, args, grid, cfg.init_band))
    elif args.format == "csv":
        sys.stdout.write(render_records_csv(records))
    else:
        sys.stdout.write(render_ndjson(records))
    return EXIT_OK if all(record.error is None for record in records) else EXIT_NUMERICAL


def cmd_phase_diagram(args: argparse.Namespace, argv: Sequence[str]) -> int:
    if args.a is None and not args.potential_file:
        args.a = 0.0  # swept; only the kind matters
    base = build_params(args)
    lo, hi, step = args.m_range
    search = build_search(args, threads=1)
    diagram = phase_diagram(
        base,
        args.dim,
        m_grid(lo, hi, step),
        tuple(args.a_range),  # type: ignore[arg-type]
        resolution=args.resolution,
        bisect_tol=args.bisect_tol,
        search=search,
        threads=args.threads,
        witness_dir=Path(args.witness_dir) if args.witness_dir else None,
    )
    meta = _metadata(argv, args, None, search.band_for(args.dim))
    if args.out:
        out = Path(args.out)
        _write_records(out, diagram.records, args.format)
        write_metadata(out, meta)
        curve_path = Path(args.curve) if args.curve else out.with_name(out.stem + ".curve.csv")
        write_curve_csv(curve_path, diagram.curve)
        write_metadata(curve_path, meta)
    elif args.json:
        payload = {
            "records": [record.to_dict() for record in diagram.records],
            "curve": [point.__dict__ for point in diagram.curve],
        }
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        sys.stdout.write(render_curve_csv(diagram.curve))
    return EXIT_OK


def cmd_selftest(args: argparse.Namespace) -> int:
    results = run_suite(samples=args.samples, seed=args.seed)
    passed = all(result.passed for result in results)
    payload = {"passed": passed, "checks": [result.to_dict() for result in results]}
    lines = [
        f"{'ok  ' if result.passed else 'FAIL'}  {result.name:<34} worst {result.worst:.2e}"
        for result in results
    ]
    lines.append("all identity checks pass" if passed else "identity checks FAILED")
    _emit(payload, "\n".join(lines), args.json)
    return EXIT_OK if passed else EXIT_NUMERICAL


def _configure_logging(level: str) -> None:
    """All logging goes to stderr so stdout stays parseable."""
    logging.basicConfig(
        level=getattr(logging, level),
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )


def _load_env() -> None:
    """Honour ENV_FILE, so ENV_FILE=.env.dev works."""
    env_file = Path(os.environ.get("ENV_FILE", ".env"))
    if env_file.exists():
        from dotenv import load_dotenv

        load_dotenv(str(env_file))


def dispatch(args: argparse.Namespace, argv: Sequence[str]) -> int:
    if args.command == "energy":
        return cmd_energy(args)
    if args.command == "stability":
        return cmd_stability(args)
    if args.command == "pn-estimate":
        return cmd_pn_estimate(args)
    if args.command == "decide":
        return cmd_decide(args, argv)
    if args.command == "relax":
        return cmd_relax(args, argv)
    if args.command == "thinfilm":
        return cmd_thinfilm(args, argv)
    if args.command == "phase-diagram":
        return cmd_phase_diagram(args, argv)
    return cmd_selftest(args)


def main(argv: Sequence[str] | None = None) -> int:
    """Entry point. Returns the exit code, never raises for expected failures."""
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    _configure_logging(args.log_level)
    _load_env()

    try:
        config_file = resolve_config_file(args.config, os.environ)
        file_values = run_config.load_run_config(Path(config_file)) if config_file else {}
        merge_settings(args, file_values)
        return dispatch(args, argv)
    except PreconditionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except KeyboardInterrupt:
        print("Interrupted. Output files are written only at the end of a run.", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    raise SystemExit(main())
