"""Unit tests for the thin CLI wrapper (app/cli.py)."""
import json

import numpy as np
import pytest

from app import cli
from app.phasefield.config import CONFIG_ENV
from app.phasefield.errors import EstimationFailedError
from app.phasefield.fieldio import write_field
from app.phasefield.potentials import Potential
from app.phasefield.records import FilmRecord, build_metadata, read_ndjson, write_metadata
from app.phasefield.spectral import Grid, SpectralField
from app.phasefield.thin_film import ThinFilmParams, flh_energy


@pytest.fixture(autouse=True)
def _isolated(monkeypatch, tmp_path):
    monkeypatch.delenv(CONFIG_ENV, raising=False)
    monkeypatch.setenv("ENV_FILE", str(tmp_path / "absent.env"))


def _run(capsys, argv):
    code = cli.main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_parser_requires_a_command():
    with pytest.raises(SystemExit):
        cli.build_parser().parse_args([])


def test_parser_accepts_shared_options_after_verb():
    args = cli.build_parser().parse_args(["stability", "--json", "--log-level", "DEBUG", "--a", "1"])
    assert args.command == "stability"
    assert args.json is True
    assert args.log_level == "DEBUG"
    assert args.alpha is None


def test_parser_rejects_shared_options_before_verb():
    with pytest.raises(SystemExit):
        cli.build_parser().parse_args(["--json", "stability"])


@pytest.mark.parametrize(
    "argv",
    [
        ["stability", "--dt", "0.1"],
        ["decide", "--trace", "t.csv"],
        ["phase-diagram", "--m-range", "0,1"],
        ["relax", "--grid", "16,16,16,16"],
        ["relax", "--restarts", "0"],
        ["stability", "--dim", "4"],
    ],
)
def test_parser_rejects_misplaced_or_malformed_options(argv):
    with pytest.raises(SystemExit):
        cli.build_parser().parse_args(argv)


def test_number_lists_parse():
    args = cli.build_parser().parse_args(["thinfilm", "--h-list", "0.2,0.1", "--L-list", "1.1", "--grid", "8,8,4"])
    assert args.h_list == [0.2, 0.1]
    assert args.L_list == [1.1]
    assert args.grid == [8, 8, 4]


def test_flags_beat_config_values_beat_defaults():
    args = cli.build_parser().parse_args(["relax", "--alpha", "2", "--dt", "0.01"])
    cli.merge_settings(args, {"alpha": 5.0, "m": 0.5, "flow": {"dt": 0.5, "scheme": "projected-l2"}})
    assert args.alpha == 2.0
    assert args.m == 0.5
    assert args.dt == 0.01
    assert args.scheme == "projected-l2"
    assert args.dim == 2
    assert args.model == "pfc"


def test_builders():
    args = cli.merge_settings(cli.build_parser().parse_args(["relax", "--a", "1", "--grid", "8", "--dim", "1"]), {})
    assert cli.build_params(args).potential.a == 1.0
    assert cli.build_grid(args) == Grid((8,))
    assert cli.build_flow(args).seed == 0
    assert cli.build_search(args).restarts == 16
    args.dim = 2
    with pytest.raises(cli.PreconditionError):
        cli.build_grid(args)


def test_stability_prints_the_margin(capsys):
    code, out, _ = _run(capsys, ["stability", "--alpha", "1", "--m", "0", "--a", "1", "--dim", "2"])
    assert code == cli.EXIT_OK
    assert out.startswith("stable")
    assert "1479.59" in out


def test_stability_json(capsys):
    code, out, _ = _run(capsys, ["stability", "--a", "2000", "--json"])
    assert code == cli.EXIT_OK
    body = json.loads(out)
    assert body["stable"] is False
    assert body["margin"] == pytest.approx(-519.41, abs=0.01)
    assert body["lattice"]["argmin_norms"] == [1]


def test_missing_potential_is_a_usage_error(capsys):
    code, _, err = _run(capsys, ["stability"])
    assert code == cli.EXIT_PRECONDITION
    assert "a potential is needed" in err


def test_decide_writes_records_with_sidecar(capsys, tmp_path):
    out_file = tmp_path / "decide.ndjson"
    code, out, _ = _run(
        capsys, ["decide", "--m", "1", "--a", "0.5", "--band", "4", "--restarts", "2", "--out", str(out_file)]
    )
    assert code == cli.EXIT_OK
    assert out.startswith("CertifiedGlobal")
    (record,) = read_ndjson(out_file)
    assert record["verdict"] == "CertifiedGlobalUnique"
    assert record["m"] == 1.0
    meta = json.loads((tmp_path / "decide.ndjson.meta.json").read_text())
    assert meta["command"][0] == cli.PROG
    assert meta["band"] == 4


def test_decide_writes_the_witness(capsys, tmp_path):
    code, out, _ = _run(capsys, ["decide", "--a", "2000", "--witness-dir", str(tmp_path), "--json"])
    assert code == cli.EXIT_OK
    body = json.loads(out)
    assert body["verdict"] == "UnstableNotGlobal"
    assert body["record"]["witness_path"].endswith("witness_m0.pfcf")
    assert (tmp_path / "witness_m0.pfcf.meta.json").exists()


def test_config_file_supplies_defaults(capsys, tmp_path, monkeypatch):
    config = tmp_path / "run.yaml"
    config.write_text("m: 1.0\na: 0.5\nband: 4\nrestarts: 2\n")
    code, out, _ = _run(capsys, ["decide", "--config", str(config)])
    assert code == cli.EXIT_OK
    assert out.startswith("CertifiedGlobal")

    monkeypatch.setenv(CONFIG_ENV, str(config))
    code, out, _ = _run(capsys, ["decide", "--m", "0", "--a", "2000"])
    assert code == cli.EXIT_OK
    assert out.startswith("UnstableNotGlobal")


def test_unknown_config_key_is_refused(capsys, tmp_path):
    config = tmp_path / "run.yaml"
    config.write_text("alhpa: 1.0\n")
    code, _, err = _run(capsys, ["stability", "--a", "1", "--config", str(config)])
    assert code == cli.EXIT_PRECONDITION
    assert "alhpa" in err


def test_numerical_failures_exit_3(capsys, mocker):
    failure = EstimationFailedError("every restart ended on a degenerate direction")
    mocker.patch("app.cli.estimate_pn", side_effect=failure)
    code, _, err = _run(capsys, ["pn-estimate", "--a", "1"])
    assert code == cli.EXIT_NUMERICAL
    assert "degenerate" in err


def test_pn_estimate_refuses_unstable_states(capsys):
    code, _, err = _run(capsys, ["pn-estimate", "--a", "2000", "--band", "2", "--restarts", "1"])
    assert code == cli.EXIT_PRECONDITION
    assert "margin" in err


def test_thinfilm_is_pfc_only(capsys):
    code, _, err = _run(capsys, ["thinfilm", "--model", "ok", "--a", "1"])
    assert code == cli.EXIT_PRECONDITION
    assert "PFC" in err


@pytest.mark.parametrize("fmt, first", [("csv", "L,h,energy3d,energy2d_ref"), ("ndjson", '{"L": 1.0')])
def test_thinfilm_honours_the_format_on_stdout(capsys, mocker, fmt, first):
    record = FilmRecord(1.0, 0.1, -2.5, -2.5, 0.0, 0.0, 0.0, 0.0, 1, 0)
    mocker.patch("app.cli.gamma_sequence_experiment", return_value=[record])
    code, out, _ = _run(capsys, ["thinfilm", "--a", "1", "--h-list", "0.1", "--L-list", "1", "--format", fmt])
    assert code == cli.EXIT_OK
    assert out.startswith(first)
    if fmt == "csv":
        assert out.splitlines()[1].startswith("1.0,0.1,-2.5,-2.5,")


def test_grid_must_match_the_dimension(capsys):
    code, _, err = _run(capsys, ["relax", "--a", "1", "--grid", "16,16", "--dim", "1"])
    assert code == cli.EXIT_PRECONDITION
    assert "--grid" in err


def test_relax_then_energy(capsys, tmp_path):
    field = tmp_path / "phi.pfcf"
    trace = tmp_path / "trace.csv"
    code, out, _ = _run(
        capsys,
        ["relax", "--dim", "1", "--grid", "16", "--a", "1", "--max-steps", "200",
         "--out", str(field), "--trace", str(trace), "--json"],
    )
    assert code == cli.EXIT_OK
    relaxed = json.loads(out)
    assert relaxed["seeds"] == [0]
    assert trace.read_text().startswith("step,energy,dt\n")
    assert json.loads((tmp_path / "phi.pfcf.meta.json").read_text())["boundary"] == ["periodic"]

    code, out, _ = _run(capsys, ["energy", "--field", str(field), "--a", "1", "--json"])
    assert code == cli.EXIT_OK
    assert json.loads(out)["energy"] == pytest.approx(relaxed["energy"], rel=1e-12)


def test_energy_of_a_film_field(capsys, tmp_path):
    grid = Grid.film(8, 4)
    phi = SpectralField.from_function(grid, lambda x, y, z: 0.1 * np.cos(2 * np.pi * x) + 0.05 * np.cos(np.pi * z))
    path = tmp_path / "film.pfcf"
    write_field(path, phi)
    write_metadata(path, build_metadata([], seed=0, grid=grid.shape, band=None, boundary=grid.axis_kinds))

    code, _, err = _run(capsys, ["energy", "--field", str(path), "--a", "1"])
    assert code == cli.EXIT_PRECONDITION
    assert "--h" in err

    code, out, _ = _run(capsys, ["energy", "--field", str(path), "--a", "1", "--h", "0.1", "--json"])
    assert code == cli.EXIT_OK
    expected = flh_energy(phi, ThinFilmParams(1.0, 0.1, 1.0, 0.0, Potential.double_well(1.0)))
    assert json.loads(out)["energy"] == pytest.approx(expected, rel=1e-12)


def test_phase_diagram_prints_the_curve(capsys):
    code, out, _ = _run(
        capsys,
        ["phase-diagram", "--dim", "1", "--m-range", "1,1,1", "--a-range", "0,1600",
         "--resolution", "4", "--bisect-tol", "50"],
    )
    assert code == cli.EXIT_OK
    lines = out.splitlines()
    assert lines[0] == "m,a_lo,a_hi,kind"
    assert lines[1].startswith("1.0,1483.59")
    assert lines[2] == "1.0,1450.0,1500.0,global"


def test_phase_diagram_files(capsys, tmp_path):
    out_file = tmp_path / "diagram.csv"
    code, _, _ = _run(
        capsys,
        ["phase-diagram", "--dim", "1", "--m-range", "1,1,1", "--a-range", "0,1600", "--resolution", "4",
         "--bisect-tol", "50", "--format", "csv", "--out", str(out_file)],
    )
    assert code == cli.EXIT_OK
    assert out_file.read_text().startswith("model,m,a,")
    assert (tmp_path / "diagram.curve.csv").exists()
    assert (tmp_path / "diagram.curve.csv.meta.json").exists()


def test_selftest_passes(capsys):
    code, out, _ = _run(capsys, ["selftest", "--samples", "3"])
    assert code == cli.EXIT_OK
    assert out.rstrip().endswith("all identity checks pass")
