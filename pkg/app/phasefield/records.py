"""Output records and the files they are written to.

Records are flat dataclasses with JSON-compatible fields. NDJSON uses one
``json.dumps(..., sort_keys=True)`` object per line; CSV uses a fixed column
order. Every output file gets a ``<file>.meta.json`` sidecar describing how it
was produced. Writes go through a temporary file in the target directory and
``Path.replace``, so a failed run never leaves a half-written file behind.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import os
import tempfile
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any

from app.phasefield.errors import ConfigReadError, RecordWriteError
from app.version import __version__

logger = logging.getLogger(__name__)

STABILITY = "stability"
GLOBAL = "global"
UNDETERMINED = "undetermined"
CURVE_KINDS = (STABILITY, GLOBAL, UNDETERMINED)

CURVE_HEADER = ("m", "a_lo", "a_hi", "kind")
WALLCLOCK_FIELDS = frozenset({"wallclock"})


@dataclass(frozen=True)
class SweepRecord:
    """One oracle decision at a parameter point, with every input that produced it."""

    model: str
    m: float
    a: float | None
    potential: str
    alpha: float | None
    gamma: float | None
    dim: int
    verdict: str
    margin: float
    pn_lower: float | None
    pn_upper: float | None
    threshold: float | None
    energy_gap: float | None
    witness_path: str | None
    seed: int
    wallclock: float

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> SweepRecord:
        names = {f.name for f in fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ConfigReadError(f"unknown record keys: {sorted(unknown)}")
        return cls(**{name: data.get(name) for name in names})  # type: ignore[arg-type]


@dataclass(frozen=True)
class CurvePoint:
    m: float
    a_lo: float
    a_hi: float
    kind: str

    def __post_init__(self) -> None:
        if self.kind not in CURVE_KINDS:
            raise ValueError(f"unknown curve kind {self.kind!r}")
        if self.a_lo > self.a_hi:
            raise ValueError(f"a_lo {self.a_lo} exceeds a_hi {self.a_hi}")

    def row(self) -> tuple[str, ...]:
        return (repr(self.m), repr(self.a_lo), repr(self.a_hi), self.kind)


@dataclass(frozen=True)
class FilmRecord:
    """One (L, h) point of the thin-film sequence; ``error`` is set when the point failed."""

    L: float
    h: float
    energy3d: float | None
    energy2d_ref: float | None
    vertical_energy: float | None
    vertical_energy_over_h4: float | None
    dist_to_2d: float | None
    mass_drift: float | None
    restarts: int
    seed: int
    error: str | None = None

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


def to_json_line(record: Any) -> str:
    body = record.to_dict() if hasattr(record, "to_dict") else dict(record)
    return json.dumps(body, sort_keys=True)


def strip_wallclock(line: str) -> str:
    """The NDJSON line without wallclock fields, for determinism comparisons."""
    body = json.loads(line)
    for key in WALLCLOCK_FIELDS:
        body.pop(key, None)
    return json.dumps(body, sort_keys=True)


def _atomic_write_text(path: Path, text: str) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, temp_name = tempfile.mkstemp(dir=str(path.parent), prefix=f".{path.name}-", suffix=".tmp")
    except OSError as exc:
        raise RecordWriteError(f"Could not write {path}: {exc}") from exc
    temp_path = Path(temp_name)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
        temp_path.replace(path)
    except OSError as exc:
        temp_path.unlink(missing_ok=True)
        raise RecordWriteError(f"Could not write {path}: {exc}") from exc


def render_ndjson(records: Iterable[Any]) -> str:
    return "".join(to_json_line(record) + "\n" for record in records)


def render_csv(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(["" if value is None else value for value in row])
    return buffer.getvalue()


def record_rows(records: Sequence[Any]) -> tuple[tuple[str, ...], list[list[Any]]]:
    """Header and rows for a CSV rendering of dataclass records (field order)."""
    if not records:
        return (), []
    header = tuple(f.name for f in fields(records[0]))
    rows = []
    for record in records:
        body = record.to_dict()
        rows.append([repr(v) if isinstance(v, float) else v for v in (body[name] for name in header)])
    return header, rows


def render_curve_csv(points: Iterable[CurvePoint]) -> str:
    return render_csv(CURVE_HEADER, (point.row() for point in points))


def write_ndjson(path: Path, records: Iterable[Any]) -> None:
    _atomic_write_text(path, render_ndjson(records))
    logger.debug("Wrote NDJSON %s", path)


def render_records_csv(records: Sequence[Any]) -> str:
    header, rows = record_rows(records)
    return render_csv(header, rows)


def write_records_csv(path: Path, records: Sequence[Any]) -> None:
    _atomic_write_text(path, render_records_csv(records))


def write_curve_csv(path: Path, points: Iterable[CurvePoint]) -> None:
    _atomic_write_text(path, render_curve_csv(points))


def read_ndjson(path: Path) -> list[dict[str, Any]]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigReadError(f"Could not read {path}: {exc}") from exc
    rows = []
    for number, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rows.append(json.loads(line))
        except ValueError as exc:
            raise ConfigReadError(f"{path}:{number} is not valid JSON: {exc}") from exc
    return rows


def metadata_path(path: Path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".meta.json")


def build_metadata(
    command: Sequence[str],
    *,
    seed: int | None,
    grid: Sequence[int] | None,
    band: int | None,
    boundary: Sequence[str] | None,
    extra: Mapping[str, Any] | None = None,
) -> dict[str, Any]:
    meta: dict[str, Any] = {
        "command": list(command),
        "seed": seed,
        "grid": list(grid) if grid is not None else None,
        "band": band,
        "boundary": list(boundary) if boundary is not None else None,
        "version": __version__,
    }
    if extra:
        meta.update(extra)
    return meta


def write_metadata(path: Path, meta: Mapping[str, Any]) -> Path:
    """Write the sidecar of ``path`` and return its location."""
    target = metadata_path(path)
    _atomic_write_text(target, json.dumps(dict(meta), indent=2, sort_keys=True) + "\n")
    return target


def read_metadata(path: Path) -> dict[str, Any]:
    target = metadata_path(path)
    try:
        return json.loads(target.read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise ConfigReadError(f"Could not read {target}: {exc}") from exc
