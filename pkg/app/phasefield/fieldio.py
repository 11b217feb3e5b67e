"""Read and write PFCF field files.

Layout, all little-endian: magic ``PFCF``, u16 version (1), u8 rank, u8
reserved (0), ``rank`` u32 sample counts, then f64 real-space samples in
row-major order (last axis fastest). Only samples are stored; the spectrum
is recomputed on load, so a round trip is bit-exact on the samples.
"""
from __future__ import annotations

import logging
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from app.phasefield.errors import FieldFormatError, InvalidGridError
from app.phasefield.spectral import NEUMANN, PERIODIC, Grid, SpectralField

logger = logging.getLogger(__name__)

MAGIC = b"PFCF"
VERSION = 1
_HEADER = struct.Struct("<4sHBB")
_SAMPLE_DTYPE = np.dtype("<f8")


def encode_field(field: SpectralField) -> bytes:
    if field.parity != "even":
        raise FieldFormatError("only cosine-parity fields can be stored")
    grid = field.grid
    header = _HEADER.pack(MAGIC, VERSION, grid.rank, 0)
    counts = struct.pack(f"<{grid.rank}I", *grid.shape)
    samples = np.ascontiguousarray(field.values, dtype=_SAMPLE_DTYPE).tobytes(order="C")
    return header + counts + samples


def decode_field(payload: bytes, *, neumann_last: bool = False) -> SpectralField:
    """Parse a PFCF payload. ``neumann_last`` marks the last axis as cosine series."""
    if len(payload) < _HEADER.size:
        raise FieldFormatError("truncated PFCF header")
    magic, version, rank, reserved = _HEADER.unpack_from(payload, 0)
    if magic != MAGIC:
        raise FieldFormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise FieldFormatError(f"unsupported PFCF version {version}")
    if reserved != 0:
        raise FieldFormatError(f"reserved byte is {reserved}, expected 0")
    if not 1 <= rank <= 3:
        raise FieldFormatError(f"rank {rank} outside 1..3")

    offset = _HEADER.size
    counts_size = 4 * rank
    if len(payload) < offset + counts_size:
        raise FieldFormatError("truncated PFCF sample counts")
    shape = struct.unpack_from(f"<{rank}I", payload, offset)
    offset += counts_size

    expected = int(np.prod(shape)) * _SAMPLE_DTYPE.itemsize
    if len(payload) - offset != expected:
        raise FieldFormatError(
            f"sample block has {len(payload) - offset} bytes, expected {expected} for shape {shape}"
        )

    kinds = (PERIODIC,) * (rank - 1) + ((NEUMANN,) if neumann_last else (PERIODIC,))
    try:
        grid = Grid(shape, kinds)
    except InvalidGridError as exc:
        raise FieldFormatError(f"PFCF grid is not usable: {exc}") from exc
    samples = np.frombuffer(payload, dtype=_SAMPLE_DTYPE, offset=offset).reshape(shape)
    return SpectralField(grid, values=samples.astype(np.float64))


def write_field(path: Path, field: SpectralField) -> None:
    """Write ``field`` to ``path`` atomically (temp file in the same directory, then replace)."""
    path = Path(path)
    payload = encode_field(field)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, temp_name = tempfile.mkstemp(dir=str(path.parent), prefix=".field-", suffix=".tmp")
    except OSError as exc:
        raise FieldFormatError(f"Could not write {path}: {exc}") from exc
    temp_path = Path(temp_name)
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(payload)
        temp_path.replace(path)
    except OSError as exc:
        temp_path.unlink(missing_ok=True)
        raise FieldFormatError(f"Could not write {path}: {exc}") from exc
    logger.debug("Wrote field %s to %s", field.grid.shape, path)


def read_field(path: Path, *, neumann_last: bool = False) -> SpectralField:
    path = Path(path)
    try:
        payload = path.read_bytes()
    except OSError as exc:
        raise FieldFormatError(f"Could not read {path}: {exc}") from exc
    try:
        return decode_field(payload, neumann_last=neumann_last)
    except FieldFormatError as exc:
        raise FieldFormatError(f"{path}: {exc}") from exc
