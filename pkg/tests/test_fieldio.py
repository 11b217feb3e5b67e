"""Tests for PFCF field files (app/phasefield/fieldio.py)."""
import struct

import numpy as np
import pytest

from app.phasefield.errors import FieldFormatError
from app.phasefield.fieldio import MAGIC, decode_field, encode_field, read_field, write_field
from app.phasefield.spectral import NEUMANN, SpectralField, partial_derivative, random_field


def test_write_then_read_is_bit_exact(tmp_path, square, rng):
    field = random_field(square, rng, 6, mean=0.2, rms=1.0)
    path = tmp_path / "phi.pfcf"
    write_field(path, field)
    loaded = read_field(path)
    assert loaded.grid == square
    assert np.array_equal(loaded.values, field.values)


def test_header_layout(square):
    payload = encode_field(SpectralField.constant(square, 1.0))
    assert payload[:4] == MAGIC
    assert struct.unpack_from("<HBB", payload, 4) == (1, 2, 0)
    assert struct.unpack_from("<2I", payload, 8) == (16, 16)
    assert len(payload) == 8 + 8 + 8 * 256


def test_film_fields_need_the_boundary_flag(film, rng):
    field = random_field(film, rng, 3)
    payload = encode_field(field)
    assert decode_field(payload, neumann_last=True).grid.axis_kinds[-1] == NEUMANN
    assert decode_field(payload).grid.axis_kinds[-1] != NEUMANN


@pytest.mark.parametrize(
    "mangle, message",
    [
        (lambda p: b"XXXX" + p[4:], "magic"),
        (lambda p: p[:4] + struct.pack("<H", 2) + p[6:], "version"),
        (lambda p: p[:7] + b"\x01" + p[8:], "reserved"),
        (lambda p: p[:-8], "sample block"),
        (lambda p: p[:5], "truncated"),
    ],
)
def test_corrupt_payloads_are_rejected(square, mangle, message):
    payload = encode_field(SpectralField.constant(square, 1.0))
    with pytest.raises(FieldFormatError, match=message):
        decode_field(mangle(payload))


def test_unusable_grid_is_a_format_error():
    payload = MAGIC + struct.pack("<HBB", 1, 1, 0) + struct.pack("<I", 5) + np.zeros(5).tobytes()
    with pytest.raises(FieldFormatError, match="grid"):
        decode_field(payload)


def test_odd_fields_cannot_be_stored(film):
    derivative = partial_derivative(SpectralField.constant(film, 1.0), 2)
    with pytest.raises(FieldFormatError):
        encode_field(derivative)


def test_missing_file_is_a_format_error(tmp_path):
    with pytest.raises(FieldFormatError, match="Could not read"):
        read_field(tmp_path / "absent.pfcf")


def test_write_leaves_no_temporary_files(tmp_path, square):
    write_field(tmp_path / "a.pfcf", SpectralField.constant(square, 0.0))
    assert [p.name for p in tmp_path.iterdir()] == ["a.pfcf"]
