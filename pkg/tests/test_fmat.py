"""Binary matrix container: layout, round trips, rejection of bad files."""

import json
import struct

import numpy as np
import pytest

from granalign import DataError, ValidationError, read_fmat, write_fmat


def test_round_trip_f32_bitwise(tmp_path, rng):
    path = tmp_path / "m.fmat"
    mat = rng.normal(size=(17, 5)).astype(np.float32)
    write_fmat(path, mat, dtype="f32")
    back = read_fmat(path)
    assert back.dtype == np.float32
    assert back.shape == (17, 5)
    assert back.tobytes() == mat.tobytes()


def test_round_trip_f64_bitwise(tmp_path, rng):
    path = tmp_path / "m.fmat"
    mat = rng.normal(size=(3, 9))
    write_fmat(path, mat, dtype="f64")
    back = read_fmat(path)
    assert back.dtype == np.float64
    assert back.tobytes() == mat.tobytes()


def test_layout_magic_version_header_payload(tmp_path):
    path = tmp_path / "m.fmat"
    mat = np.array([[1.0, 2.0], [3.0, 4.0]], dtype=np.float32)
    write_fmat(path, mat, dtype="f32")
    blob = path.read_bytes()
    assert blob[:4] == b"FMAT"
    version, header_len = struct.unpack("<II", blob[4:12])
    assert version == 1
    header = json.loads(blob[12 : 12 + header_len].decode("utf-8"))
    assert header == {
        "dtype": "f32",
        "shape": [2, 2],
        "order": "row-major",
        "endian": "little",
    }
    payload = blob[12 + header_len :]
    assert payload == struct.pack("<4f", 1.0, 2.0, 3.0, 4.0)  # row-major


def test_write_is_deterministic(tmp_path, rng):
    mat = rng.normal(size=(4, 4))
    a, b = tmp_path / "a.fmat", tmp_path / "b.fmat"
    write_fmat(a, mat)
    write_fmat(b, mat)
    assert a.read_bytes() == b.read_bytes()


def test_one_dimensional_input_becomes_column(tmp_path):
    path = tmp_path / "v.fmat"
    write_fmat(path, np.arange(3.0))
    assert read_fmat(path).shape == (3, 1)


def test_rejects_bad_magic(tmp_path):
    path = tmp_path / "x.fmat"
    path.write_bytes(b"NOPE" + b"\x00" * 20)
    with pytest.raises(DataError):
        read_fmat(path)


def test_rejects_unknown_version(tmp_path):
    path = tmp_path / "x.fmat"
    write_fmat(path, np.zeros((1, 1)))
    blob = bytearray(path.read_bytes())
    blob[4:8] = struct.pack("<I", 9)
    path.write_bytes(bytes(blob))
    with pytest.raises(DataError):
        read_fmat(path)


def test_rejects_payload_length_mismatch(tmp_path):
    path = tmp_path / "x.fmat"
    write_fmat(path, np.zeros((2, 3)), dtype="f32")
    blob = path.read_bytes()
    path.write_bytes(blob[:-4])  # drop one float
    with pytest.raises(DataError):
        read_fmat(path)


def test_rejects_three_dimensional_write(tmp_path):
    with pytest.raises(ValidationError):
        write_fmat(tmp_path / "x.fmat", np.zeros((2, 2, 2)))


def test_rejects_unknown_dtype(tmp_path):
    with pytest.raises(ValidationError):
        write_fmat(tmp_path / "x.fmat", np.zeros((1, 1)), dtype="i8")
