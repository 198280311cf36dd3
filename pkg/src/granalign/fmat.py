"""FMAT: the binary matrix container shared by every pipeline stage.

Layout, in order:

  bytes 0..3    magic ``FMAT``
  bytes 4..7    format version, little-endian u32, currently 1
  bytes 8..11   header length in bytes, little-endian u32
  header        UTF-8 JSON, e.g.
                {"dtype":"f32","shape":[rows,cols],"order":"row-major",
                 "endian":"little"}
  payload       rows*cols little-endian floats, row-major

``dtype`` is ``"f32"`` for features and emissions; ``"f64"`` is accepted
for checkpoints so training precision survives a save/load round trip.
Readers reject any file whose payload length disagrees with the header.
"""

import json
import struct

import numpy as np

from .errors import DataError, ValidationError

MAGIC = b"FMAT"
VERSION = 1

_DTYPES = {"f32": np.dtype("<f4"), "f64": np.dtype("<f8")}


def write_fmat(path, matrix, dtype="f32"):
    """Write a 2-D array to ``path``. Returns the numpy array as stored."""
    if dtype not in _DTYPES:
        raise ValidationError(f"unsupported FMAT dtype {dtype!r}")
    arr = np.asarray(matrix)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise ValidationError(f"FMAT stores 2-D matrices, got shape {arr.shape}")
    arr = np.ascontiguousarray(arr, dtype=_DTYPES[dtype])
    header = {
        "dtype": dtype,
        "shape": [int(arr.shape[0]), int(arr.shape[1])],
        "order": "row-major",
        "endian": "little",
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        fh.write(struct.pack("<I", len(header_bytes)))
        fh.write(header_bytes)
        fh.write(arr.tobytes(order="C"))
    return arr


def read_fmat(path):
    """Read an FMAT file into a 2-D numpy array (native byte order)."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 12 or blob[:4] != MAGIC:
        raise DataError(f"{path}: not an FMAT file (bad magic)")
    version, header_len = struct.unpack("<II", blob[4:12])
    if version != VERSION:
        raise DataError(f"{path}: unsupported FMAT version {version}")
    if len(blob) < 12 + header_len:
        raise DataError(f"{path}: truncated header")
    try:
        header = json.loads(blob[12 : 12 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DataError(f"{path}: malformed FMAT header: {exc}") from exc
    for key in ("dtype", "shape", "order", "endian"):
        if key not in header:
            raise DataError(f"{path}: FMAT header missing {key!r}")
    if header["endian"] != "little":
        raise DataError(f"{path}: unsupported endianness {header['endian']!r}")
    if header["order"] != "row-major":
        raise DataError(f"{path}: unsupported order {header['order']!r}")
    if header["dtype"] not in _DTYPES:
        raise DataError(f"{path}: unsupported dtype {header['dtype']!r}")
    shape = header["shape"]
    if (
        not isinstance(shape, list)
        or len(shape) != 2
        or not all(isinstance(n, int) and n >= 0 for n in shape)
    ):
        raise DataError(f"{path}: bad FMAT shape {shape!r}")
    dt = _DTYPES[header["dtype"]]
    payload = blob[12 + header_len :]
    expected = shape[0] * shape[1] * dt.itemsize
    if len(payload) != expected:
        raise DataError(
            f"{path}: payload length {len(payload)} does not match header "
            f"shape {shape} ({expected} bytes expected)"
        )
    arr = np.frombuffer(payload, dtype=dt).reshape(shape)
    return arr.astype(arr.dtype.newbyteorder("="), copy=True)
