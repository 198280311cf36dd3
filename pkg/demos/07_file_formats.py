"""Round-trip the two on-disk formats: FMAT matrices and NDJSON units."""

import tempfile
from pathlib import Path

import numpy as np

from granalign import AlignedUnit, read_fmat, read_units, write_fmat, write_units

root = Path(tempfile.mkdtemp(prefix="granalign_demo_"))

# FMAT: little-endian row-major payload behind a JSON header
mat = np.arange(12, dtype=np.float32).reshape(3, 4) / 7.0
path = root / "demo.fmat"
write_fmat(path, mat, dtype="f32")
back = read_fmat(path)
print(f"wrote {mat.shape} f32 matrix, {path.stat().st_size} bytes on disk")
print(f"bitwise round trip: {np.array_equal(mat, back)}")

with open(path, "rb") as fh:
    head = fh.read(64)
print(f"magic {head[:4]!r}, header starts {head[12:44]!r}...")

# NDJSON: one unit per line, keys sorted, so files diff cleanly
units = [
    AlignedUnit("p", "phoneme", 0.00, 0.04, 0.92),
    AlignedUnit("a", "phoneme", 0.04, 0.10, 0.97),
    AlignedUnit("pa", "syllable", 0.00, 0.10, 0.95),
]
upath = root / "units.ndjson"
write_units(upath, units)
print(upath.read_text(encoding="utf-8"), end="")
assert read_units(upath) == units
print("unit round trip: True")
