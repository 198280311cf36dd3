"""Export routines.

All artifacts use the granalign on-disk formats: FMAT for matrices
and NDJSON for sidecar metadata, so the outputs can be read back by
the granalign IO functions and fed straight into its aligner and
dataset builder.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from granalign import read_units, write_fmat

from .audio import SAMPLE_RATE, load_audio
from .backends import DEFAULT_MODEL, FRAME_DUR_S, get_backend
from .errors import ValidationError

DEFAULT_LAYERS = (0, 6, 12, 18, 24)


@dataclass(frozen=True)
class ExportJob:
    """One audio file to export, with the model and layers to use."""

    audio: str
    out_dir: str
    model: str = DEFAULT_MODEL
    layers: tuple = field(default_factory=lambda: DEFAULT_LAYERS)

    def __post_init__(self):
        if not self.layers:
            raise ValidationError("at least one layer is required")
        for layer in self.layers:
            if int(layer) != layer or layer < 0:
                raise ValidationError(
                    f"layer indices must be non-negative integers, got {layer!r}"
                )

    @property
    def stem(self) -> str:
        return Path(self.audio).stem


def _ensure_out_dir(job: ExportJob) -> Path:
    out = Path(job.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def export_emissions(job: ExportJob, backend=None) -> dict:
    """Write CTC emission log-probabilities plus their symbol table.

    Produces <stem>.emissions.fmat (float32, frames x symbols),
    <stem>.symbols.txt (one symbol per line, blank first) and
    <stem>.meta.ndjson describing the frame geometry.
    """
    if backend is None:
        backend = get_backend(job.model)
    samples = load_audio(job.audio)
    logprobs = backend.emission_logprobs(samples)

    out = _ensure_out_dir(job)
    fmat_path = out / f"{job.stem}.emissions.fmat"
    write_fmat(fmat_path, logprobs.astype(np.float32))

    symbols_path = out / f"{job.stem}.symbols.txt"
    symbols = list(backend.symbols)
    if backend.blank_index != 0:
        # granalign expects the blank first; reorder and remember it.
        symbols.insert(0, symbols.pop(backend.blank_index))
    symbols_path.write_text("".join(s + "\n" for s in symbols), encoding="utf-8")

    meta_path = out / f"{job.stem}.meta.ndjson"
    meta = {
        "audio": str(job.audio),
        "blank_index": 0,
        "frame_dur_s": FRAME_DUR_S,
        "model": backend.model,
        "n_frames": int(logprobs.shape[0]),
        "sample_rate": SAMPLE_RATE,
    }
    meta_path.write_text(json.dumps(meta, sort_keys=True) + "\n", encoding="utf-8")
    return {
        "emissions": str(fmat_path),
        "symbols": str(symbols_path),
        "meta": str(meta_path),
        "n_frames": int(logprobs.shape[0]),
    }


def _pool_span(feats: np.ndarray, centers: np.ndarray, start_s: float, end_s: float):
    """Mean of the frames whose centers fall inside [start_s, end_s).

    Returns (row, flagged). Accumulation runs in float64 over rows
    taken in center order, so the result does not depend on how the
    frames happened to be laid out.
    """
    mask = (centers >= start_s) & (centers < end_s)
    if not mask.any():
        return np.zeros(feats.shape[1], dtype=np.float32), True
    rows = np.flatnonzero(mask)
    rows = rows[np.argsort(centers[rows], kind="stable")]
    pooled = feats[rows].astype(np.float64).mean(axis=0)
    return pooled.astype(np.float32), False


def export_unit_features(job: ExportJob, units_path: str, layer: int, backend=None) -> dict:
    """Pool one layer's frame features over aligned unit spans.

    Each unit contributes one row to <stem>.units.layer{L}.fmat; a
    manifest NDJSON maps rows back to labels and times. Units whose
    span contains no frame center yield a zero row and are flagged.
    """
    if backend is None:
        backend = get_backend(job.model)
    units = read_units(units_path)
    if not units:
        raise ValidationError(f"no units in {units_path!r}")

    samples = load_audio(job.audio)
    duration_s = samples.size / SAMPLE_RATE
    for unit in units:
        if unit.start_s < 0 or unit.end_s > duration_s + 1e-9:
            raise ValidationError(
                f"unit {unit.label!r} spans [{unit.start_s}, {unit.end_s}) "
                f"outside the {duration_s:.3f}s audio"
            )

    feats = backend.frame_features(samples, layer)
    centers = (np.arange(feats.shape[0]) + 0.5) * FRAME_DUR_S

    rows = np.empty((len(units), feats.shape[1]), dtype=np.float32)
    flags = []
    for i, unit in enumerate(units):
        rows[i], flagged = _pool_span(feats, centers, unit.start_s, unit.end_s)
        flags.append(flagged)
        if flagged:
            warnings.warn(
                f"unit {unit.label!r} [{unit.start_s}, {unit.end_s}) contains "
                "no frame center; emitting a zero row"
            )

    out = _ensure_out_dir(job)
    fmat_path = out / f"{job.stem}.units.layer{int(layer):02d}.fmat"
    write_fmat(fmat_path, rows)

    manifest_path = out / f"{job.stem}.units.layer{int(layer):02d}.manifest.ndjson"
    with open(manifest_path, "w", encoding="utf-8") as handle:
        for i, unit in enumerate(units):
            handle.write(
                json.dumps(
                    {
                        "end_s": unit.end_s,
                        "file": fmat_path.name,
                        "flagged": flags[i],
                        "granularity": unit.granularity,
                        "label": unit.label,
                        "row": i,
                        "start_s": unit.start_s,
                    },
                    sort_keys=True,
                )
                + "\n"
            )
    return {
        "features": str(fmat_path),
        "manifest": str(manifest_path),
        "n_units": len(units),
        "n_flagged": sum(flags),
    }


def export_frame_features(job: ExportJob, layer: int, backend=None) -> dict:
    """Write one layer's raw frame features, one row per frame."""
    if backend is None:
        backend = get_backend(job.model)
    samples = load_audio(job.audio)
    feats = backend.frame_features(samples, layer)
    out = _ensure_out_dir(job)
    fmat_path = out / f"{job.stem}.frames.layer{int(layer):02d}.fmat"
    write_fmat(fmat_path, feats.astype(np.float32))
    return {"features": str(fmat_path), "n_frames": int(feats.shape[0])}
