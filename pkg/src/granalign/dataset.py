"""Corpus construction: confidence filtering, stratified speaker-
independent splitting, and dynamically padded batches.

Speakers never straddle splits. Stratification crosses diagnosis label,
language and per-speaker total-duration quantile bins; within each
stratum speakers are assigned greedily to whichever split is currently
furthest below its target share, which keeps every stratum within one
speaker of the exact ratios.
"""

from dataclasses import dataclass, field

import numpy as np

from .ctc import GRANULARITIES, AlignedUnit
from .errors import DataError, ValidationError
from .fmat import read_fmat

LANGUAGES = ("it", "es", "en")
LABELS = ("PD", "HC")
SPLITS = ("train", "val", "test")


@dataclass(frozen=True)
class FeatureRef:
    """Row address of one unit's feature vector: (file, row)."""

    file: str
    row: int


@dataclass(frozen=True)
class UtteranceRecord:
    utterance_id: str
    speaker_id: str
    language: str
    label: str
    duration_s: float
    units: tuple  # of (AlignedUnit, FeatureRef)

    def __post_init__(self):
        object.__setattr__(self, "units", tuple(self.units))
        if self.language not in LANGUAGES:
            raise ValidationError(f"unknown language {self.language!r}")
        if self.label not in LABELS:
            raise ValidationError(f"unknown label {self.label!r}")
        if self.duration_s <= 0:
            raise ValidationError(f"duration_s must be positive, got {self.duration_s}")
        starts = [u.start_s for u, _ in self.units]
        if starts != sorted(starts):
            raise ValidationError(f"units of {self.utterance_id!r} not sorted by start")

    def with_units(self, units):
        return UtteranceRecord(
            self.utterance_id,
            self.speaker_id,
            self.language,
            self.label,
            self.duration_s,
            tuple(units),
        )


class FeatureStore:
    """Lazy reader over FMAT feature files, indexed by (file, row).

    All files must share one row dimension; rows must be finite.
    """

    def __init__(self, root="."):
        self.root = root
        self._cache = {}
        self._dim = None

    def _load(self, name):
        if name not in self._cache:
            import os

            mat = read_fmat(os.path.join(self.root, name))
            if not np.all(np.isfinite(mat)):
                raise DataError(f"{name}: feature rows must be finite")
            if self._dim is None:
                self._dim = mat.shape[1]
            elif mat.shape[1] != self._dim:
                raise DataError(
                    f"{name}: feature dimension {mat.shape[1]} != store dimension {self._dim}"
                )
            self._cache[name] = mat
        return self._cache[name]

    @property
    def dim(self):
        if self._dim is None:
            raise DataError("feature store dimension unknown before any read")
        return self._dim

    def get(self, ref):
        mat = self._load(ref.file)
        if not 0 <= ref.row < mat.shape[0]:
            raise DataError(f"{ref.file}: row {ref.row} outside 0..{mat.shape[0] - 1}")
        return mat[ref.row]


@dataclass(frozen=True)
class SplitAssignment:
    by_speaker: dict  # speaker_id -> split name
    seed: int

    def speakers(self, split):
        return sorted(s for s, v in self.by_speaker.items() if v == split)

    def select(self, records, split):
        return [r for r in records if self.by_speaker[r.speaker_id] == split]


@dataclass
class Batch:
    """Dynamically padded batch; padded positions are zero and unmasked."""

    features: np.ndarray  # B x Lmax x D
    mask: np.ndarray  # B x Lmax bool, True = real step
    labels: np.ndarray  # B ints, PD = 1
    lengths: np.ndarray  # B ints
    utterance_ids: list = field(default_factory=list)
    speaker_ids: list = field(default_factory=list)
    unit_labels: list = field(default_factory=list)  # per sequence, per step


def filter_units(records, conf_threshold):
    """Drop units below the confidence threshold; records left empty are
    dropped too and their ids reported."""
    if not 0.0 <= conf_threshold <= 1.0:
        raise ValidationError(f"confidence threshold {conf_threshold} outside [0, 1]")
    kept = []
    dropped_ids = []
    for rec in records:
        units = tuple(
            (u, ref) for u, ref in rec.units if u.confidence >= conf_threshold
        )
        if units:
            kept.append(rec.with_units(units))
        else:
            dropped_ids.append(rec.utterance_id)
    return kept, dropped_ids


def select_granularity(records, granularity):
    """Keep only units of one granularity; records left empty are flagged."""
    if granularity not in GRANULARITIES:
        raise ValidationError(f"unknown granularity {granularity!r}")
    out = []
    flagged = []
    for rec in records:
        units = tuple((u, ref) for u, ref in rec.units if u.granularity == granularity)
        if not units:
            flagged.append(rec.utterance_id)
        out.append(rec.with_units(units))
    return out, flagged


def _duration_bins(speaker_durations, n_bins):
    """Value-based quantile bins over per-speaker total durations."""
    values = np.array(list(speaker_durations.values()))
    qs = np.quantile(values, [k / n_bins for k in range(1, n_bins)])
    return {
        spk: int(np.searchsorted(qs, d, side="right"))
        for spk, d in speaker_durations.items()
    }


def stratified_speaker_split(records, ratios=(0.6, 0.2, 0.2), n_duration_bins=3, seed=0):
    """Speaker-independent split stratified by label, language and
    duration bin.

    Within each stratum, speakers are shuffled by seed, ordered by
    descending record count, then assigned greedily to the split whose
    fill is furthest below its target (ties go to train, then val).
    """
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValidationError(f"split ratios {ratios} do not sum to 1")
    if len(ratios) != 3:
        raise ValidationError("exactly three ratios (train, val, test) expected")

    info = {}
    for rec in records:
        entry = info.setdefault(
            rec.speaker_id, {"label": rec.label, "language": rec.language, "dur": 0.0, "n": 0}
        )
        if entry["label"] != rec.label:
            raise DataError(f"speaker {rec.speaker_id!r} has conflicting labels")
        if entry["language"] != rec.language:
            raise DataError(f"speaker {rec.speaker_id!r} has conflicting languages")
        entry["dur"] += rec.duration_s
        entry["n"] += 1
    if len(info) < 3:
        raise ValidationError(
            f"need at least 3 speakers to form train/val/test, got {len(info)}"
        )

    bins = _duration_bins({s: e["dur"] for s, e in info.items()}, n_duration_bins)
    strata = {}
    for spk, entry in info.items():
        key = (entry["label"], entry["language"], bins[spk])
        strata.setdefault(key, []).append(spk)

    rng = np.random.default_rng(seed)
    assignment = {}
    for key in sorted(strata):
        speakers = sorted(strata[key])
        rng.shuffle(speakers)
        speakers.sort(key=lambda s: -info[s]["n"])  # stable: keeps shuffle order on ties
        targets = [r * len(speakers) for r in ratios]
        counts = [0, 0, 0]
        for spk in speakers:
            deficits = [t - c for t, c in zip(targets, counts)]
            pick = max(range(3), key=lambda i: (deficits[i], -i))
            counts[pick] += 1
            assignment[spk] = SPLITS[pick]
    return SplitAssignment(by_speaker=assignment, seed=seed)


def make_batches(records, store, batch_size=32, seed=0):
    """Deterministically shuffled, dynamically padded batches.

    The final partial batch is retained. Records with zero units are
    rejected: they should have been filtered out earlier.
    """
    if batch_size < 1:
        raise ValidationError(f"batch_size must be >= 1, got {batch_size}")
    for rec in records:
        if not rec.units:
            raise DataError(f"record {rec.utterance_id!r} has zero units")
    if not records:
        return []

    order = np.random.default_rng(seed).permutation(len(records))
    shuffled = [records[i] for i in order]
    dim = store.get(shuffled[0].units[0][1]).shape[0]

    batches = []
    for lo in range(0, len(shuffled), batch_size):
        chunk = shuffled[lo : lo + batch_size]
        lengths = np.array([len(r.units) for r in chunk], dtype=np.int64)
        lmax = int(lengths.max())
        feats = np.zeros((len(chunk), lmax, dim))
        mask = np.zeros((len(chunk), lmax), dtype=bool)
        for i, rec in enumerate(chunk):
            for j, (_, ref) in enumerate(rec.units):
                feats[i, j] = store.get(ref)
            mask[i, : lengths[i]] = True
        labels = np.array([1 if r.label == "PD" else 0 for r in chunk], dtype=np.int64)
        batches.append(
            Batch(
                features=feats,
                mask=mask,
                labels=labels,
                lengths=lengths,
                utterance_ids=[r.utterance_id for r in chunk],
                speaker_ids=[r.speaker_id for r in chunk],
                unit_labels=[[u.label for u, _ in r.units] for r in chunk],
            )
        )
    return batches
