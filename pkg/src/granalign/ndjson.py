"""NDJSON serialization for every stream the toolkit reads or writes.

One JSON object per line, UTF-8, keys sorted. Serialization is pure:
the same values produce byte-identical files, which is what makes
re-runs diffable. Schemas:

  segments   {"start_s", "end_s"}
  units      {"label", "granularity", "start_s", "end_s", "confidence"}
  targets    {"word", "phonemes": [...]} in word order
  records    UtteranceRecord with units carrying "feature_ref"
"""

import json

from .ctc import AlignedUnit, GRANULARITIES, TargetSequence
from .dataset import FeatureRef, UtteranceRecord
from .errors import DataError
from .vad import SpeechSegment


def dump_lines(path, objs):
    with open(path, "w", encoding="utf-8") as fh:
        for obj in objs:
            fh.write(json.dumps(obj, sort_keys=True, ensure_ascii=False))
            fh.write("\n")


def load_lines(path):
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                out.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: invalid JSON ({exc})") from exc
    return out


def write_segments(path, segments):
    dump_lines(path, ({"end_s": s.end_s, "start_s": s.start_s} for s in segments))


def read_segments(path):
    out = []
    for obj in load_lines(path):
        try:
            out.append(SpeechSegment(float(obj["start_s"]), float(obj["end_s"])))
        except KeyError as exc:
            raise DataError(f"{path}: segment line missing {exc}") from exc
    return out


def write_units(path, units):
    dump_lines(
        path,
        (
            {
                "confidence": u.confidence,
                "end_s": u.end_s,
                "granularity": u.granularity,
                "label": u.label,
                "start_s": u.start_s,
            }
            for u in units
        ),
    )


def read_units(path):
    out = []
    for obj in load_lines(path):
        try:
            out.append(
                AlignedUnit(
                    label=obj["label"],
                    granularity=obj["granularity"],
                    start_s=float(obj["start_s"]),
                    end_s=float(obj["end_s"]),
                    confidence=float(obj["confidence"]),
                )
            )
        except KeyError as exc:
            raise DataError(f"{path}: unit line missing {exc}") from exc
    return out


def write_target(path, target):
    dump_lines(
        path,
        (
            {"phonemes": list(target.phonemes[a:b]), "word": text}
            for (a, b), text in zip(target.word_spans, target.word_texts)
        ),
    )


def read_target(path):
    words = []
    for obj in load_lines(path):
        try:
            words.append((obj["word"], list(obj["phonemes"])))
        except KeyError as exc:
            raise DataError(f"{path}: target line missing {exc}") from exc
    if not words:
        raise DataError(f"{path}: empty target")
    return TargetSequence.from_words(words)


def _unit_to_obj(unit, ref):
    return {
        "confidence": unit.confidence,
        "end_s": unit.end_s,
        "feature_ref": {"file": ref.file, "row": ref.row},
        "granularity": unit.granularity,
        "label": unit.label,
        "start_s": unit.start_s,
    }


def write_records(path, records):
    dump_lines(
        path,
        (
            {
                "duration_s": r.duration_s,
                "label": r.label,
                "language": r.language,
                "speaker_id": r.speaker_id,
                "units": [_unit_to_obj(u, ref) for u, ref in r.units],
                "utterance_id": r.utterance_id,
            }
            for r in records
        ),
    )


def read_records(path):
    out = []
    for obj in load_lines(path):
        try:
            units = tuple(
                (
                    AlignedUnit(
                        label=u["label"],
                        granularity=u["granularity"],
                        start_s=float(u["start_s"]),
                        end_s=float(u["end_s"]),
                        confidence=float(u["confidence"]),
                    ),
                    FeatureRef(u["feature_ref"]["file"], int(u["feature_ref"]["row"])),
                )
                for u in obj["units"]
            )
            out.append(
                UtteranceRecord(
                    utterance_id=obj["utterance_id"],
                    speaker_id=obj["speaker_id"],
                    language=obj["language"],
                    label=obj["label"],
                    duration_s=float(obj["duration_s"]),
                    units=units,
                )
            )
        except KeyError as exc:
            raise DataError(f"{path}: record line missing {exc}") from exc
    return out


def validate_granularity(name):
    if name not in GRANULARITIES:
        raise DataError(f"granularity must be one of {GRANULARITIES}, got {name!r}")
    return name
