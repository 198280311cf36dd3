"""NDJSON streams: round trips, byte determinism, malformed input."""

import pytest

from granalign import (
    AlignedUnit,
    DataError,
    FeatureRef,
    SpeechSegment,
    TargetSequence,
    UtteranceRecord,
    read_records,
    read_segments,
    read_target,
    read_units,
    validate_granularity,
    write_records,
    write_segments,
    write_target,
    write_units,
)


def test_segments_round_trip(tmp_path):
    path = tmp_path / "segs.ndjson"
    segs = [SpeechSegment(0.0, 1.5), SpeechSegment(2.0, 30.0)]
    write_segments(path, segs)
    assert read_segments(path) == segs


def test_units_round_trip(tmp_path):
    path = tmp_path / "units.ndjson"
    units = [
        AlignedUnit("a", "phoneme", 0.0, 0.1, 0.9),
        AlignedUnit("pa", "syllable", 0.0, 0.25, 0.7),
    ]
    write_units(path, units)
    assert read_units(path) == units


def test_target_round_trip(tmp_path):
    path = tmp_path / "target.ndjson"
    target = TargetSequence.from_words([("pa", ["p", "a"]), ("ta", ["t", "a"])])
    write_target(path, target)
    assert read_target(path) == target


def test_records_round_trip(tmp_path):
    path = tmp_path / "records.ndjson"
    rec = UtteranceRecord(
        "u0",
        "s0",
        "es",
        "HC",
        2.5,
        (
            (AlignedUnit("a", "phoneme", 0.0, 0.1, 0.8), FeatureRef("f.fmat", 3)),
            (AlignedUnit("s", "phoneme", 0.1, 0.2, 0.6), FeatureRef("f.fmat", 4)),
        ),
    )
    write_records(path, [rec])
    assert read_records(path) == [rec]


def test_writes_are_byte_identical(tmp_path):
    units = [AlignedUnit("a", "phoneme", 0.0, 0.1, 0.9)]
    a, b = tmp_path / "a.ndjson", tmp_path / "b.ndjson"
    write_units(a, units)
    write_units(b, units)
    assert a.read_bytes() == b.read_bytes()


def test_keys_are_sorted_one_object_per_line(tmp_path):
    path = tmp_path / "u.ndjson"
    write_units(path, [AlignedUnit("a", "phoneme", 0.0, 0.1, 0.9)])
    lines = path.read_text(encoding="utf-8").splitlines()
    assert len(lines) == 1
    keys = list(__import__("json").loads(lines[0]).keys())
    assert keys == sorted(keys)


def test_ipa_symbols_survive_unescaped(tmp_path):
    path = tmp_path / "u.ndjson"
    write_units(path, [AlignedUnit("ʃə", "phoneme", 0.0, 0.1, 0.9)])
    text = path.read_text(encoding="utf-8")
    assert "ʃə" in text  # not \u escapes
    assert read_units(path)[0].label == "ʃə"


def test_invalid_json_reports_path_and_line(tmp_path):
    path = tmp_path / "bad.ndjson"
    path.write_text('{"start_s": 0.0, "end_s": 1.0}\n{broken\n', encoding="utf-8")
    with pytest.raises(DataError, match=r"bad\.ndjson:2"):
        read_segments(path)


def test_missing_field_rejected(tmp_path):
    path = tmp_path / "bad.ndjson"
    path.write_text('{"start_s": 0.0}\n', encoding="utf-8")
    with pytest.raises(DataError):
        read_segments(path)


def test_empty_target_rejected(tmp_path):
    path = tmp_path / "t.ndjson"
    path.write_text("", encoding="utf-8")
    with pytest.raises(DataError):
        read_target(path)


def test_validate_granularity():
    assert validate_granularity("phoneme") == "phoneme"
    assert validate_granularity("syllable") == "syllable"
    assert validate_granularity("word") == "word"
    with pytest.raises(DataError):
        validate_granularity("sentence")
