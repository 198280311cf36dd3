"""End-to-end tests for granalign-export, including interop with the
granalign align subcommand consuming exported emissions."""

import json

import numpy as np
import pytest
from granalign import TargetSequence, read_fmat, read_units, write_target
from granalign.cli import run as granalign_run

from granalign_exporter.cli import run

from test_exporter import tone_wav, write_units_file


def test_synthetic_export_writes_all_artifacts(tmp_path):
    audio = tone_wav(tmp_path / "utt.wav")
    out = tmp_path / "feats"
    code = run(
        [
            "--audio", str(audio),
            "--out", str(out),
            "--model", "synthetic",
            "--layers", "0,12",
        ]
    )
    assert code == 0
    assert (out / "utt.emissions.fmat").exists()
    assert (out / "utt.symbols.txt").exists()
    assert (out / "utt.meta.ndjson").exists()
    assert (out / "utt.frames.layer00.fmat").exists()
    assert (out / "utt.frames.layer12.fmat").exists()
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["model"] == "synthetic"
    assert manifest["layers"] == [0, 12]
    assert set(manifest["artifacts"]["layers"]) == {"0", "12"}


def test_units_flag_switches_to_pooled_features(tmp_path):
    audio = tone_wav(tmp_path / "utt.wav")
    units_path = write_units_file(
        tmp_path / "units.ndjson",
        [("pa", 0.0, 0.5), ("ta", 0.5, 1.0)],
    )
    out = tmp_path / "feats"
    code = run(
        [
            "--audio", str(audio),
            "--out", str(out),
            "--model", "synthetic",
            "--layers", "12",
            "--units", str(units_path),
        ]
    )
    assert code == 0
    rows = read_fmat(out / "utt.units.layer12.fmat")
    assert rows.shape == (2, 1024)
    assert (out / "utt.units.layer12.manifest.ndjson").exists()
    assert not (out / "utt.frames.layer12.fmat").exists()


def test_missing_audio_exits_2(tmp_path, capsys):
    code = run(
        [
            "--audio", str(tmp_path / "missing.wav"),
            "--out", str(tmp_path / "o"),
            "--model", "synthetic",
        ]
    )
    assert code == 2
    assert "data error" in capsys.readouterr().err


def test_bad_layers_exit_1(tmp_path, capsys):
    audio = tone_wav(tmp_path / "utt.wav")
    for bad in ("-3", "twelve", ""):
        code = run(
            [
                "--audio", str(audio),
                "--out", str(tmp_path / "o"),
                "--model", "synthetic",
                "--layers", bad,
            ]
        )
        assert code == 1, bad
    assert "validation error" in capsys.readouterr().err


def test_unknown_flag_exits_64(capsys):
    assert run(["--audio", "a.wav", "--out", "o", "--frobnicate"]) == 64
    assert run([]) == 64
    capsys.readouterr()


def test_help_exits_0(capsys):
    assert run(["--help"]) == 0
    assert "granalign-export" in capsys.readouterr().out


def test_unreachable_model_exits_3(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("HF_HUB_OFFLINE", "1")
    monkeypatch.setenv("TRANSFORMERS_OFFLINE", "1")
    audio = tone_wav(tmp_path / "utt.wav")
    code = run(
        [
            "--audio", str(audio),
            "--out", str(tmp_path / "o"),
            "--model", "definitely/not-a-real-model",
        ]
    )
    assert code == 3
    assert "model unavailable" in capsys.readouterr().err


def test_manifest_not_written_on_failure(tmp_path):
    out = tmp_path / "o"
    out.mkdir()
    code = run(
        [
            "--audio", str(tmp_path / "missing.wav"),
            "--out", str(out),
            "--model", "synthetic",
        ]
    )
    assert code == 2
    assert not (out / "manifest.json").exists()


def test_exported_emissions_feed_the_aligner(tmp_path):
    """granalign align must accept exported emissions, symbols and a
    target with no massaging in between."""
    audio = tone_wav(tmp_path / "utt.wav", seconds=2.0)
    feats = tmp_path / "feats"
    assert run(["--audio", str(audio), "--out", str(feats), "--model", "synthetic", "--layers", "0"]) == 0

    symbols = (feats / "utt.symbols.txt").read_text().splitlines()
    target_path = tmp_path / "target.ndjson"
    # Build a two-word target from non-blank symbols the table holds.
    word1 = [symbols[1], symbols[2]]
    word2 = [symbols[3], symbols[1]]
    write_target(
        target_path,
        TargetSequence.from_words([("w1", word1), ("w2", word2)]),
    )

    units_out = tmp_path / "aligned.ndjson"
    words_out = tmp_path / "words.ndjson"
    code = granalign_run(
        [
            "align",
            "--emissions", str(feats / "utt.emissions.fmat"),
            "--symbols", str(feats / "utt.symbols.txt"),
            "--target", str(target_path),
            "--out", str(units_out),
            "--words-out", str(words_out),
        ]
    )
    assert code == 0
    units = read_units(units_out)
    assert [u.label for u in units] == word1 + word2
    meta = json.loads((feats / "utt.meta.ndjson").read_text())
    assert all(u.end_s <= meta["n_frames"] * meta["frame_dur_s"] + 1e-9 for u in units)

    # And the exported unit features line up with those alignments.
    assert run(
        [
            "--audio", str(audio),
            "--out", str(feats),
            "--model", "synthetic",
            "--layers", "12",
            "--units", str(units_out),
        ]
    ) == 0
    rows = read_fmat(feats / "utt.units.layer12.fmat")
    assert rows.shape == (len(units), 1024)
    assert np.isfinite(rows).all()
