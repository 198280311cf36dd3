"""Command-line surface: exit codes, artifacts, manifests, reruns."""

import hashlib
import json
import os

import numpy as np
import pytest

from granalign import read_fmat, read_units, write_fmat
from granalign.cli import run
from granalign.pipeline import align_corpus
from granalign.synthetic import CorpusSpec, generate_corpus


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpus")
    generate_corpus(root, CorpusSpec(n_speakers=72, utterances_per_speaker=1, feature_dim=8, seed=1))
    return root


@pytest.fixture(scope="module")
def aligned_units(corpus, tmp_path_factory):
    out = tmp_path_factory.mktemp("units")
    align_corpus(corpus, out)
    return out


def manifest_of(out_file):
    with open(str(out_file) + ".manifest.json", encoding="utf-8") as fh:
        return json.load(fh)


def test_version_exits_zero(capsys):
    assert run(["--version"]) == 0


def test_help_exits_zero(capsys):
    assert run(["train", "--help"]) == 0


def test_unknown_flag_is_usage_error(capsys):
    assert run(["vad", "--nope"]) == 64


def test_unknown_subcommand_is_usage_error(capsys):
    assert run(["frobnicate"]) == 64


def test_missing_required_flag_is_usage_error(capsys):
    assert run(["vad"]) == 64


def test_vad_writes_segments_and_manifest(tmp_path, capsys):
    # two speech runs 0.32 s apart: thresholding separates them, the
    # merge stage then fuses them back (total span 2.56 s < 30 s)
    probs = np.concatenate([np.full(50, 0.9), np.zeros(10), np.full(20, 0.9)])
    probs_path = tmp_path / "probs.fmat"
    write_fmat(probs_path, probs.reshape(-1, 1))
    out = tmp_path / "segs.ndjson"
    code = run(["vad", "--probs", str(probs_path), "--out", str(out)])
    assert code == 0
    lines = [json.loads(l) for l in out.read_text().splitlines()]
    assert len(lines) == 1
    assert lines[0]["start_s"] == 0.0
    assert lines[0]["end_s"] == pytest.approx(80 * 512 / 16000)

    manifest = manifest_of(out)
    assert manifest["subcommand"] == "vad"
    assert manifest["flags"]["threshold"] == 0.5
    assert str(out) in manifest["artifacts"]
    digest = hashlib.sha256(probs_path.read_bytes()).hexdigest()
    assert manifest["input_digests"][str(probs_path)] == digest
    assert manifest["started_utc"] <= manifest["finished_utc"]


def test_vad_missing_input_is_data_error(tmp_path, capsys):
    out = tmp_path / "segs.ndjson"
    assert run(["vad", "--probs", str(tmp_path / "nope.fmat"), "--out", str(out)]) == 2
    assert not out.with_name(out.name + ".manifest.json").exists()


def first_utt(corpus):
    utt = "spk000u0"
    return {
        "emissions": corpus / f"{utt}.emissions.fmat",
        "target": corpus / f"{utt}.target.ndjson",
        "symbols": corpus / "symbols.txt",
    }


def test_align_produces_grid_aligned_units(corpus, tmp_path, capsys):
    paths = first_utt(corpus)
    out = tmp_path / "phones.ndjson"
    words_out = tmp_path / "words.ndjson"
    code = run([
        "align",
        "--emissions", str(paths["emissions"]),
        "--symbols", str(paths["symbols"]),
        "--target", str(paths["target"]),
        "--out", str(out),
        "--words-out", str(words_out),
    ])
    assert code == 0
    units = read_units(out)
    assert units
    target_phonemes = []
    for line in paths["target"].read_text(encoding="utf-8").splitlines():
        target_phonemes.extend(json.loads(line)["phonemes"])
    assert [u.label for u in units] == target_phonemes
    for u in units:
        assert (u.start_s / 0.02) == pytest.approx(round(u.start_s / 0.02))
    words = read_units(words_out)
    assert all(w.granularity == "word" for w in words)
    assert words[0].start_s == units[0].start_s
    assert words[-1].end_s == units[-1].end_s


def test_align_rerun_is_byte_identical(corpus, tmp_path, capsys):
    paths = first_utt(corpus)
    outs = []
    for name in ("a.ndjson", "b.ndjson"):
        out = tmp_path / name
        assert run([
            "align",
            "--emissions", str(paths["emissions"]),
            "--symbols", str(paths["symbols"]),
            "--target", str(paths["target"]),
            "--out", str(out),
        ]) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


def test_align_missing_emissions_is_data_error(corpus, tmp_path, capsys):
    paths = first_utt(corpus)
    assert run([
        "align",
        "--emissions", str(tmp_path / "missing.fmat"),
        "--symbols", str(paths["symbols"]),
        "--target", str(paths["target"]),
        "--out", str(tmp_path / "u.ndjson"),
    ]) == 2


def test_align_without_blank_needs_blank_index(corpus, tmp_path, capsys):
    paths = first_utt(corpus)
    bare = tmp_path / "symbols.txt"
    # drop the blank row: alignment cannot guess the blank column
    rows = paths["symbols"].read_text(encoding="utf-8").split()
    bare.write_text("\n".join(rows[1:]) + "\n", encoding="utf-8")
    assert run([
        "align",
        "--emissions", str(paths["emissions"]),
        "--symbols", str(bare),
        "--target", str(paths["target"]),
        "--out", str(tmp_path / "u.ndjson"),
    ]) == 2


def test_syllabify_chain(corpus, tmp_path, capsys):
    paths = first_utt(corpus)
    phones = tmp_path / "phones.ndjson"
    assert run([
        "align",
        "--emissions", str(paths["emissions"]),
        "--symbols", str(paths["symbols"]),
        "--target", str(paths["target"]),
        "--out", str(phones),
    ]) == 0
    sylls = tmp_path / "sylls.ndjson"
    assert run([
        "syllabify",
        "--phones", str(phones),
        "--words", str(paths["target"]),
        "--out", str(sylls),
    ]) == 0
    units = read_units(sylls)
    assert units
    assert all(u.granularity == "syllable" for u in units)
    phone_units = read_units(phones)
    assert units[0].start_s == phone_units[0].start_s
    assert units[-1].end_s == phone_units[-1].end_s


def test_build_train_eval_attention_chain(corpus, aligned_units, tmp_path, capsys):
    data = tmp_path / "dataset"
    code = run([
        "build",
        "--corpus", str(corpus),
        "--units", os.path.join(str(aligned_units), "*.phones.ndjson"),
        "--granularity", "phoneme",
        "--out", str(data),
    ])
    assert code == 0
    assert (data / "records.ndjson").exists()
    split = json.loads((data / "split.json").read_text())
    assert (data / "manifest.json").exists()
    names = set(split["by_speaker"].values())
    assert names == {"train", "val", "test"}

    runs = tmp_path / "runs"
    code = run([
        "train",
        "--data", str(data),
        "--seed", "0..1",
        "--layers", "1",
        "--hidden", "8",
        "--heads", "2",
        "--dropout", "0.0",
        "--lr", "1e-3",
        "--batch-size", "16",
        "--epochs", "2",
        "--out", str(runs),
    ])
    assert code == 0
    for seed in (0, 1):
        run_dir = runs / f"seed{seed}"
        assert (run_dir / "run.json").exists()
        assert (run_dir / "checkpoint" / "manifest.ndjson").exists()
    manifest = json.loads((runs / "manifest.json").read_text())
    assert manifest["seeds"] == [0, 1]

    report = tmp_path / "report"
    assert run(["eval", "--runs", str(runs), "--out", str(report)]) == 0
    table = (report / "report.txt").read_text(encoding="utf-8")
    assert "±" in table
    assert "mean ± standard deviation" in table
    metrics_rows = [
        json.loads(l) for l in (report / "metrics.ndjson").read_text().splitlines()
    ]
    assert sum(1 for r in metrics_rows if r["kind"] == "run") == 2
    assert any(r["kind"] == "summary" for r in metrics_rows)

    attn_out = tmp_path / "attention.ndjson"
    assert run(["attention", "--runs", str(runs), "--out", str(attn_out)]) == 0
    rows = [json.loads(l) for l in attn_out.read_text(encoding="utf-8").splitlines()]
    assert rows
    assert all("total_mass" in r for r in rows)


def test_build_bad_split_ratios_is_validation_error(corpus, aligned_units, tmp_path, capsys):
    assert run([
        "build",
        "--corpus", str(corpus),
        "--units", os.path.join(str(aligned_units), "*.phones.ndjson"),
        "--split", "0.9,0.2,0.2",
        "--out", str(tmp_path / "d"),
    ]) == 1


def test_seed_env_fallback(corpus, aligned_units, tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("GRANALIGN_SEED", "7")
    data = tmp_path / "dataset"
    assert run([
        "build",
        "--corpus", str(corpus),
        "--units", os.path.join(str(aligned_units), "*.phones.ndjson"),
        "--out", str(data),
    ]) == 0
    manifest = json.loads((data / "manifest.json").read_text())
    assert manifest["seeds"] == [7]
    split = json.loads((data / "split.json").read_text())
    assert split["seed"] == 7
