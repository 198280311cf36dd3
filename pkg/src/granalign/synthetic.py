"""Deterministic synthetic corpus for end-to-end runs and demos.

The generator plants ground truth first and derives observations from
it: each utterance gets a phoneme sequence with planted frame spans,
peaked emission rows around those spans, per-unit feature rows whose
mean depends on the class label, and a truth file with the planted
spans. Alignment, dataset construction and training can then be judged
against what was planted.

Corpus layout (all paths relative to the corpus root):

  symbols.txt                 one symbol per line, blank first
  corpus.ndjson               one line per utterance with file refs
  <utt>.emissions.fmat        T x V log-probabilities, f32
  <utt>.target.ndjson         word/phoneme target sequence
  <utt>.truth.ndjson          planted per-phoneme frame spans
  <utt>.features.<gran>.fmat  one feature row per unit, f64
"""

import json
import os
from dataclasses import dataclass

import numpy as np

from .ctc import BLANK_LABEL, TargetSequence
from .fmat import write_fmat
from .ndjson import dump_lines, write_target
from .syllables import PhonemeInventory, ssp_syllabify

_INVENTORY = PhonemeInventory()

CONSONANTS = ("p", "t", "k", "s", "m", "n", "l", "j")
VOWELS = ("a", "e", "i", "o")
SYMBOLS = (BLANK_LABEL,) + CONSONANTS + VOWELS

_DURATION_GROUPS = (4.0, 10.0, 20.0)  # nominal seconds per utterance
_LANGS = ("it", "es", "en")


@dataclass(frozen=True)
class CorpusSpec:
    n_speakers: int = 72  # divisible by 18 keeps every stratum populated
    utterances_per_speaker: int = 2
    feature_dim: int = 16
    frame_dur_s: float = 0.02
    signal: float = 1.5  # class-mean offset along a fixed direction
    noise: float = 0.5
    seed: int = 0


def _random_word(rng):
    n_syll = int(rng.integers(1, 4))
    phonemes = []
    for _ in range(n_syll):
        phonemes.append(CONSONANTS[rng.integers(len(CONSONANTS))])
        phonemes.append(VOWELS[rng.integers(len(VOWELS))])
    return "".join(phonemes), phonemes


def _plant_frames(phonemes, rng):
    """Frame spans per phoneme with blank gaps; a repeat forces a gap."""
    spans = []
    cursor = int(rng.integers(0, 3))  # leading blanks
    prev = None
    for ph in phonemes:
        gap = int(rng.integers(0, 3))
        if ph == prev and gap == 0:
            gap = 1
        cursor += gap
        length = int(rng.integers(2, 6))
        spans.append((cursor, cursor + length))
        cursor += length
        prev = ph
    total = cursor + int(rng.integers(0, 3))  # trailing blanks
    return spans, total


def _emission_rows(spans, phonemes, total, rng):
    v = len(SYMBOLS)
    planted = np.zeros(total, dtype=np.int64)  # blank everywhere else
    for (a, b), ph in zip(spans, phonemes):
        planted[a:b] = SYMBOLS.index(ph)
    peak = rng.uniform(0.88, 0.95, size=total)
    rest = rng.random((total, v))
    rows = rest / rest.sum(axis=1, keepdims=True) * (1.0 - peak)[:, None]
    rows[np.arange(total), planted] += peak
    rows /= rows.sum(axis=1, keepdims=True)
    return np.log(rows).astype(np.float32)


def _syllable_labels(target):
    labels = []
    for a, b in target.word_spans:
        word = list(target.phonemes[a:b])
        for syl in ssp_syllabify(word, _INVENTORY):
            lo, hi = syl.phoneme_range
            labels.append("".join(word[lo:hi]))
    return labels


def _feature_rows(n_rows, label, direction, spec, rng):
    sign = 1.0 if label == "PD" else -1.0
    base = sign * spec.signal * direction
    return base[None, :] + rng.normal(0.0, spec.noise, size=(n_rows, spec.feature_dim))


def generate_corpus(root, spec=CorpusSpec()):
    """Write a complete corpus under ``root``; returns the manifest rows."""
    if spec.n_speakers % (2 * len(_LANGS) * len(_DURATION_GROUPS)) != 0:
        raise ValueError(
            "n_speakers must be divisible by 18 so every label/language/"
            "duration stratum holds the same number of speakers"
        )
    os.makedirs(root, exist_ok=True)
    rng = np.random.default_rng(spec.seed)
    direction = rng.normal(size=spec.feature_dim)
    direction /= np.linalg.norm(direction)

    with open(os.path.join(root, "symbols.txt"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(SYMBOLS) + "\n")

    manifest = []
    per_cell = spec.n_speakers // (2 * len(_LANGS) * len(_DURATION_GROUPS))
    speaker_idx = 0
    for label in ("PD", "HC"):
        for lang in _LANGS:
            for dur_nominal in _DURATION_GROUPS:
                for _ in range(per_cell):
                    spk = f"spk{speaker_idx:03d}"
                    speaker_idx += 1
                    for k in range(spec.utterances_per_speaker):
                        utt = f"{spk}u{k}"
                        manifest.append(
                            _write_utterance(
                                root, utt, spk, lang, label, dur_nominal,
                                direction, spec, rng,
                            )
                        )
    dump_lines(os.path.join(root, "corpus.ndjson"), manifest)
    return manifest


def _write_utterance(root, utt, spk, lang, label, dur_nominal, direction, spec, rng):
    words = [_random_word(rng) for _ in range(int(rng.integers(2, 5)))]
    target = TargetSequence.from_words(words)
    spans, total = _plant_frames(target.phonemes, rng)

    write_fmat(
        os.path.join(root, f"{utt}.emissions.fmat"),
        _emission_rows(spans, target.phonemes, total, rng),
        dtype="f32",
    )
    write_target(os.path.join(root, f"{utt}.target.ndjson"), target)
    dump_lines(
        os.path.join(root, f"{utt}.truth.ndjson"),
        (
            {"end_frame": b, "label": ph, "start_frame": a}
            for (a, b), ph in zip(spans, target.phonemes)
        ),
    )

    unit_labels = {
        "phoneme": list(target.phonemes),
        "syllable": _syllable_labels(target),
        "word": list(target.word_texts),
    }
    features = {}
    for gran, labels in unit_labels.items():
        fname = f"{utt}.features.{gran}.fmat"
        write_fmat(
            os.path.join(root, fname),
            _feature_rows(len(labels), label, direction, spec, rng),
            dtype="f64",
        )
        features[gran] = fname

    return {
        "duration_s": round(float(dur_nominal + rng.uniform(-0.2, 0.2)), 3),
        "emissions": f"{utt}.emissions.fmat",
        "features": features,
        "frame_dur_s": spec.frame_dur_s,
        "label": label,
        "language": lang,
        "speaker_id": spk,
        "target": f"{utt}.target.ndjson",
        "truth": f"{utt}.truth.ndjson",
        "utterance_id": utt,
    }


def load_manifest(root):
    path = os.path.join(root, "corpus.ndjson")
    with open(path, "r", encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]
