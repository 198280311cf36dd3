"""Command-line entry point.

Subcommands map one-to-one onto the pipeline stages: vad, align,
syllabify, build, train, eval, attention, plus `pipeline`, which chains
everything over a corpus directory. Every successful run writes exactly
one manifest recording the toolkit version, the full flag set, content
digests of the named inputs, the seeds in effect and the artifacts
written; timestamps live only in the manifest so repeated runs with the
same inputs produce byte-identical data files.

Exit codes: 0 success, 1 validation or numeric error, 2 data error
(including missing inputs), 64 usage error.
"""

import argparse
import glob as globlib
import hashlib
import json
import os
import sys
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .ctc import BLANK_LABEL
from .errors import DataError, GranalignError, ValidationError
from .fmat import read_fmat
from .model import ClassifierConfig
from .ndjson import (
    read_target,
    read_units,
    write_segments,
    write_units,
)
from .pipeline import (
    align_utterance,
    attention_runs,
    build_dataset,
    evaluate_runs,
    load_symbols,
    run_pipeline,
    syllabify_target,
    train_run,
)
from .syllables import PhonemeInventory
from .training import TrainConfig
from .vad import FrameProbSeries, SegmenterConfig, merge_short, split_long, threshold_segments

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_DATA = 2
EXIT_USAGE = 64

SEED_ENV = "GRANALIGN_SEED"


@dataclass
class RunManifest:
    version: str
    subcommand: str
    flags: dict
    input_digests: dict
    seeds: list
    started_utc: str
    finished_utc: str
    artifacts: list = field(default_factory=list)

    def write(self, path):
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(asdict(self), fh, indent=2, sort_keys=True)
            fh.write("\n")


class _Parser(argparse.ArgumentParser):
    """argparse with usage failures mapped to exit code 64."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _digest_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def digest_path(path):
    """Content hash of a file, or of a directory's files by sorted
    relative path."""
    if os.path.isdir(path):
        h = hashlib.sha256()
        for root, _, files in sorted(os.walk(path)):
            for name in sorted(files):
                full = os.path.join(root, name)
                rel = os.path.relpath(full, path)
                h.update(rel.encode("utf-8"))
                h.update(b"\0")
                h.update(_digest_file(full).encode("ascii"))
                h.update(b"\n")
        return h.hexdigest()
    if not os.path.exists(path):
        raise DataError(f"input not found: {path}")
    return _digest_file(path)


def parse_seeds(text):
    """'3' -> [3]; '0..4' -> [0, 1, 2, 3, 4] (inclusive)."""
    try:
        if ".." in text:
            lo, hi = text.split("..", 1)
            lo, hi = int(lo), int(hi)
            if hi < lo:
                raise ValueError
            return list(range(lo, hi + 1))
        return [int(text)]
    except ValueError:
        raise ValidationError(f"seed must be an integer or lo..hi range, got {text!r}")


def _default_seed():
    return os.environ.get(SEED_ENV, "0")


def _parse_ratios(text):
    parts = text.split(",")
    if len(parts) != 3:
        raise ValidationError(f"--split needs three comma-separated ratios, got {text!r}")
    try:
        return tuple(float(p) for p in parts)
    except ValueError:
        raise ValidationError(f"--split ratios must be numbers, got {text!r}")


def _expand_patterns(patterns):
    files = []
    for pat in patterns:
        if os.path.exists(pat):
            files.append(pat)
        else:
            matches = sorted(globlib.glob(pat))
            if not matches:
                raise DataError(f"no files match {pat!r}")
            files.extend(matches)
    return files


def cmd_vad(args):
    mat = read_fmat(args.probs)
    probs = np.squeeze(mat)
    if probs.ndim != 1:
        raise DataError(f"{args.probs}: expected a T x 1 probability matrix, got {mat.shape}")
    series = FrameProbSeries(probs, frame_hop=args.hop, sample_rate=args.rate)
    cfg = SegmenterConfig(
        threshold=args.threshold, max_segment_s=args.max_seg, min_gap_s=args.min_gap
    )
    segments = threshold_segments(series, cfg)
    segments = split_long(segments, cfg.max_segment_s)
    segments = merge_short(segments, cfg.max_segment_s)
    write_segments(args.out, segments)
    print(f"{len(segments)} segments -> {args.out}")
    return {"artifacts": [args.out], "inputs": [args.probs], "seeds": []}


def cmd_align(args):
    symbols = load_symbols(args.symbols)
    if args.blank_index is not None:
        blank_index = args.blank_index
    elif BLANK_LABEL in symbols:
        blank_index = symbols.index(BLANK_LABEL)
    else:
        raise DataError(
            f"{args.symbols} lacks {BLANK_LABEL!r}; pass --blank-index explicitly"
        )
    target = read_target(args.target)
    phones, words, path_logprob = align_utterance(
        args.emissions, symbols, target, args.frame_dur, blank_index=blank_index
    )
    write_units(args.out, phones)
    artifacts = [args.out]
    if args.words_out:
        write_units(args.words_out, words)
        artifacts.append(args.words_out)
    print(f"aligned {len(phones)} phonemes (path logprob {path_logprob:.3f}) -> {args.out}")
    return {
        "artifacts": artifacts,
        "inputs": [args.emissions, args.symbols, args.target],
        "seeds": [],
    }


def cmd_syllabify(args):
    phones = read_units(args.phones)
    target = read_target(args.words)
    inventory = PhonemeInventory.from_tsv(args.inventory) if args.inventory else None
    sylls = syllabify_target(phones, target, inventory)
    write_units(args.out, sylls)
    print(f"{len(sylls)} syllables -> {args.out}")
    inputs = [args.phones, args.words] + ([args.inventory] if args.inventory else [])
    return {"artifacts": [args.out], "inputs": inputs, "seeds": []}


def _features_by_utt(patterns, granularity):
    by_utt = {}
    for path in _expand_patterns(patterns):
        base = os.path.basename(path)
        if not base.endswith(".fmat"):
            continue
        if f".{granularity}." not in base and base.count(".") > 1:
            continue
        utt = base.split(".")[0]
        if utt in by_utt:
            raise DataError(f"two feature files claim utterance {utt!r}")
        by_utt[utt] = path
    if not by_utt:
        raise DataError(f"no usable feature files for granularity {granularity!r}")
    return by_utt


def cmd_build(args):
    seeds = parse_seeds(args.seed)
    units_files = _expand_patterns(args.units)
    units_dirs = {os.path.dirname(os.path.abspath(p)) for p in units_files}
    if len(units_dirs) != 1:
        raise DataError("unit files must live in a single directory")
    features_by_utt = (
        _features_by_utt(args.features, args.granularity) if args.features else None
    )
    records_path, split_path, _ = build_dataset(
        args.corpus,
        units_dirs.pop(),
        args.granularity,
        args.out,
        conf_threshold=args.conf,
        ratios=_parse_ratios(args.split),
        seed=seeds[0],
        features_by_utt=features_by_utt,
    )
    print(f"dataset -> {records_path}, {split_path}")
    return {
        "artifacts": [records_path, split_path],
        "inputs": [args.corpus],
        "seeds": seeds,
    }


def _model_config_from(args, input_dim_placeholder=1024):
    return ClassifierConfig(
        input_dim=input_dim_placeholder,
        num_layers=args.layers,
        hidden=args.hidden,
        dropout=args.dropout,
        heads=args.heads,
    )


def _train_config_from(args):
    return TrainConfig(lr=args.lr, batch_size=args.batch_size, max_epochs=args.epochs)


def cmd_train(args):
    seeds = parse_seeds(args.seed)
    if args.granularity is not None:
        with open(os.path.join(args.data, "split.json"), "r", encoding="utf-8") as fh:
            built_granularity = json.load(fh).get("granularity")
        if built_granularity != args.granularity:
            raise DataError(
                f"dataset was built at granularity {built_granularity!r}, "
                f"not {args.granularity!r}"
            )
    model_config = _model_config_from(args)
    train_config = _train_config_from(args)
    artifacts = []
    for seed in seeds:
        result, run_artifacts = train_run(
            args.data,
            seed,
            os.path.join(args.out, f"seed{seed}"),
            model_config=model_config,
            train_config=train_config,
        )
        artifacts.extend(run_artifacts)
        last = result.history[-1]
        print(
            f"seed {seed}: best epoch {result.best_epoch}, "
            f"stopped after {result.stopped_epoch}, val F1 {last.val_f1:.4f}"
        )
    return {"artifacts": artifacts, "inputs": [args.data], "seeds": seeds}


def cmd_eval(args):
    _, summary, artifacts = evaluate_runs(args.runs, args.out, split_name=args.split_name)
    with open(artifacts[1], "r", encoding="utf-8") as fh:
        print(fh.read(), end="")
    return {"artifacts": artifacts, "inputs": [args.runs], "seeds": []}


def cmd_attention(args):
    lines, artifacts = attention_runs(
        args.runs, args.out, top=args.top, split_name=args.split_name
    )
    print(f"{len(lines)} attention entries -> {args.out}")
    return {"artifacts": artifacts, "inputs": [args.runs], "seeds": []}


def cmd_pipeline(args):
    seeds = parse_seeds(args.seed)
    run_seeds = seeds if len(seeds) > 1 else list(range(seeds[0], seeds[0] + args.seeds))
    model_config = _model_config_from(args)
    train_config = _train_config_from(args)
    result = run_pipeline(
        args.in_dir,
        args.out,
        granularity=args.granularity,
        seed=run_seeds[0],
        n_seeds=len(run_seeds),
        conf_threshold=args.conf,
        ratios=_parse_ratios(args.split),
        model_config=model_config,
        train_config=train_config,
    )
    recovery = result["recovery"]
    if recovery["units_checked"]:
        print(
            f"boundary recovery: {recovery['within_one_frame']}/"
            f"{recovery['units_checked']} units within one frame "
            f"({recovery['fraction']:.1%})"
        )
    report_txt = os.path.join(result["report_dir"], "report.txt")
    with open(report_txt, "r", encoding="utf-8") as fh:
        print(fh.read(), end="")
    return {
        "artifacts": result["artifacts"],
        "inputs": [args.in_dir],
        "seeds": run_seeds,
    }


def _add_model_flags(p, layers, hidden, heads, dropout):
    p.add_argument("--layers", type=int, default=layers, help="LSTM layers")
    p.add_argument("--hidden", type=int, default=hidden, help="hidden units per direction")
    p.add_argument("--heads", type=int, default=heads, help="attention heads")
    p.add_argument("--dropout", type=float, default=dropout, help="inter-layer dropout")


def _add_train_flags(p, lr, batch_size, epochs):
    p.add_argument("--lr", type=float, default=lr, help="learning rate")
    p.add_argument("--batch-size", type=int, default=batch_size, help="batch size")
    p.add_argument("--epochs", type=int, default=epochs, help="maximum epochs")


def build_parser():
    parser = _Parser(
        prog="granalign",
        description="Time-aligned speech units, dataset building, training and evaluation.",
    )
    parser.add_argument("--version", action="version", version=f"granalign {__version__}")
    sub = parser.add_subparsers(dest="subcommand", metavar="SUBCOMMAND", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("vad", help="threshold frame probabilities into segments")
    p.add_argument("--probs", required=True, help="T x 1 FMAT of speech probabilities")
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--max-seg", type=float, default=30.0, help="maximum segment seconds")
    p.add_argument("--min-gap", type=float, default=0.1, help="fuse gaps shorter than this")
    p.add_argument("--hop", type=int, default=512, help="samples per frame")
    p.add_argument("--rate", type=int, default=16000, help="sample rate")
    p.add_argument("--out", required=True, help="segments NDJSON")
    p.set_defaults(handler=cmd_vad)

    p = sub.add_parser("align", help="forced-align a target against emissions")
    p.add_argument("--emissions", required=True, help="T x V FMAT of log-probabilities")
    p.add_argument("--symbols", required=True, help="symbol table, one per line")
    p.add_argument("--target", required=True, help="target NDJSON (word, phonemes)")
    p.add_argument("--frame-dur", type=float, default=0.02, help="seconds per frame")
    p.add_argument("--blank-index", type=int, default=None)
    p.add_argument("--out", required=True, help="phoneme units NDJSON")
    p.add_argument("--words-out", default=None, help="also write word units here")
    p.set_defaults(handler=cmd_align)

    p = sub.add_parser("syllabify", help="group aligned phonemes into syllables")
    p.add_argument("--phones", required=True, help="phoneme units NDJSON")
    p.add_argument("--words", required=True, help="target NDJSON giving word boundaries")
    p.add_argument("--inventory", default=None, help="symbol<TAB>class file; built-in if omitted")
    p.add_argument("--out", required=True, help="syllable units NDJSON")
    p.set_defaults(handler=cmd_syllabify)

    p = sub.add_parser("build", help="build a speaker-disjoint dataset from units")
    p.add_argument("--corpus", required=True, help="corpus directory with corpus.ndjson")
    p.add_argument("--units", nargs="+", required=True, help="unit NDJSON files or globs")
    p.add_argument("--features", nargs="*", default=None, help="feature FMAT files or globs")
    p.add_argument("--granularity", choices=("phoneme", "syllable", "word"), default="phoneme")
    p.add_argument("--conf", type=float, default=0.6, help="confidence threshold")
    p.add_argument("--split", default="0.6,0.2,0.2", help="train,val,test ratios")
    p.add_argument("--seed", default=None)
    p.add_argument("--out", required=True, help="dataset directory")
    p.set_defaults(handler=cmd_build)

    p = sub.add_parser("train", help="train the sequence classifier")
    p.add_argument("--data", required=True, help="dataset directory from `build`")
    p.add_argument("--granularity", choices=("phoneme", "syllable", "word"), default=None,
                   help="must match the dataset if given")
    p.add_argument("--seed", default=None, help="single seed or lo..hi range")
    p.add_argument("--out", required=True, help="runs directory")
    _add_model_flags(p, layers=6, hidden=512, heads=8, dropout=0.3)
    _add_train_flags(p, lr=1e-5, batch_size=32, epochs=15)
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("eval", help="subject-level metrics over trained runs")
    p.add_argument("--runs", required=True, help="directory of seed*/ runs")
    p.add_argument("--out", required=True, help="report directory")
    p.add_argument("--split-name", choices=("train", "val", "test"), default="test")
    p.set_defaults(handler=cmd_eval)

    p = sub.add_parser("attention", help="attention-mass ranking of unit labels")
    p.add_argument("--runs", required=True, help="directory of seed*/ runs")
    p.add_argument("--top", type=int, default=20)
    p.add_argument("--out", required=True, help="attention NDJSON")
    p.add_argument("--split-name", choices=("train", "val", "test"), default="test")
    p.set_defaults(handler=cmd_attention)

    p = sub.add_parser("pipeline", help="chain all stages over a corpus directory")
    p.add_argument("--in", dest="in_dir", required=True, help="corpus directory")
    p.add_argument("--granularity", choices=("phoneme", "syllable", "word"), default="phoneme")
    p.add_argument("--seed", default=None)
    p.add_argument("--seeds", type=int, default=3, help="number of training seeds")
    p.add_argument("--conf", type=float, default=0.6)
    p.add_argument("--split", default="0.6,0.2,0.2")
    p.add_argument("--out", default="granalign_run", help="output directory")
    _add_model_flags(p, layers=1, hidden=16, heads=2, dropout=0.3)
    _add_train_flags(p, lr=1e-3, batch_size=16, epochs=12)
    p.set_defaults(handler=cmd_pipeline)

    return parser


def _manifest_path(args):
    out = getattr(args, "out", None)
    if out is None:
        return "granalign_manifest.json"
    if os.path.isdir(out) or not os.path.splitext(out)[1]:
        return os.path.join(out, "manifest.json")
    return out + ".manifest.json"


def run(argv):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    if getattr(args, "seed", None) is None and hasattr(args, "seed"):
        args.seed = _default_seed()

    started = datetime.now(timezone.utc).isoformat()
    try:
        outcome = args.handler(args)
    except ValidationError as exc:
        print(f"granalign {args.subcommand}: validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except DataError as exc:
        print(f"granalign {args.subcommand}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"granalign {args.subcommand}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except GranalignError as exc:
        print(f"granalign {args.subcommand}: error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    finished = datetime.now(timezone.utc).isoformat()

    flags = {
        k: v for k, v in vars(args).items() if k not in ("handler", "subcommand")
    }
    manifest = RunManifest(
        version=__version__,
        subcommand=args.subcommand,
        flags=flags,
        input_digests={p: digest_path(p) for p in outcome.get("inputs", [])},
        seeds=outcome.get("seeds", []),
        started_utc=started,
        finished_utc=finished,
        artifacts=outcome.get("artifacts", []),
    )
    manifest.write(_manifest_path(args))
    return EXIT_OK


def main():
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
