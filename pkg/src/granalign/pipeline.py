"""Stage orchestration: align, syllabify, build, train, eval, attention.

Each function here is the library form of one CLI stage; run_pipeline
chains them over a corpus directory. A corpus is described by
corpus.ndjson (one line per utterance: ids, label, language, duration,
frame duration, file references) plus symbols.txt and the referenced
emission/target/feature files, as produced by granalign.synthetic or
by the exporter companion package.
"""

import glob
import json
import os
from dataclasses import asdict

import numpy as np

from . import ndjson
from .ctc import EmissionMatrix, group_words, viterbi_align
from .dataset import (
    FeatureRef,
    FeatureStore,
    UtteranceRecord,
    filter_units,
    select_granularity,
    stratified_speaker_split,
)
from .errors import DataError
from .fmat import read_fmat
from .metrics import (
    aggregate_subjects,
    attention_report,
    compute_metrics,
    seed_summary,
    summary_table,
)
from .model import ClassifierConfig
from .syllables import PhonemeInventory, ssp_syllabify, align_syllables
from .training import TrainConfig, fit, load_checkpoint, predict, save_checkpoint


def load_symbols(path):
    with open(path, "r", encoding="utf-8") as fh:
        symbols = [line.strip() for line in fh if line.strip()]
    if not symbols:
        raise DataError(f"{path}: empty symbol table")
    return symbols


def align_utterance(emissions_path, symbols, target, frame_dur_s, blank_index=0):
    """Align one utterance; returns (phoneme units, word units, logprob)."""
    logprobs = read_fmat(emissions_path).astype(np.float64)
    em = EmissionMatrix(
        logprobs=logprobs,
        frame_dur_s=frame_dur_s,
        symbols=tuple(symbols),
        blank_index=blank_index,
    )
    phones, path_logprob = viterbi_align(em, target)
    words = group_words(phones, target)
    return phones, words, path_logprob


def syllabify_target(phones, target, inventory=None):
    """Syllable units from aligned phonemes, word by word."""
    inventory = inventory or PhonemeInventory()
    if len(phones) != len(target.phonemes):
        raise DataError(
            f"aligned {len(phones)} phonemes but target has {len(target.phonemes)}"
        )
    for unit, ph in zip(phones, target.phonemes):
        if unit.label != ph:
            raise DataError(
                f"aligned phoneme {unit.label!r} does not match target {ph!r}"
            )
    out = []
    for a, b in target.word_spans:
        word = list(target.phonemes[a:b])
        sylls = ssp_syllabify(word, inventory)
        out.extend(align_syllables(sylls, phones[a:b]))
    return out


def _truth_recovery(truth_path, phones, frame_dur_s):
    """Fraction of units whose planted frame span is recovered within
    one frame on both ends."""
    truth = ndjson.load_lines(truth_path)
    if len(truth) != len(phones):
        raise DataError(
            f"{truth_path}: {len(truth)} planted units vs {len(phones)} aligned"
        )
    hits = 0
    for obj, unit in zip(truth, phones):
        start = int(round(unit.start_s / frame_dur_s))
        end = int(round(unit.end_s / frame_dur_s))
        if abs(start - obj["start_frame"]) <= 1 and abs(end - obj["end_frame"]) <= 1:
            hits += 1
    return hits, len(phones)


def align_corpus(corpus_root, out_dir, inventory=None):
    """Stage 1+2: align every utterance, then syllabify.

    Writes <utt>.phones/.sylls/.words.ndjson under out_dir; returns
    (artifact paths, boundary-recovery stats over utterances with truth
    files).
    """
    manifest = _load_corpus_manifest(corpus_root)
    symbols = load_symbols(os.path.join(corpus_root, "symbols.txt"))
    os.makedirs(out_dir, exist_ok=True)
    artifacts = []
    hits = total = 0
    for row in manifest:
        utt = row["utterance_id"]
        target = ndjson.read_target(os.path.join(corpus_root, row["target"]))
        phones, words, _ = align_utterance(
            os.path.join(corpus_root, row["emissions"]),
            symbols,
            target,
            float(row["frame_dur_s"]),
        )
        sylls = syllabify_target(phones, target, inventory)
        for kind, units in (("phones", phones), ("sylls", sylls), ("words", words)):
            path = os.path.join(out_dir, f"{utt}.{kind}.ndjson")
            ndjson.write_units(path, units)
            artifacts.append(path)
        if row.get("truth"):
            h, n = _truth_recovery(
                os.path.join(corpus_root, row["truth"]), phones, float(row["frame_dur_s"])
            )
            hits += h
            total += n
    recovery = {"units_checked": total, "within_one_frame": hits}
    if total:
        recovery["fraction"] = hits / total
    return artifacts, recovery


def _load_corpus_manifest(corpus_root):
    path = os.path.join(corpus_root, "corpus.ndjson")
    if not os.path.exists(path):
        raise DataError(f"no corpus manifest at {path}")
    manifest = ndjson.load_lines(path)
    if not manifest:
        raise DataError(f"{path}: empty corpus manifest")
    return manifest


def build_dataset(
    corpus_root,
    units_dir,
    granularity,
    out_dir,
    conf_threshold=0.6,
    ratios=(0.6, 0.2, 0.2),
    seed=0,
    features_by_utt=None,
):
    """Stage 3: confidence-filtered records of one granularity, split
    speaker-independently, written as records.ndjson + split.json.

    Feature rows pair with units by position. Feature files come from
    the corpus manifest unless ``features_by_utt`` maps utterance ids
    to paths directly.
    """
    ndjson.validate_granularity(granularity)
    manifest = _load_corpus_manifest(corpus_root)
    os.makedirs(out_dir, exist_ok=True)
    kind = {"phoneme": "phones", "syllable": "sylls", "word": "words"}[granularity]

    records = []
    for row in manifest:
        utt = row["utterance_id"]
        units_path = os.path.join(units_dir, f"{utt}.{kind}.ndjson")
        if not os.path.exists(units_path):
            raise DataError(f"no {granularity} units for {utt!r} at {units_path}")
        units = ndjson.read_units(units_path)
        if features_by_utt is not None:
            feature_path = features_by_utt.get(utt)
            if feature_path is None:
                raise DataError(f"no feature file given for utterance {utt!r}")
        else:
            feature_file = row.get("features", {}).get(granularity)
            if feature_file is None:
                raise DataError(f"{utt!r}: corpus manifest lacks {granularity} features")
            feature_path = os.path.join(corpus_root, feature_file)
        rel = os.path.relpath(feature_path, out_dir)
        paired = tuple((u, FeatureRef(rel, i)) for i, u in enumerate(units))
        records.append(
            UtteranceRecord(
                utterance_id=utt,
                speaker_id=row["speaker_id"],
                language=row["language"],
                label=row["label"],
                duration_s=float(row["duration_s"]),
                units=paired,
            )
        )

    records, dropped = filter_units(records, conf_threshold)
    records, flagged = select_granularity(records, granularity)
    records = [r for r in records if r.units]
    if not records:
        raise DataError("no records left after confidence filtering")
    split = stratified_speaker_split(records, ratios=ratios, seed=seed)

    records_path = os.path.join(out_dir, "records.ndjson")
    ndjson.write_records(records_path, records)
    split_path = os.path.join(out_dir, "split.json")
    with open(split_path, "w", encoding="utf-8") as fh:
        json.dump(
            {
                "by_speaker": dict(sorted(split.by_speaker.items())),
                "granularity": granularity,
                "conf_threshold": conf_threshold,
                "ratios": list(ratios),
                "seed": seed,
                "dropped_utterances": sorted(dropped),
                "empty_after_granularity": sorted(flagged),
            },
            fh,
            indent=2,
            sort_keys=True,
        )
        fh.write("\n")
    return records_path, split_path, split


def load_dataset(data_dir):
    """Records, store and split as written by build_dataset."""
    records = ndjson.read_records(os.path.join(data_dir, "records.ndjson"))
    split_path = os.path.join(data_dir, "split.json")
    if not os.path.exists(split_path):
        raise DataError(f"no split description at {split_path}")
    with open(split_path, "r", encoding="utf-8") as fh:
        split_obj = json.load(fh)
    store = FeatureStore(root=data_dir)
    return records, store, split_obj


def train_run(data_dir, seed, out_dir, model_config=None, train_config=None):
    """Stage 4, one seed: fit on train/val, store checkpoint + history."""
    records, store, split_obj = load_dataset(data_dir)
    by_speaker = split_obj["by_speaker"]
    train_records = [r for r in records if by_speaker.get(r.speaker_id) == "train"]
    val_records = [r for r in records if by_speaker.get(r.speaker_id) == "val"]
    if not train_records or not val_records:
        raise DataError("dataset split leaves train or val empty")

    input_dim = store.get(train_records[0].units[0][1]).shape[0]
    model_config = model_config or ClassifierConfig()
    if model_config.input_dim != input_dim:
        model_config = ClassifierConfig(
            input_dim=input_dim,
            num_layers=model_config.num_layers,
            hidden=model_config.hidden,
            dropout=model_config.dropout,
            heads=model_config.heads,
            classes=model_config.classes,
        )
    train_config = train_config or TrainConfig()

    result = fit(train_records, val_records, store, model_config, train_config, seed=seed)

    os.makedirs(out_dir, exist_ok=True)
    ckpt_dir = os.path.join(out_dir, "checkpoint")
    save_checkpoint(ckpt_dir, result.params, model_config, step=result.best_epoch)
    history_path = os.path.join(out_dir, "history.ndjson")
    ndjson.dump_lines(history_path, (asdict(h) for h in result.history))
    run_path = os.path.join(out_dir, "run.json")
    with open(run_path, "w", encoding="utf-8") as fh:
        json.dump(
            {
                "data": os.path.relpath(os.path.abspath(data_dir), os.path.abspath(out_dir)),
                "granularity": split_obj.get("granularity"),
                "seed": seed,
                "best_epoch": result.best_epoch,
                "stopped_epoch": result.stopped_epoch,
                "train_config": asdict(train_config),
                "model_config": asdict(model_config),
            },
            fh,
            indent=2,
            sort_keys=True,
        )
        fh.write("\n")
    return result, [ckpt_dir, history_path, run_path]


def _discover_runs(runs_dir):
    run_files = sorted(glob.glob(os.path.join(runs_dir, "*", "run.json")))
    if not run_files:
        raise DataError(f"no run.json under {runs_dir}/*/")
    runs = []
    for path in run_files:
        with open(path, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
        run_dir = os.path.dirname(path)
        obj["_dir"] = run_dir
        obj["_data"] = os.path.normpath(os.path.join(run_dir, obj["data"]))
        runs.append(obj)
    return runs


def _predict_split(run, split_name, return_attention=False):
    records, store, split_obj = load_dataset(run["_data"])
    by_speaker = split_obj["by_speaker"]
    subset = [r for r in records if by_speaker.get(r.speaker_id) == split_name]
    if not subset:
        raise DataError(f"split {split_name!r} is empty for run {run['_dir']}")
    params, config = load_checkpoint(os.path.join(run["_dir"], "checkpoint"))
    batch_size = run.get("train_config", {}).get("batch_size", 32)
    return predict(
        subset, store, params, config,
        batch_size=batch_size, return_attention=return_attention,
    )


def evaluate_runs(runs_dir, out_dir, split_name="test"):
    """Stage 5: subject-level metrics per run plus a seed summary."""
    runs = _discover_runs(runs_dir)
    os.makedirs(out_dir, exist_ok=True)
    lines = []
    reports = []
    for run in runs:
        rows = _predict_split(run, split_name)
        subjects = aggregate_subjects(
            (r["speaker_id"], r["pd_prob"], r["label"]) for r in rows
        )
        report = compute_metrics(subjects)
        reports.append(report)
        lines.append(
            {
                "kind": "run",
                "run": os.path.basename(run["_dir"]),
                "seed": run["seed"],
                "split": split_name,
                "n_subjects": report.n_subjects,
                "accuracy": report.accuracy,
                "f1": report.f1,
                "auroc": report.auroc,
                "auprc": report.auprc,
            }
        )
    summary = None
    if len(reports) >= 2:
        summary = seed_summary(reports)
        lines.append(
            {
                "kind": "summary",
                "n_seeds": summary.n_seeds,
                "split": split_name,
                "stats": {
                    name: {"mean": mean, "std": std}
                    for name, (mean, std) in summary.stats.items()
                },
            }
        )
    metrics_path = os.path.join(out_dir, "metrics.ndjson")
    ndjson.dump_lines(metrics_path, lines)

    table_path = os.path.join(out_dir, "report.txt")
    with open(table_path, "w", encoding="utf-8") as fh:
        if summary is not None:
            title = (
                f"Subject-level metrics over {summary.n_seeds} seeds "
                f"(mean ± standard deviation, {split_name} split)"
            )
            fh.write(summary_table(title, [("all seeds", summary)]))
        else:
            fh.write(f"Subject-level metrics ({split_name} split, single run)\n\n")
        for line in lines:
            if line["kind"] == "run":
                fh.write(
                    f"\nseed {line['seed']}: "
                    + ", ".join(
                        f"{k}={line[k]:.4f}" if line[k] is not None else f"{k}=n/a"
                        for k in ("accuracy", "f1", "auroc", "auprc")
                    )
                )
        fh.write("\n")
    return reports, summary, [metrics_path, table_path]


def attention_runs(runs_dir, out_path, top=20, split_name="test"):
    """Stage 6: attention-mass rankings per run."""
    runs = _discover_runs(runs_dir)
    lines = []
    for run in runs:
        rows = _predict_split(run, split_name, return_attention=True)
        report = attention_report(
            [r["attention"] for r in rows],
            [r["unit_labels"] for r in rows],
            granularity=run.get("granularity") or "phoneme",
            top=top,
        )
        for rank, entry in enumerate(report.entries, start=1):
            lines.append(
                {
                    "granularity": report.granularity,
                    "label": entry.label,
                    "mean_weight": entry.mean_weight,
                    "n_sequences": report.n_sequences,
                    "rank": rank,
                    "run": os.path.basename(run["_dir"]),
                    "seed": run["seed"],
                    "top1_count": entry.top1_count,
                    "total_mass": entry.total_mass,
                }
            )
    os.makedirs(os.path.dirname(os.path.abspath(out_path)), exist_ok=True)
    ndjson.dump_lines(out_path, lines)
    return lines, [out_path]


def run_pipeline(
    corpus_root,
    out_dir,
    granularity="phoneme",
    seed=0,
    n_seeds=3,
    conf_threshold=0.6,
    ratios=(0.6, 0.2, 0.2),
    model_config=None,
    train_config=None,
    inventory=None,
):
    """All stages on one corpus directory; desk-scale defaults.

    The model defaults here are intentionally small so the chained run
    finishes in minutes; `granalign train` keeps the full-size
    defaults. Returns a dict of stage outputs and artifact paths.
    """
    model_config = model_config or ClassifierConfig(
        input_dim=16, num_layers=1, hidden=16, dropout=0.3, heads=2
    )
    train_config = train_config or TrainConfig(lr=1e-3, batch_size=16, max_epochs=12)

    artifacts = []
    units_dir = os.path.join(out_dir, "units")
    unit_files, recovery = align_corpus(corpus_root, units_dir, inventory)
    artifacts.extend(unit_files)

    data_dir = os.path.join(out_dir, "dataset")
    records_path, split_path, _ = build_dataset(
        corpus_root,
        units_dir,
        granularity,
        data_dir,
        conf_threshold=conf_threshold,
        ratios=ratios,
        seed=seed,
    )
    artifacts.extend([records_path, split_path])

    runs_dir = os.path.join(out_dir, "runs")
    for k in range(n_seeds):
        _, run_artifacts = train_run(
            data_dir,
            seed + k,
            os.path.join(runs_dir, f"seed{seed + k}"),
            model_config=model_config,
            train_config=train_config,
        )
        artifacts.extend(run_artifacts)

    report_dir = os.path.join(out_dir, "report")
    reports, summary, eval_artifacts = evaluate_runs(runs_dir, report_dir)
    artifacts.extend(eval_artifacts)

    attn_path = os.path.join(report_dir, "attention.ndjson")
    _, attn_artifacts = attention_runs(runs_dir, attn_path)
    artifacts.extend(attn_artifacts)

    recovery_path = os.path.join(out_dir, "alignment_check.json")
    with open(recovery_path, "w", encoding="utf-8") as fh:
        json.dump(recovery, fh, indent=2, sort_keys=True)
        fh.write("\n")
    artifacts.append(recovery_path)

    return {
        "recovery": recovery,
        "reports": reports,
        "summary": summary,
        "artifacts": artifacts,
        "runs_dir": runs_dir,
        "report_dir": report_dir,
    }
