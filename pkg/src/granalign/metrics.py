"""Subject-level aggregation, classification metrics and attention reports.

Segment predictions are averaged per speaker before any metric is
computed; the decision rule is PD iff the mean probability is >= 0.5.
AUROC uses the tie-corrected rank statistic (tied pairs count one half)
and AUPRC is step-wise average precision over distinct thresholds, not
trapezoidal interpolation. Multi-seed summaries report mean and sample
(n-1) standard deviation per metric.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DataError, ValidationError

PD, HC = "PD", "HC"


@dataclass(frozen=True)
class SubjectPrediction:
    speaker_id: str
    mean_pd_prob: float
    predicted: str  # PD iff mean_pd_prob >= 0.5
    true_label: str


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    f1: float
    auroc: float  # None when only one class is present
    auprc: float  # None when only one class is present
    n_subjects: int


@dataclass(frozen=True)
class SeedSummary:
    n_seeds: int
    stats: dict  # metric name -> (mean, sample std)

    def formatted(self, metric):
        mean, std = self.stats[metric]
        if mean is None:
            return "n/a"
        return f"{mean:.4f} ± {std:.4f}"


@dataclass(frozen=True)
class AttentionEntry:
    label: str
    top1_count: int  # sequences whose max-attention step bears this label
    total_mass: float  # summed head-averaged weight over all steps
    mean_weight: float  # total_mass / number of steps bearing the label


@dataclass(frozen=True)
class AttentionReport:
    granularity: str
    entries: tuple  # of AttentionEntry, sorted by total_mass desc, <= 20
    n_sequences: int


def aggregate_subjects(segment_predictions):
    """Mean PD probability per speaker; decision PD iff mean >= 0.5.

    Input: iterable of (speaker_id, pd_prob, true_label).
    """
    probs = {}
    labels = {}
    for speaker_id, pd_prob, true_label in segment_predictions:
        if not 0.0 <= pd_prob <= 1.0:
            raise ValidationError(f"pd_prob {pd_prob} outside [0, 1]")
        if true_label not in (PD, HC):
            raise ValidationError(f"unknown label {true_label!r}")
        if speaker_id in labels and labels[speaker_id] != true_label:
            raise DataError(f"conflicting labels for speaker {speaker_id!r}")
        labels[speaker_id] = true_label
        probs.setdefault(speaker_id, []).append(pd_prob)
    out = []
    for speaker_id in sorted(probs):
        mean = float(np.mean(probs[speaker_id]))
        out.append(
            SubjectPrediction(
                speaker_id=speaker_id,
                mean_pd_prob=mean,
                predicted=PD if mean >= 0.5 else HC,
                true_label=labels[speaker_id],
            )
        )
    return out


def _tie_averaged_ranks(scores):
    order = np.argsort(scores, kind="mergesort")
    svals = scores[order]
    ranks = np.empty(len(scores))
    i = 0
    while i < len(svals):
        j = i
        while j + 1 < len(svals) and svals[j + 1] == svals[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j + 2) / 2.0  # 1-based, ties share the mean rank
        i = j + 1
    return ranks


def auroc_score(scores, y_true):
    """Probability a random positive outscores a random negative, ties
    counting one half (rank-statistic form)."""
    scores = np.asarray(scores, dtype=float)
    y_true = np.asarray(y_true, dtype=int)
    n_pos = int(y_true.sum())
    n_neg = len(y_true) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DataError("AUROC needs at least one subject of each class")
    ranks = _tie_averaged_ranks(scores)
    return float((ranks[y_true == 1].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def auprc_score(scores, y_true):
    """Step-wise average precision: sum over recall increments of the
    precision at each distinct threshold, descending."""
    scores = np.asarray(scores, dtype=float)
    y_true = np.asarray(y_true, dtype=int)
    n_pos = int(y_true.sum())
    if n_pos == 0 or n_pos == len(y_true):
        raise DataError("AUPRC needs at least one subject of each class")
    order = np.argsort(-scores, kind="mergesort")
    s = scores[order]
    y = y_true[order]
    ap = 0.0
    tp = fp = 0
    prev_recall = 0.0
    i = 0
    while i < len(s):
        j = i
        while j + 1 < len(s) and s[j + 1] == s[i]:
            j += 1
        tp += int(y[i : j + 1].sum())
        fp += (j - i + 1) - int(y[i : j + 1].sum())
        recall = tp / n_pos
        precision = tp / (tp + fp)
        ap += (recall - prev_recall) * precision
        prev_recall = recall
        i = j + 1
    return float(ap)


def compute_metrics(subjects):
    """Accuracy, F1 (PD positive), AUROC and AUPRC over subjects.

    With a single-class subject set the ranking metrics are undefined:
    they come back as None with a warning, accuracy and F1 still hold.
    """
    if not subjects:
        raise ValidationError("compute_metrics needs at least one subject")
    y_true = np.array([1 if s.true_label == PD else 0 for s in subjects])
    y_pred = np.array([1 if s.predicted == PD else 0 for s in subjects])
    scores = np.array([s.mean_pd_prob for s in subjects])

    accuracy = float((y_true == y_pred).mean())
    tp = int(((y_pred == 1) & (y_true == 1)).sum())
    fp = int(((y_pred == 1) & (y_true == 0)).sum())
    fn = int(((y_pred == 0) & (y_true == 1)).sum())
    f1 = 2.0 * tp / (2 * tp + fp + fn) if (2 * tp + fp + fn) > 0 else 0.0

    if 0 < y_true.sum() < len(y_true):
        auroc = auroc_score(scores, y_true)
        auprc = auprc_score(scores, y_true)
    else:
        warnings.warn(
            "single-class subject set: AUROC/AUPRC undefined", stacklevel=2
        )
        auroc = None
        auprc = None
    return MetricsReport(
        accuracy=accuracy, f1=f1, auroc=auroc, auprc=auprc, n_subjects=len(subjects)
    )


METRIC_NAMES = ("accuracy", "f1", "auroc", "auprc")


def seed_summary(reports):
    """Per-metric mean and sample standard deviation across seed runs."""
    if len(reports) < 2:
        raise ValidationError(f"seed_summary needs >= 2 reports, got {len(reports)}")
    stats = {}
    for name in METRIC_NAMES:
        values = [getattr(r, name) for r in reports]
        if any(v is None for v in values):
            stats[name] = (None, None)
        else:
            arr = np.array(values, dtype=float)
            stats[name] = (float(arr.mean()), float(arr.std(ddof=1)))
    return SeedSummary(n_seeds=len(reports), stats=stats)


def summary_table(title, rows):
    """Plain-text metrics table; rows are (label, SeedSummary)."""
    header = ["run"] + [n.upper() for n in METRIC_NAMES]
    body = [[label] + [summ.formatted(n) for n in METRIC_NAMES] for label, summ in rows]
    widths = [max(len(r[c]) for r in [header] + body) for c in range(len(header))]
    lines = [title, ""]
    lines.append("  ".join(h.ljust(w) for h, w in zip(header, widths)))
    lines.append("  ".join("-" * w for w in widths))
    for row in body:
        lines.append("  ".join(v.ljust(w) for v, w in zip(row, widths)))
    return "\n".join(lines) + "\n"


def attention_report(attention, unit_labels, granularity, top=20):
    """Rank unit labels by the attention mass they collect.

    ``attention`` is either a padded B x heads x Lmax array or a list of
    (heads, L_i) arrays; ``unit_labels`` gives the label of each valid
    step per sequence. Weights are averaged over heads, so each sequence
    contributes total mass 1. Per label: total_mass sums the weights,
    top1_count counts sequences whose strongest step bears the label,
    mean_weight divides mass by the label's step count. Sorted by
    total_mass, truncated to ``top``.
    """
    if len(attention) != len(unit_labels):
        raise ValidationError("attention and unit_labels lengths differ")
    mass = {}
    occurrences = {}
    top1 = {}
    n_seq = 0
    for attn, labels in zip(attention, unit_labels):
        attn = np.asarray(attn, dtype=float)
        if attn.ndim != 2:
            raise ValidationError("per-sequence attention must be heads x L")
        if attn.shape[1] < len(labels):
            raise ValidationError(
                f"attention covers {attn.shape[1]} steps but {len(labels)} labels given"
            )
        if not labels:
            continue
        weights = attn.mean(axis=0)
        if np.abs(weights[: len(labels)].sum() - 1.0) > 1e-6:
            raise ValidationError("valid-step attention must sum to 1 per sequence")
        weights = weights[: len(labels)]
        n_seq += 1
        for label, w in zip(labels, weights):
            mass[label] = mass.get(label, 0.0) + float(w)
            occurrences[label] = occurrences.get(label, 0) + 1
        best = labels[int(np.argmax(weights))]
        top1[best] = top1.get(best, 0) + 1
    entries = [
        AttentionEntry(
            label=label,
            top1_count=top1.get(label, 0),
            total_mass=mass[label],
            mean_weight=mass[label] / occurrences[label],
        )
        for label in mass
    ]
    entries.sort(key=lambda e: (-e.total_mass, e.label))
    return AttentionReport(
        granularity=granularity, entries=tuple(entries[:top]), n_sequences=n_seq
    )
