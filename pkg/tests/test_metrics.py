"""Subject aggregation, classification metrics, seed summaries, attention."""

import numpy as np
import pytest

from granalign import (
    AttentionReport,
    DataError,
    MetricsReport,
    SubjectPrediction,
    ValidationError,
    aggregate_subjects,
    attention_report,
    auprc_score,
    auroc_score,
    compute_metrics,
    seed_summary,
    summary_table,
)
from oracles import auroc_pairs, average_precision_naive


def subjects_from(scores, labels):
    return [
        SubjectPrediction(
            speaker_id=f"s{i}",
            mean_pd_prob=float(p),
            predicted="PD" if p >= 0.5 else "HC",
            true_label="PD" if y else "HC",
        )
        for i, (p, y) in enumerate(zip(scores, labels))
    ]


def test_aggregate_mean_boundary_is_pd():
    subs = aggregate_subjects([("A", 0.6, "PD"), ("A", 0.8, "PD"), ("A", 0.1, "PD")])
    assert len(subs) == 1
    assert subs[0].mean_pd_prob == pytest.approx(0.5)
    assert subs[0].predicted == "PD"  # ties break toward PD


def test_aggregate_single_segment_hc():
    subs = aggregate_subjects([("A", 0.4, "HC")])
    assert subs[0].predicted == "HC"


def test_aggregate_two_speakers():
    subs = {s.speaker_id: s for s in aggregate_subjects(
        [("A", 1.0, "PD"), ("B", 0.0, "HC")]
    )}
    assert subs["A"].predicted == "PD"
    assert subs["B"].predicted == "HC"


def test_aggregate_order_invariant():
    rows = [("A", 0.2, "HC"), ("B", 0.9, "PD"), ("A", 0.7, "HC"), ("B", 0.5, "PD")]
    a = aggregate_subjects(rows)
    b = aggregate_subjects(list(reversed(rows)))
    assert {(s.speaker_id, s.mean_pd_prob) for s in a} == {
        (s.speaker_id, s.mean_pd_prob) for s in b
    }


def test_aggregate_conflicting_labels_rejected():
    with pytest.raises(DataError):
        aggregate_subjects([("A", 0.2, "HC"), ("A", 0.7, "PD")])


def test_perfect_separation_metrics():
    report = compute_metrics(subjects_from([0.9, 0.8, 0.3, 0.2], [1, 1, 0, 0]))
    assert report.accuracy == 1.0
    assert report.f1 == 1.0
    assert report.auroc == pytest.approx(1.0)
    assert report.auprc == pytest.approx(1.0)
    assert report.n_subjects == 4


def test_all_predicted_hc_gives_zero_f1():
    report = compute_metrics(subjects_from([0.4, 0.3, 0.2], [1, 0, 0]))
    assert report.f1 == 0.0
    assert report.accuracy == pytest.approx(2.0 / 3.0)


def test_worked_auroc_three_quarters():
    scores = [0.8, 0.6, 0.4, 0.2]
    labels = [1, 0, 1, 0]
    assert auroc_score(np.array(scores), np.array(labels)) == pytest.approx(0.75)
    report = compute_metrics(subjects_from(scores, labels))
    assert report.auroc == pytest.approx(0.75)


def test_ties_count_half():
    scores = np.array([0.5, 0.5])
    labels = np.array([1, 0])
    assert auroc_score(scores, labels) == pytest.approx(0.5)


def test_single_class_set_warns_and_returns_none():
    with pytest.warns(UserWarning):
        report = compute_metrics(subjects_from([0.9, 0.8], [1, 1]))
    assert report.auroc is None
    assert report.auprc is None
    assert report.accuracy == 1.0
    assert report.f1 == 1.0


def test_empty_subjects_rejected():
    with pytest.raises(ValidationError):
        compute_metrics([])


def test_auroc_auprc_match_brute_force(rng):
    for _ in range(300):
        n = int(rng.integers(2, 13))
        labels = np.zeros(n, dtype=int)
        labels[: int(rng.integers(1, n))] = 1
        rng.shuffle(labels)
        if labels.sum() in (0, n):
            labels[0] = 1 - labels[0]
        scores = np.round(rng.random(n), 2)  # rounding forces ties
        assert auroc_score(scores, labels) == pytest.approx(
            auroc_pairs(scores.tolist(), labels.tolist()), abs=1e-12
        )
        assert auprc_score(scores, labels) == pytest.approx(
            average_precision_naive(scores.tolist(), labels.tolist()), abs=1e-12
        )


def test_label_swap_mirrors_auroc(rng):
    for _ in range(50):
        n = int(rng.integers(3, 10))
        scores = rng.permutation(n).astype(float)  # tie-free
        labels = np.zeros(n, dtype=int)
        labels[: int(rng.integers(1, n))] = 1
        rng.shuffle(labels)
        if labels.sum() in (0, n):
            labels[0] = 1 - labels[0]
        a = auroc_score(scores, labels)
        b = auroc_score(scores, 1 - labels)
        assert a == pytest.approx(1.0 - b, abs=1e-12)


def report_with(auroc):
    return MetricsReport(accuracy=0.9, f1=0.9, auroc=auroc, auprc=0.9, n_subjects=10)


def test_seed_summary_worked_example():
    reports = [report_with(a) for a in (0.90, 0.92, 0.94, 0.91, 0.93)]
    summ = seed_summary(reports)
    mean, std = summ.stats["auroc"]
    assert mean == pytest.approx(0.92)
    assert std == pytest.approx(0.0158, abs=5e-5)
    assert summ.formatted("auroc") == "0.9200 ± 0.0158"


def test_seed_summary_identical_reports_zero_std():
    summ = seed_summary([report_with(0.9)] * 5)
    assert summ.stats["auroc"] == (pytest.approx(0.9), 0.0)


def test_seed_summary_requires_two_reports():
    with pytest.raises(ValidationError):
        seed_summary([report_with(0.9)])


def test_seed_summary_none_metrics_propagate():
    summ = seed_summary([report_with(None), report_with(0.9)])
    assert summ.stats["auroc"] == (None, None)
    assert summ.formatted("auroc") == "n/a"


def test_summary_table_layout():
    summ = seed_summary([report_with(0.90), report_with(0.94)])
    text = summary_table("test split", [("phoneme", summ)])
    lines = text.splitlines()
    assert lines[0] == "test split"
    assert "AUROC" in lines[2]
    assert "0.9200 ± " in text
    assert "phoneme" in text


def attn(weights):
    # one head carrying the given per-step weights
    return np.asarray(weights, dtype=float)[None, :]


def test_attention_single_unit_mass_one():
    report = attention_report([attn([1.0])], [["a"]], "phoneme")
    assert isinstance(report, AttentionReport)
    assert len(report.entries) == 1
    e = report.entries[0]
    assert e.label == "a"
    assert e.total_mass == pytest.approx(1.0)
    assert e.top1_count == 1
    assert e.mean_weight == pytest.approx(1.0)
    assert report.n_sequences == 1


def test_attention_ranking_follows_mass():
    report = attention_report(
        [attn([0.5, 0.3, 0.2])], [["x", "y", "z"]], "phoneme"
    )
    assert [e.label for e in report.entries] == ["x", "y", "z"]
    assert [e.total_mass for e in report.entries] == pytest.approx([0.5, 0.3, 0.2])
    assert report.entries[0].top1_count == 1
    assert report.entries[1].top1_count == 0


def test_attention_masses_sum_to_sequence_count(rng):
    attention = []
    labels = []
    for _ in range(7):
        L = int(rng.integers(1, 6))
        w = rng.random((2, L))
        w /= w.sum(axis=1, keepdims=True)
        attention.append(w)
        labels.append([f"u{int(rng.integers(0, 9))}" for _ in range(L)])
    report = attention_report(attention, labels, "syllable")
    assert sum(e.total_mass for e in report.entries) == pytest.approx(7.0, abs=1e-6)


def test_attention_head_averaging():
    # two heads disagreeing: averaged weight decides mass and top1
    w = np.array([[0.9, 0.1], [0.2, 0.8]])  # head means: 0.55, 0.45
    report = attention_report([w], [["a", "b"]], "phoneme")
    assert report.entries[0].label == "a"
    assert report.entries[0].total_mass == pytest.approx(0.55)
    assert report.entries[0].top1_count == 1


def test_attention_mean_weight_divides_by_occurrences():
    report = attention_report(
        [attn([0.4, 0.4, 0.2])], [["a", "a", "b"]], "phoneme"
    )
    by_label = {e.label: e for e in report.entries}
    assert by_label["a"].total_mass == pytest.approx(0.8)
    assert by_label["a"].mean_weight == pytest.approx(0.4)
    assert by_label["b"].mean_weight == pytest.approx(0.2)


def test_attention_report_truncates_to_twenty():
    labels = [f"l{i:02d}" for i in range(30)]
    w = np.linspace(30, 1, 30)
    w /= w.sum()
    report = attention_report([attn(w)], [labels], "word")
    assert len(report.entries) == 20
    assert report.entries[0].label == "l00"


def test_attention_length_mismatch_rejected():
    with pytest.raises(ValidationError):
        attention_report([attn([1.0])], [["a"], ["b"]], "phoneme")
