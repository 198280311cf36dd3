"""Speech segmentation from frame-level speech probabilities.

Thresholds a per-frame speech-probability series into segments, then
enforces the batching policy used downstream: segments longer than the
limit are split into equal parts and shorter adjacent segments are merged
back up to that limit. Frame ``i`` covers ``[i*hop, (i+1)*hop) / rate``
seconds.
"""

import math
from dataclasses import dataclass

from .errors import EmptyInputError, ValidationError

_EPS = 1e-9


@dataclass(frozen=True)
class FrameProbSeries:
    """Per-frame speech probabilities with their frame geometry."""

    probs: tuple
    frame_hop: int = 512
    sample_rate: int = 16000

    def __post_init__(self):
        object.__setattr__(self, "probs", tuple(float(p) for p in self.probs))
        if self.frame_hop <= 0:
            raise ValidationError(f"frame_hop must be positive, got {self.frame_hop}")
        if self.sample_rate <= 0:
            raise ValidationError(f"sample_rate must be positive, got {self.sample_rate}")
        for p in self.probs:
            if not 0.0 <= p <= 1.0:
                raise ValidationError(f"probability {p} outside [0, 1]")

    @property
    def frame_dur_s(self):
        return self.frame_hop / self.sample_rate


@dataclass(frozen=True)
class SpeechSegment:
    start_s: float
    end_s: float

    def __post_init__(self):
        if self.start_s < 0:
            raise ValidationError(f"segment start {self.start_s} is negative")
        if self.end_s <= self.start_s:
            raise ValidationError(
                f"segment end {self.end_s} not after start {self.start_s}"
            )

    @property
    def duration_s(self):
        return self.end_s - self.start_s


@dataclass(frozen=True)
class SegmenterConfig:
    threshold: float = 0.5
    max_segment_s: float = 30.0
    min_gap_s: float = 0.1

    def __post_init__(self):
        if not 0.0 < self.threshold < 1.0:
            raise ValidationError(f"threshold {self.threshold} outside (0, 1)")
        if self.max_segment_s <= 0:
            raise ValidationError("max_segment_s must be positive")
        if self.min_gap_s < 0:
            raise ValidationError("min_gap_s must be non-negative")


def _check_sorted_disjoint(segments):
    prev_end = None
    for seg in segments:
        if prev_end is not None and seg.start_s < prev_end - _EPS:
            raise ValidationError("segments must be sorted and non-overlapping")
        prev_end = seg.end_s


def threshold_segments(series, cfg):
    """Maximal runs of frames with prob >= threshold, as second-based segments.

    Runs separated by a sub-threshold gap shorter than ``cfg.min_gap_s``
    are fused, so single-frame probability dips do not fragment speech.
    """
    if not series.probs:
        raise EmptyInputError("cannot segment an empty probability series")
    dur = series.frame_dur_s
    runs = []  # [first_frame, last_frame] inclusive
    current = None
    for i, p in enumerate(series.probs):
        if p >= cfg.threshold:
            if current is None:
                current = [i, i]
            else:
                current[1] = i
        elif current is not None:
            runs.append(current)
            current = None
    if current is not None:
        runs.append(current)

    fused = []
    for run in runs:
        if fused and (run[0] - fused[-1][1] - 1) * dur < cfg.min_gap_s:
            fused[-1][1] = run[1]
        else:
            fused.append(run)
    return [SpeechSegment(first * dur, (last + 1) * dur) for first, last in fused]


def split_long(segments, max_segment_s):
    """Divide every segment longer than the limit into equal parts.

    A segment of duration d becomes ceil(d/max) pieces, so no output
    exceeds ``max_segment_s`` and no trailing sliver is produced. The
    union of outputs equals the union of inputs.
    """
    if max_segment_s <= 0:
        raise ValidationError("max_segment_s must be positive")
    _check_sorted_disjoint(segments)
    out = []
    for seg in segments:
        d = seg.duration_s
        n_parts = max(1, math.ceil(d / max_segment_s - _EPS))
        if n_parts == 1:
            out.append(seg)
            continue
        for k in range(n_parts):
            lo = seg.start_s + d * k / n_parts
            hi = seg.end_s if k == n_parts - 1 else seg.start_s + d * (k + 1) / n_parts
            out.append(SpeechSegment(lo, hi))
    return out


def merge_short(segments, max_segment_s):
    """Greedy left-to-right merge of adjacent segments within the limit.

    Adjacent segments are fused while the merged span (first start to
    last end) stays <= ``max_segment_s``. Ordering is preserved; inputs
    must each respect the limit already.
    """
    if max_segment_s <= 0:
        raise ValidationError("max_segment_s must be positive")
    _check_sorted_disjoint(segments)
    for seg in segments:
        if seg.duration_s > max_segment_s + _EPS:
            raise ValidationError(
                f"segment [{seg.start_s}, {seg.end_s}] exceeds the "
                f"{max_segment_s} s limit; run split_long first"
            )
    out = []
    for seg in segments:
        if out and seg.end_s - out[-1].start_s <= max_segment_s + _EPS:
            out[-1] = SpeechSegment(out[-1].start_s, seg.end_s)
        else:
            out.append(seg)
    return out


def rms_prob(waveform, window, sample_rate=16000):
    """Map per-window RMS amplitude to a pseudo speech probability.

    Test-only stand-in for a real voice activity model: each window of
    ``window`` samples yields min(1, rms / 0.05). A trailing partial
    window is evaluated over its remaining samples.
    """
    if window <= 0:
        raise ValidationError(f"window must be positive, got {window}")
    samples = [float(x) for x in waveform]
    if not samples:
        raise EmptyInputError("cannot compute probabilities for empty audio")
    probs = []
    for start in range(0, len(samples), window):
        chunk = samples[start : start + window]
        rms = math.sqrt(sum(x * x for x in chunk) / len(chunk))
        probs.append(min(1.0, rms / 0.05))
    return FrameProbSeries(tuple(probs), frame_hop=window, sample_rate=sample_rate)
