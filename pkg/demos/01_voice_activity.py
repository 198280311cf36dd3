"""Turn per-frame speech probabilities into batchable speech segments."""

import numpy as np

from granalign import SegmenterConfig, merge_short, rms_prob, split_long, threshold_segments

# a synthetic 8 s waveform: two bursts of tone separated by silence
sr = 16000
t = np.arange(8 * sr) / sr
wave = np.sin(2 * np.pi * 220 * t)
wave[: 2 * sr] *= 0.0        # leading silence
wave[5 * sr : 6 * sr] *= 0.0  # a one second pause

series = rms_prob(wave, window=512, sample_rate=sr)
print(f"{len(series.probs)} frames, prob range {min(series.probs):.2f}..{max(series.probs):.2f}")

cfg = SegmenterConfig(threshold=0.5, max_segment_s=3.0, min_gap_s=0.1)
segments = threshold_segments(series, cfg)
print("thresholded runs:")
for seg in segments:
    print(f"  {seg.start_s:6.2f} .. {seg.end_s:6.2f}  ({seg.duration_s:.2f} s)")

# long runs are cut into equal parts, then short neighbours fused back
# together while the merged span stays inside the limit
segments = merge_short(split_long(segments, cfg.max_segment_s), cfg.max_segment_s)
print(f"after split/merge at {cfg.max_segment_s} s:")
for seg in segments:
    print(f"  {seg.start_s:6.2f} .. {seg.end_s:6.2f}  ({seg.duration_s:.2f} s)")
