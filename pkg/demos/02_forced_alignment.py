"""Align a phoneme target against frame emissions and read off timestamps."""

import numpy as np

from granalign import EmissionMatrix, TargetSequence, group_words, viterbi_align

symbols = ("<b>", "p", "a", "t", "k")
target = TargetSequence.from_words([("pata", ["p", "a", "t", "a"])])

# hand-built emissions: 10 frames, each row a probability distribution
# peaking on the phoneme that should occupy it
rng = np.random.default_rng(0)
plan = ["p", "p", "a", "a", "<b>", "t", "t", "a", "a", "a"]
rows = []
for ph in plan:
    row = np.full(len(symbols), 0.02)
    row[symbols.index(ph)] = 1.0 - 0.02 * (len(symbols) - 1)
    rows.append(row)
logprobs = np.log(np.array(rows))

em = EmissionMatrix(logprobs, frame_dur_s=0.02, symbols=symbols, blank_index=0)
units, score = viterbi_align(em, target)

print(f"best path log-probability {score:.3f}")
for u in units:
    print(f"  {u.label:>3}  {u.start_s:.2f} .. {u.end_s:.2f}  confidence {u.confidence:.2f}")

words = group_words(units, target)
for w in words:
    print(f"word {w.label!r} spans {w.start_s:.2f} .. {w.end_s:.2f}, confidence {w.confidence:.2f}")
