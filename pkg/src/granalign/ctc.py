"""CTC forced alignment of a known phoneme sequence against emissions.

The target is expanded into the canonical blank-interleaved state chain
and the single best monotone state path is found by Viterbi over the
usual transitions: stay, advance one state, or advance two states
(skipping a blank), where the two-state jump is forbidden into a blank
or into a phoneme equal to the one two states back.

Per-phoneme time spans come from the frames where the path occupies the
phoneme's state; confidences are mean per-frame posteriors over the
span. Ties are broken deterministically: advancing beats staying, and a
smaller state index beats a larger one.
"""

from dataclasses import dataclass

import numpy as np

from .errors import (
    ConsistencyError,
    InfeasibleAlignmentError,
    ValidationError,
    VocabularyError,
)

BLANK_LABEL = "<blank>"

GRANULARITIES = ("phoneme", "syllable", "word")


@dataclass(frozen=True)
class EmissionMatrix:
    """T x V per-frame log-probabilities over a symbol table with blank."""

    logprobs: np.ndarray
    frame_dur_s: float
    symbols: tuple
    blank_index: int

    def __post_init__(self):
        lp = np.asarray(self.logprobs, dtype=np.float64)
        object.__setattr__(self, "logprobs", lp)
        object.__setattr__(self, "symbols", tuple(self.symbols))
        if lp.ndim != 2 or lp.shape[0] < 1:
            raise ValidationError(f"emissions must be a T x V matrix, got {lp.shape}")
        if self.frame_dur_s <= 0:
            raise ValidationError("frame_dur_s must be positive")
        if len(self.symbols) != lp.shape[1]:
            raise ValidationError(
                f"{len(self.symbols)} symbols for {lp.shape[1]} emission columns"
            )
        if len(set(self.symbols)) != len(self.symbols):
            raise ValidationError("symbol table contains duplicates")
        if not 0 <= self.blank_index < lp.shape[1]:
            raise ValidationError(f"blank index {self.blank_index} outside [0, V)")
        # each row must be a (log) distribution
        row_lse = np.logaddexp.reduce(lp, axis=1)
        worst = float(np.max(np.abs(row_lse)))
        if worst > 1e-3:
            raise ValidationError(
                f"emission rows must log-sum-exp to 0 (worst deviation {worst:.2e})"
            )

    @property
    def n_frames(self):
        return self.logprobs.shape[0]

    @property
    def n_symbols(self):
        return self.logprobs.shape[1]

    def symbol_index(self, symbol):
        try:
            return self.symbols.index(symbol)
        except ValueError:
            raise VocabularyError(
                f"symbol {symbol!r} absent from the emission symbol table"
            ) from None


@dataclass(frozen=True)
class TargetSequence:
    """Phoneme list plus the word spans partitioning it."""

    phonemes: tuple
    word_spans: tuple  # (start, end) half-open index ranges
    word_texts: tuple

    def __post_init__(self):
        object.__setattr__(self, "phonemes", tuple(self.phonemes))
        object.__setattr__(
            self, "word_spans", tuple((int(a), int(b)) for a, b in self.word_spans)
        )
        object.__setattr__(self, "word_texts", tuple(self.word_texts))
        if len(self.word_spans) != len(self.word_texts):
            raise ValidationError("word_spans and word_texts lengths differ")
        cursor = 0
        for start, end in self.word_spans:
            if start != cursor or end <= start:
                raise ValidationError(
                    f"word spans must be contiguous and non-empty, got {self.word_spans}"
                )
            cursor = end
        if cursor != len(self.phonemes):
            raise ValidationError("word spans do not cover the phoneme list")

    @classmethod
    def from_words(cls, words):
        """Build from [(text, [phoneme, ...]), ...]."""
        phonemes = []
        spans = []
        texts = []
        for text, phs in words:
            spans.append((len(phonemes), len(phonemes) + len(phs)))
            phonemes.extend(phs)
            texts.append(text)
        return cls(tuple(phonemes), tuple(spans), tuple(texts))


@dataclass(frozen=True)
class AlignedUnit:
    """A time-stamped phoneme, syllable or word with a confidence."""

    label: str
    granularity: str
    start_s: float
    end_s: float
    confidence: float

    def __post_init__(self):
        if self.granularity not in GRANULARITIES:
            raise ValidationError(f"unknown granularity {self.granularity!r}")
        if self.end_s <= self.start_s:
            raise ValidationError(
                f"unit {self.label!r} has end {self.end_s} <= start {self.start_s}"
            )
        if not 0.0 <= self.confidence <= 1.0:
            raise ValidationError(f"confidence {self.confidence} outside [0, 1]")


def expand_with_blanks(target):
    """Canonical CTC state chain: blank, s1, blank, s2, ..., blank."""
    chain = [BLANK_LABEL]
    for ph in target.phonemes:
        chain.append(ph)
        chain.append(BLANK_LABEL)
    return chain


def min_frames_required(target):
    """Shortest feasible path: one frame per phoneme plus a separating
    blank between equal neighbours."""
    phs = target.phonemes
    repeats = sum(1 for a, b in zip(phs, phs[1:]) if a == b)
    return max(1, len(phs) + repeats)


def viterbi_align(em, target):
    """Best forced-alignment path; returns (phoneme units, path log-prob).

    Tie-breaking is fixed for reproducibility: among equal-scoring
    predecessors the smaller state index wins (so advancing is preferred
    over staying), and the same rule picks the final state.
    """
    for ph in target.phonemes:
        if ph not in em.symbols:
            raise VocabularyError(
                f"target phoneme {ph!r} absent from the emission symbol table"
            )
    T = em.n_frames
    need = min_frames_required(target)
    if T < need:
        raise InfeasibleAlignmentError(T, need)

    L = len(target.phonemes)
    S = 2 * L + 1
    state_sym = np.empty(S, dtype=np.int64)
    state_sym[0::2] = em.blank_index
    for i, ph in enumerate(target.phonemes):
        state_sym[2 * i + 1] = em.symbols.index(ph)

    lp = em.logprobs
    NEG = -np.inf
    delta = np.full(S, NEG)
    delta[0] = lp[0, state_sym[0]]
    if S > 1:
        delta[1] = lp[0, state_sym[1]]
    # advance-two is allowed only into a non-blank state that differs
    # from the phoneme two states back
    skip_ok = np.zeros(S, dtype=bool)
    for j in range(2, S):
        skip_ok[j] = j % 2 == 1 and state_sym[j] != state_sym[j - 2]

    back = np.zeros((T, S), dtype=np.int8)  # frames back to the predecessor
    for t in range(1, T):
        stay = delta
        adv1 = np.concatenate(([NEG], delta[:-1]))
        adv2 = np.concatenate(([NEG, NEG], delta[:-2]))
        adv2 = np.where(skip_ok, adv2, NEG)
        # stack order fixes the tie-break: first maximum wins, so the
        # smallest predecessor index is preferred
        cand = np.stack([adv2, adv1, stay])
        choice = np.argmax(cand, axis=0)
        best = cand[choice, np.arange(S)]
        back[t] = 2 - choice  # 0 = stay, 1 = advance one, 2 = advance two
        delta = best + lp[t, state_sym]

    end_states = [S - 2, S - 1] if S > 1 else [0]
    end = min(end_states, key=lambda j: (-delta[j], j))
    path_logprob = float(delta[end])
    if not np.isfinite(path_logprob):
        raise InfeasibleAlignmentError(T, need)

    path = np.empty(T, dtype=np.int64)
    j = end
    for t in range(T - 1, -1, -1):
        path[t] = j
        j -= back[t, j]

    units = []
    for i in range(L):
        frames = np.flatnonzero(path == 2 * i + 1)
        first, last = int(frames[0]), int(frames[-1])
        conf = unit_confidence(em, (first, last), int(state_sym[2 * i + 1]))
        units.append(
            AlignedUnit(
                label=target.phonemes[i],
                granularity="phoneme",
                start_s=first * em.frame_dur_s,
                end_s=(last + 1) * em.frame_dur_s,
                confidence=conf,
            )
        )
    return units, path_logprob


def unit_confidence(em, frame_span, symbol_index):
    """Mean posterior of the symbol over an inclusive frame span."""
    first, last = frame_span
    if last < first:
        raise ValidationError(f"empty frame span ({first}, {last})")
    if first < 0 or last >= em.n_frames:
        raise ValidationError(
            f"frame span ({first}, {last}) outside [0, {em.n_frames})"
        )
    post = np.exp(em.logprobs[first : last + 1, symbol_index])
    return float(min(1.0, np.mean(post)))


def group_words(phoneme_units, target):
    """Compose word units from consecutive phoneme units.

    Word boundaries come from the target's word spans; the word
    confidence is the mean of its constituents'.
    """
    if len(phoneme_units) != len(target.phonemes):
        raise ConsistencyError(
            f"{len(phoneme_units)} phoneme units for "
            f"{len(target.phonemes)} target phonemes"
        )
    words = []
    for (start, end), text in zip(target.word_spans, target.word_texts):
        members = phoneme_units[start:end]
        conf = sum(u.confidence for u in members) / len(members)
        words.append(
            AlignedUnit(
                label=text,
                granularity="word",
                start_s=members[0].start_s,
                end_s=members[-1].end_s,
                confidence=conf,
            )
        )
    return words
