"""Sonority-based syllabification of IPA phoneme sequences.

Every vowel is a syllable nucleus. Consonants between two nuclei are
split so that the onset attached to the following nucleus rises (or
stays level) in sonority toward it, and the onset is as long as that
constraint allows. Word-initial consonants always join the first onset,
word-final consonants the last coda. A word with no vowel at all forms
one syllable around its most sonorous phoneme.

The six-rank sonority scale is configurable through the inventory so
individual languages can reclassify symbols.
"""

import warnings
from dataclasses import dataclass, field

from .errors import ConsistencyError, EmptyInputError, ValidationError
from .ctc import AlignedUnit

SONORITY_RANKS = {
    "plosive": 0,
    "affricate": 0,
    "fricative": 1,
    "nasal": 2,
    "liquid": 3,
    "glide": 4,
    "vowel": 5,
}

# Broad-coverage default over common IPA symbols; language-specific
# overrides load from a two-column TSV (symbol<TAB>class).
DEFAULT_INVENTORY = {
    **{v: "vowel" for v in "aeiouyɑɐɒæɛəɜɪɔøœʊʌɯɤʏ"},
    **{p: "plosive" for p in "pbtdkgqɢʔɖɟc"},
    **{f: "fricative" for f in "fvszʃʒθðxɣχʁhɦɸβçʝ"},
    **{n: "nasal" for n in "mnɲŋɳɴ"},
    **{l: "liquid" for l in "lrɾɹʎʀɽɫ"},
    **{g: "glide" for g in "jwɥʋ"},
    "tʃ": "affricate",
    "dʒ": "affricate",
    "ts": "affricate",
    "dz": "affricate",
    "pf": "affricate",
}
DEFAULT_FALLBACK_CLASS = "plosive"


@dataclass(frozen=True)
class SonorityTag:
    symbol: str
    sonority_class: str
    rank: int
    known: bool


@dataclass(frozen=True)
class PhonemeInventory:
    """Maps IPA symbols to sonority classes, with a fallback for unknowns."""

    entries: dict = field(default_factory=lambda: dict(DEFAULT_INVENTORY))
    fallback_class: str = DEFAULT_FALLBACK_CLASS

    def __post_init__(self):
        for symbol, cls in self.entries.items():
            if cls not in SONORITY_RANKS:
                raise ValidationError(
                    f"unknown sonority class {cls!r} for symbol {symbol!r}"
                )
        if self.fallback_class not in SONORITY_RANKS:
            raise ValidationError(f"unknown fallback class {self.fallback_class!r}")

    @classmethod
    def from_tsv(cls, path, fallback_class=DEFAULT_FALLBACK_CLASS):
        entries = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.rstrip("\n")
                if not line or line.startswith("#"):
                    continue
                parts = line.split("\t")
                if len(parts) != 2:
                    raise ValidationError(
                        f"{path}:{lineno}: expected 'symbol<TAB>class', got {line!r}"
                    )
                entries[parts[0]] = parts[1]
        return cls(entries=entries, fallback_class=fallback_class)

    def to_tsv(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            for symbol in sorted(self.entries):
                fh.write(f"{symbol}\t{self.entries[symbol]}\n")


@dataclass(frozen=True)
class Syllable:
    """Half-open phoneme index range within one word, plus its nucleus."""

    phoneme_range: tuple
    nucleus_index: int

    def __post_init__(self):
        start, end = self.phoneme_range
        if not start <= self.nucleus_index < end:
            raise ValidationError(
                f"nucleus {self.nucleus_index} outside range {self.phoneme_range}"
            )


def classify(symbol, inv):
    """Sonority class and rank of a symbol; unknowns get the fallback
    class, flagged via ``known=False`` and a warning."""
    cls = inv.entries.get(symbol)
    if cls is None:
        warnings.warn(
            f"symbol {symbol!r} not in the phoneme inventory; "
            f"treating as {inv.fallback_class}",
            stacklevel=2,
        )
        return SonorityTag(symbol, inv.fallback_class, SONORITY_RANKS[inv.fallback_class], False)
    return SonorityTag(symbol, cls, SONORITY_RANKS[cls], True)


def ssp_syllabify(phonemes, inv):
    """Partition one word's phonemes into syllables around vowel nuclei."""
    if not phonemes:
        raise EmptyInputError("cannot syllabify an empty phoneme list")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        tags = [classify(p, inv) for p in phonemes]
    unknown = [t.symbol for t in tags if not t.known]
    if unknown:
        warnings.warn(
            f"symbols {sorted(set(unknown))} not in the phoneme inventory; "
            f"treating as {inv.fallback_class}",
            stacklevel=2,
        )
    ranks = [t.rank for t in tags]
    nuclei = [i for i, t in enumerate(tags) if t.sonority_class == "vowel"]
    n = len(phonemes)
    if not nuclei:
        # degenerate vowelless word: one syllable, most sonorous phoneme
        # as nucleus
        peak = max(range(n), key=lambda i: (ranks[i], -i))
        return [Syllable((0, n), peak)]

    # onset of each non-initial syllable: the longest suffix of the
    # intervocalic cluster with non-decreasing sonority toward the nucleus
    starts = [0]
    for prev_nuc, nuc in zip(nuclei, nuclei[1:]):
        onset_start = nuc
        while onset_start - 1 > prev_nuc and (
            onset_start == nuc or ranks[onset_start - 1] <= ranks[onset_start]
        ):
            onset_start -= 1
        starts.append(onset_start)
    bounds = starts + [n]
    return [
        Syllable((bounds[k], bounds[k + 1]), nuclei[k]) for k in range(len(nuclei))
    ]


def align_syllables(syllables, phoneme_units):
    """Compose syllable units from one word's phoneme units.

    Labels concatenate the constituent IPA symbols; confidence is the
    mean of the constituents'.
    """
    total = max(end for _, end in (s.phoneme_range for s in syllables)) if syllables else 0
    if len(phoneme_units) != total:
        raise ConsistencyError(
            f"{len(phoneme_units)} phoneme units for a word of {total} phonemes"
        )
    out = []
    for syl in syllables:
        start, end = syl.phoneme_range
        members = phoneme_units[start:end]
        conf = sum(u.confidence for u in members) / len(members)
        out.append(
            AlignedUnit(
                label="".join(u.label for u in members),
                granularity="syllable",
                start_s=members[0].start_s,
                end_s=members[-1].end_s,
                confidence=conf,
            )
        )
    return out
