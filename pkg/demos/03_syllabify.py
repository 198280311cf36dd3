"""Split phoneme strings into syllables by rising-sonority onsets."""

from granalign import PhonemeInventory, classify, ssp_syllabify

inv = PhonemeInventory()

for word in ["pataka", "estra", "planta", "strelna"]:
    phonemes = list(word)
    sylls = ssp_syllabify(phonemes, inv)
    pieces = ["".join(phonemes[a:b]) for (a, b) in (s.phoneme_range for s in sylls)]
    print(f"{word:>8} -> {'.'.join(pieces)}")
    for s in sylls:
        a, b = s.phoneme_range
        print(f"          nucleus {phonemes[s.nucleus_index]!r} in {''.join(phonemes[a:b])!r}")

# sonority classes drive every boundary decision
print()
for symbol in "pstmlja":
    tag = classify(symbol, inv)
    print(f"{symbol}: {tag.sonority_class:<9} rank {tag.rank}")
