"""Build the training table: filter units, pick a granularity, split speakers."""

import collections
import tempfile
from pathlib import Path

from granalign import filter_units, select_granularity, stratified_speaker_split
from granalign.pipeline import align_corpus, load_dataset, build_dataset
from granalign.synthetic import CorpusSpec, generate_corpus

root = Path(tempfile.mkdtemp(prefix="granalign_demo_"))
corpus = root / "corpus"
generate_corpus(corpus, CorpusSpec(n_speakers=72, utterances_per_speaker=1, feature_dim=8, seed=4))
print(f"synthetic corpus at {corpus}")

units_dir = root / "units"
_, recovery = align_corpus(corpus, units_dir)
print(f"alignment recovered {recovery['fraction']:.0%} of planted boundaries within one frame")

data_dir = root / "dataset"
build_dataset(corpus, units_dir, "phoneme", data_dir, conf_threshold=0.6, seed=0)
records, store, split = load_dataset(data_dir)
first_vec = store.get(records[0].units[0][1])
print(f"{len(records)} utterance records, feature dim {first_vec.shape[0]}")

kept, dropped_ids = filter_units(records, conf_threshold=0.8)
n_before = sum(len(r.units) for r in records)
n_after = sum(len(r.units) for r in kept)
print(f"confidence filter at 0.8 keeps {n_after}/{n_before} units, drops {len(dropped_ids)} records")

phones, _ = select_granularity(records, "phoneme")
print(f"{sum(len(r.units) for r in phones)} phoneme units feed the classifier")

# speakers never straddle splits; strata balance label, language and duration
assignment = stratified_speaker_split(records, seed=0)
counts = collections.Counter(assignment.by_speaker.values())
for name in ("train", "val", "test"):
    labels = collections.Counter(
        r.label for r in records if assignment.by_speaker[r.speaker_id] == name
    )
    print(f"{name:>5}: {counts[name]:2d} speakers  {dict(sorted(labels.items()))}")
