"""Find which unit labels the trained classifier attends to."""

import tempfile
from pathlib import Path

import numpy as np

from granalign import (
    AlignedUnit,
    ClassifierConfig,
    FeatureRef,
    FeatureStore,
    TrainConfig,
    UtteranceRecord,
    attention_report,
    fit,
    predict,
    write_fmat,
)

root = Path(tempfile.mkdtemp(prefix="granalign_demo_"))
rng = np.random.default_rng(1)

# every utterance carries the class signal in a single "pa" unit; the
# other units are noise under assorted labels
rows, records = [], []
noise_labels = ["ta", "ka", "la", "ma", "sa"]
for i in range(30):
    label = "PD" if i % 2 == 0 else "HC"
    shift = 2.0 if label == "PD" else -2.0
    units = []
    for j in range(6):
        if j == i % 6:
            rows.append(rng.normal(size=8) * 0.3 + shift)
            unit_label = "pa"
        else:
            rows.append(rng.normal(size=8) * 0.3)
            unit_label = noise_labels[(i + j) % len(noise_labels)]
        units.append(
            (
                AlignedUnit(unit_label, "phoneme", 0.1 * j, 0.1 * j + 0.1, 0.9),
                FeatureRef("demo.fmat", len(rows) - 1),
            )
        )
    records.append(UtteranceRecord(f"utt{i:02d}", f"spk{i:02d}", "it", label, 1.0, units))
write_fmat(root / "demo.fmat", np.array(rows), dtype="f64")
store = FeatureStore(root=str(root))

model = ClassifierConfig(input_dim=8, num_layers=1, hidden=8, dropout=0.0, heads=2)
config = TrainConfig(lr=3e-3, batch_size=8, max_epochs=20, early_stop_patience=20)
result = fit(records[:20], records[20:], store, model, config, seed=0)

rows_out = predict(records, store, result.params, model, return_attention=True)
report = attention_report(
    [r["attention"] for r in rows_out],
    [r["unit_labels"] for r in rows_out],
    "phoneme",
)
print(f"{report.n_sequences} sequences, labels ranked by attention mass:")
for e in report.entries:
    print(
        f"  {e.label:>3}  mass {e.total_mass:5.2f}  "
        f"top-1 in {e.top1_count:2d} sequences  mean weight {e.mean_weight:.3f}"
    )
