"""Deterministic training loop for the sequence classifier.

AdamW with decoupled weight decay and global-norm gradient clipping
(applied before the moment update), ReduceLROnPlateau on validation
loss, early stopping and best-checkpoint selection on subject-level
validation F1. Everything is driven by explicit seeds: batch order,
dropout masks and initialization derive from the fit seed, so one seed
reproduces one history bit for bit on one machine.

Checkpoints are a directory of FMAT containers, one per parameter
tensor, indexed by a manifest NDJSON (name, file, shape, step).
"""

import json
import os
from dataclasses import asdict, dataclass

import numpy as np

from .dataset import make_batches
from .errors import DataError, NumericError, TrainingDivergedError, ValidationError
from .fmat import read_fmat, write_fmat
from .metrics import aggregate_subjects, compute_metrics
from .model import (
    ClassifierConfig,
    ModelParams,
    forward,
    init_params,
    loss_and_gradients,
    zeros_like_params,
)


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-5
    weight_decay: float = 0.01
    clip_norm: float = 1.0
    batch_size: int = 32
    max_epochs: int = 15
    plateau_factor: float = 0.5
    plateau_patience: int = 5
    early_stop_metric: str = "val_f1"
    early_stop_patience: int = 5
    seeds: int = 5
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        positives = (
            self.lr,
            self.clip_norm,
            self.batch_size,
            self.max_epochs,
            self.plateau_patience,
            self.early_stop_patience,
            self.seeds,
            self.adam_eps,
        )
        if min(positives) <= 0:
            raise ValidationError("lr, clip_norm, batch_size, epoch and patience fields must be positive")
        if self.weight_decay < 0:
            raise ValidationError("weight_decay must be >= 0")
        if not 0.0 < self.plateau_factor < 1.0:
            raise ValidationError("plateau_factor must lie in (0, 1)")
        if not (0.0 <= self.adam_beta1 < 1.0 and 0.0 <= self.adam_beta2 < 1.0):
            raise ValidationError("adam betas must lie in [0, 1)")
        if self.early_stop_metric != "val_f1":
            raise ValidationError("early_stop_metric supports only 'val_f1'")


def global_grad_norm(grads):
    total = 0.0
    for _, g in grads.items():
        total += float(np.sum(np.square(g)))
    return float(np.sqrt(total))


def adamw_step(params, grads, state, step, config, lr=None):
    """One decoupled-weight-decay Adam update, in place.

    Gradients are first clipped jointly to global norm ``clip_norm``,
    then fed to the moment estimates; decay acts on the parameter
    itself, not through the moments. ``step`` is 1-based.
    """
    if step < 1:
        raise ValidationError(f"step must be >= 1, got {step}")
    lr = config.lr if lr is None else lr
    norm = global_grad_norm(grads)
    if not np.isfinite(norm):
        raise NumericError("non-finite gradients in adamw_step")
    scale = config.clip_norm / norm if norm > config.clip_norm else 1.0

    b1, b2, eps = config.adam_beta1, config.adam_beta2, config.adam_eps
    c1 = 1.0 - b1**step
    c2 = 1.0 - b2**step
    tensors = dict(params.items())
    for name, g in grads.items():
        g = g * scale
        m, v = state[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * np.square(g)
        theta = tensors[name]
        theta -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
        theta -= lr * config.weight_decay * theta
    return params, state


def init_adam_state(params):
    return {name: (np.zeros_like(a), np.zeros_like(a)) for name, a in params.items()}


@dataclass
class EpochStats:
    epoch: int
    lr: float
    train_loss: float
    train_accuracy: float  # sequence-level, evaluation mode
    val_loss: float
    val_f1: float
    val_accuracy: float
    improved: bool  # new best validation F1


@dataclass
class FitResult:
    params: ModelParams  # best checkpoint by validation F1
    history: list  # of EpochStats
    best_epoch: int
    stopped_epoch: int


def predict(records, store, params, config, batch_size=32, return_attention=False):
    """Evaluation-mode probabilities per utterance.

    Returns a list of dicts with utterance_id, speaker_id, label,
    pd_prob and (optionally) the heads x L attention block plus the
    unit labels for each utterance.
    """
    out = []
    for batch in make_batches(records, store, batch_size=batch_size, seed=0):
        probs, attn = forward(batch, params, config, train_mode=False)
        for i, utt in enumerate(batch.utterance_ids):
            row = {
                "utterance_id": utt,
                "speaker_id": batch.speaker_ids[i],
                "label": "PD" if batch.labels[i] == 1 else "HC",
                "pd_prob": float(probs[i, 1]),
            }
            if return_attention:
                n = int(batch.lengths[i])
                row["attention"] = attn[i, :, :n].copy()
                row["unit_labels"] = list(batch.unit_labels[i])
            out.append(row)
    out.sort(key=lambda r: r["utterance_id"])
    return out


def _subject_scores(rows):
    subjects = aggregate_subjects(
        (r["speaker_id"], r["pd_prob"], r["label"]) for r in rows
    )
    return compute_metrics(subjects)


def fit(train_records, val_records, store, model_config, train_config, seed=0):
    """Train to best validation F1; returns the best params and history.

    Per epoch: reshuffled batches, forward with fresh dropout masks,
    exact gradients of the measured loss, one AdamW step per batch.
    Validation loss feeds the plateau scheduler (halve lr after
    ``plateau_patience`` epochs without improvement); subject-level
    validation F1 picks the checkpoint and stops training after
    ``early_stop_patience`` epochs without a new best.
    """
    if not train_records or not val_records:
        raise ValidationError("fit needs non-empty train and validation splits")
    rng = np.random.default_rng(seed)
    params = init_params(model_config, seed=int(rng.integers(2**31)))
    state = init_adam_state(params)

    lr = train_config.lr
    best_val_loss = np.inf
    plateau_bad = 0
    best_f1 = -np.inf
    best_params = params.copy()
    best_epoch = 0
    es_bad = 0
    step = 0
    history = []

    for epoch in range(1, train_config.max_epochs + 1):
        batches = make_batches(
            train_records,
            store,
            batch_size=train_config.batch_size,
            seed=int(rng.integers(2**31)),
        )
        total_loss = 0.0
        total_n = 0
        for batch in batches:
            loss, _, _, grads = loss_and_gradients(
                batch,
                params,
                model_config,
                train_mode=True,
                dropout_seed=int(rng.integers(2**31)),
            )
            if not np.isfinite(loss):
                raise TrainingDivergedError(
                    f"non-finite training loss at epoch {epoch}", history
                )
            step += 1
            params, state = adamw_step(params, grads, state, step, train_config, lr=lr)
            total_loss += loss * len(batch.labels)
            total_n += len(batch.labels)

        train_rows = predict(
            train_records, store, params, model_config, batch_size=train_config.batch_size
        )
        train_accuracy = float(
            np.mean([(r["pd_prob"] >= 0.5) == (r["label"] == "PD") for r in train_rows])
        )
        val_rows = predict(
            val_records, store, params, model_config, batch_size=train_config.batch_size
        )
        val_probs = np.array([[1.0 - r["pd_prob"], r["pd_prob"]] for r in val_rows])
        val_labels = np.array([1 if r["label"] == "PD" else 0 for r in val_rows])
        p_true = np.maximum(
            val_probs[np.arange(len(val_labels)), val_labels], 1e-12
        )
        val_loss = float(-np.mean(np.log(p_true)))
        if not np.isfinite(val_loss):
            raise TrainingDivergedError(
                f"non-finite validation loss at epoch {epoch}", history
            )
        val_report = _subject_scores(val_rows)
        val_f1 = val_report.f1

        improved = val_f1 > best_f1
        if improved:
            best_f1 = val_f1
            best_params = params.copy()
            best_epoch = epoch
            es_bad = 0
        else:
            es_bad += 1

        history.append(
            EpochStats(
                epoch=epoch,
                lr=lr,
                train_loss=total_loss / max(total_n, 1),
                train_accuracy=train_accuracy,
                val_loss=val_loss,
                val_f1=val_f1,
                val_accuracy=val_report.accuracy,
                improved=improved,
            )
        )

        if val_loss < best_val_loss:
            best_val_loss = val_loss
            plateau_bad = 0
        else:
            plateau_bad += 1
            if plateau_bad >= train_config.plateau_patience:
                lr *= train_config.plateau_factor
                plateau_bad = 0

        if es_bad >= train_config.early_stop_patience:
            break

    return FitResult(
        params=best_params,
        history=history,
        best_epoch=best_epoch,
        stopped_epoch=history[-1].epoch if history else 0,
    )


def _tensor_filename(name):
    return name.replace(".", "_") + ".fmat"


def save_checkpoint(path, params, model_config, step=0):
    """One FMAT per tensor plus manifest.ndjson describing them."""
    os.makedirs(path, exist_ok=True)
    lines = [
        {"kind": "config", "model": asdict(model_config), "step": step},
    ]
    for name, arr in params.items():
        fname = _tensor_filename(name)
        mat = arr if arr.ndim == 2 else arr.reshape(arr.shape[0], -1) if arr.ndim > 1 else arr.reshape(1, -1)
        write_fmat(os.path.join(path, fname), mat, dtype="f64")
        lines.append(
            {
                "kind": "tensor",
                "name": name,
                "file": fname,
                "shape": list(arr.shape),
                "step": step,
            }
        )
    with open(os.path.join(path, "manifest.ndjson"), "w", encoding="utf-8") as fh:
        for line in lines:
            fh.write(json.dumps(line, sort_keys=True) + "\n")


def load_checkpoint(path):
    """Inverse of save_checkpoint; returns (params, model_config)."""
    manifest = os.path.join(path, "manifest.ndjson")
    if not os.path.exists(manifest):
        raise DataError(f"no checkpoint manifest at {manifest}")
    config = None
    tensors = {}
    with open(manifest, "r", encoding="utf-8") as fh:
        for line in fh:
            obj = json.loads(line)
            if obj["kind"] == "config":
                config = ClassifierConfig(**obj["model"])
            elif obj["kind"] == "tensor":
                mat = read_fmat(os.path.join(path, obj["file"]))
                tensors[obj["name"]] = mat.reshape(obj["shape"])
    if config is None:
        raise DataError(f"checkpoint manifest {manifest} lacks a config line")
    params = ModelParams.from_items(tensors)
    params.validate(config)
    return params, config


__all__ = [
    "TrainConfig",
    "EpochStats",
    "FitResult",
    "adamw_step",
    "init_adam_state",
    "global_grad_norm",
    "fit",
    "predict",
    "save_checkpoint",
    "load_checkpoint",
    "zeros_like_params",
]
