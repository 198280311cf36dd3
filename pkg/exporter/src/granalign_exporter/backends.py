"""Acoustic-model backends.

A backend turns a mono 16 kHz signal into frame-level outputs: CTC
emission log-probabilities plus hidden-layer feature matrices. The
synthetic backend is fully deterministic in the audio content, so
exports can be reproduced and tested without downloading weights. The
Hugging Face backend wraps wav2vec2-style checkpoints when they are
available.
"""

from __future__ import annotations

import hashlib

import numpy as np

from .errors import AudioError, ModelUnavailableError

SAMPLE_RATE = 16000
FRAME_HOP = 320
FRAME_DUR_S = FRAME_HOP / SAMPLE_RATE
FEATURE_DIM = 1024

DEFAULT_MODEL = "facebook/wav2vec2-large-xlsr-53"

BLANK_LABEL = "<blank>"

_SYNTHETIC_PHONES = (
    "a", "e", "i", "o", "u",
    "p", "t", "k", "b", "d", "g",
    "f", "s", "x", "m", "n", "l", "r", "j", "w",
)


def _content_seed(samples: np.ndarray, salt: bytes = b"") -> int:
    digest = hashlib.sha256(samples.tobytes() + salt).digest()
    return int.from_bytes(digest, "big")


def _frame_count(samples: np.ndarray) -> int:
    n = samples.size // FRAME_HOP
    if n < 1:
        raise AudioError(
            f"audio too short: {samples.size} samples is less than one "
            f"{FRAME_HOP}-sample frame"
        )
    return n


class SyntheticBackend:
    """Deterministic stand-in for a pretrained acoustic model.

    All outputs are derived from a hash of the sample values, so the
    same audio always yields byte-identical exports.
    """

    name = "synthetic"

    def __init__(self, model: str = "synthetic"):
        self.model = model
        self.symbols = (BLANK_LABEL,) + _SYNTHETIC_PHONES
        self.blank_index = 0

    def emission_logprobs(self, samples: np.ndarray) -> np.ndarray:
        n_frames = _frame_count(samples)
        rng = np.random.default_rng(_content_seed(samples, b"emissions"))
        logits = rng.normal(size=(n_frames, len(self.symbols))) * 2.0
        shifted = logits - logits.max(axis=1, keepdims=True)
        log_z = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
        return (shifted - log_z).astype(np.float32)

    def frame_features(self, samples: np.ndarray, layer: int) -> np.ndarray:
        n_frames = _frame_count(samples)
        salt = b"features:" + str(int(layer)).encode("ascii")
        rng = np.random.default_rng(_content_seed(samples, salt))
        feats = rng.normal(size=(n_frames, FEATURE_DIM))
        return feats.astype(np.float32)


class HuggingFaceBackend:
    """wav2vec2-style checkpoint loaded through transformers.

    torch and transformers are imported lazily so the package works
    without them as long as only the synthetic backend is used. Any
    failure to import or load is surfaced as ModelUnavailableError:
    from the caller's point of view the model simply is not usable in
    this environment.
    """

    name = "huggingface"

    def __init__(self, model: str = DEFAULT_MODEL):
        self.model = model
        try:
            import torch
            from transformers import (
                AutoFeatureExtractor,
                AutoModel,
                AutoModelForCTC,
                AutoTokenizer,
            )
        except Exception as exc:
            raise ModelUnavailableError(
                f"torch/transformers unavailable: {exc}"
            ) from exc
        self._torch = torch
        try:
            self._extractor = AutoFeatureExtractor.from_pretrained(model)
            self._encoder = AutoModel.from_pretrained(
                model, output_hidden_states=True
            )
            self._encoder.eval()
        except Exception as exc:
            raise ModelUnavailableError(
                f"cannot load model {model!r}: {exc}"
            ) from exc
        # CTC heads and their vocabularies only exist on fine-tuned
        # checkpoints; keep them optional so feature export still works.
        self._ctc = None
        self.symbols = ()
        self.blank_index = 0
        try:
            self._ctc = AutoModelForCTC.from_pretrained(model)
            self._ctc.eval()
            tokenizer = AutoTokenizer.from_pretrained(model)
            vocab = sorted(tokenizer.get_vocab().items(), key=lambda kv: kv[1])
            self.symbols = tuple(token for token, _ in vocab)
            self.blank_index = int(getattr(self._ctc.config, "pad_token_id", 0) or 0)
        except Exception:
            self._ctc = None

    def emission_logprobs(self, samples: np.ndarray) -> np.ndarray:
        if self._ctc is None:
            raise ModelUnavailableError(
                f"model {self.model!r} has no CTC head; emissions unavailable"
            )
        torch = self._torch
        _frame_count(samples)
        inputs = self._extractor(
            samples, sampling_rate=SAMPLE_RATE, return_tensors="pt"
        )
        with torch.no_grad():
            logits = self._ctc(inputs.input_values).logits[0]
            logprobs = torch.log_softmax(logits, dim=-1)
        return logprobs.cpu().numpy().astype(np.float32)

    def frame_features(self, samples: np.ndarray, layer: int) -> np.ndarray:
        torch = self._torch
        _frame_count(samples)
        inputs = self._extractor(
            samples, sampling_rate=SAMPLE_RATE, return_tensors="pt"
        )
        with torch.no_grad():
            out = self._encoder(inputs.input_values)
        hidden = out.hidden_states
        if layer >= len(hidden):
            raise ModelUnavailableError(
                f"model {self.model!r} has {len(hidden)} hidden layers; "
                f"layer {layer} does not exist"
            )
        return hidden[layer][0].cpu().numpy().astype(np.float32)


def get_backend(model: str):
    """Pick a backend from a model name.

    Names starting with "synthetic" select the deterministic local
    backend; anything else is treated as a Hugging Face checkpoint id.
    """
    if model.startswith("synthetic"):
        return SyntheticBackend(model)
    return HuggingFaceBackend(model)
