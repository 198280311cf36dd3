"""Bidirectional LSTM with multi-head attention pooling, from scratch.

The network is a stack of bidirectional LSTM layers (gate order i, f, g,
o; inter-layer dropout in training mode) followed by additive attention
pooling: each head scores every timestep with a learned query over a
tanh projection of the hidden state, a masked softmax turns scores into
weights over the valid steps, and the weighted sums from all heads feed
an affine classifier with softmax output.

Padded steps are gated out of the recurrences (hidden and cell states
are zeroed there), so a padded batch computes exactly what per-sequence
unpadded passes would; padded steps receive exactly zero attention.

Everything runs in numpy, double precision by default, with handwritten
reverse-mode gradients (see ``backward``); correctness is pinned by the
finite-difference checks in the test suite.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import NumericError, ValidationError


@dataclass(frozen=True)
class ClassifierConfig:
    input_dim: int = 1024
    num_layers: int = 6
    hidden: int = 512  # per direction
    dropout: float = 0.3
    heads: int = 8
    classes: int = 2

    def __post_init__(self):
        if min(self.input_dim, self.num_layers, self.hidden, self.heads, self.classes) < 1:
            raise ValidationError("all model dimensions must be positive")
        if not 0.0 <= self.dropout < 1.0:
            raise ValidationError(f"dropout {self.dropout} outside [0, 1)")
        if (2 * self.hidden) % self.heads != 0:
            raise ValidationError(
                f"2*hidden ({2 * self.hidden}) must be divisible by heads ({self.heads})"
            )

    @property
    def out_dim(self):
        return 2 * self.hidden

    @property
    def head_dim(self):
        return self.out_dim // self.heads


@dataclass
class DirectionWeights:
    W: np.ndarray  # input weights, (4H, in_dim)
    R: np.ndarray  # recurrent weights, (4H, H)
    b: np.ndarray  # bias, (4H,)


@dataclass
class LayerWeights:
    fw: DirectionWeights
    bw: DirectionWeights


@dataclass
class ModelParams:
    """All trainable tensors; also used as the gradient container."""

    layers: list
    attn_w: np.ndarray  # (heads, head_dim, out_dim)
    attn_q: np.ndarray  # (heads, head_dim)
    cls_w: np.ndarray  # (classes, heads * out_dim)
    cls_b: np.ndarray  # (classes,)

    def items(self):
        for l, layer in enumerate(self.layers):
            for dname in ("fw", "bw"):
                dw = getattr(layer, dname)
                yield f"lstm.{l}.{dname}.W", dw.W
                yield f"lstm.{l}.{dname}.R", dw.R
                yield f"lstm.{l}.{dname}.b", dw.b
        yield "attn.W", self.attn_w
        yield "attn.q", self.attn_q
        yield "cls.W", self.cls_w
        yield "cls.b", self.cls_b

    @classmethod
    def from_items(cls, tensors):
        layers = []
        l = 0
        while f"lstm.{l}.fw.W" in tensors:
            layers.append(
                LayerWeights(
                    fw=DirectionWeights(
                        tensors[f"lstm.{l}.fw.W"],
                        tensors[f"lstm.{l}.fw.R"],
                        tensors[f"lstm.{l}.fw.b"],
                    ),
                    bw=DirectionWeights(
                        tensors[f"lstm.{l}.bw.W"],
                        tensors[f"lstm.{l}.bw.R"],
                        tensors[f"lstm.{l}.bw.b"],
                    ),
                )
            )
            l += 1
        return cls(
            layers=layers,
            attn_w=tensors["attn.W"],
            attn_q=tensors["attn.q"],
            cls_w=tensors["cls.W"],
            cls_b=tensors["cls.b"],
        )

    def copy(self):
        return ModelParams.from_items({k: v.copy() for k, v in self.items()})

    def validate(self, config):
        for name, arr in self.items():
            if not np.all(np.isfinite(arr)):
                raise NumericError(f"parameter {name} contains non-finite values")
        if self.attn_w.shape != (config.heads, config.head_dim, config.out_dim):
            raise ValidationError("attention weight shape inconsistent with config")
        if self.cls_w.shape != (config.classes, config.heads * config.out_dim):
            raise ValidationError("classifier weight shape inconsistent with config")


def zeros_like_params(params):
    return ModelParams.from_items({k: np.zeros_like(v) for k, v in params.items()})


def init_params(config, seed=0, dtype=np.float64):
    """Uniform(-1/sqrt(hidden), +1/sqrt(hidden)) weights; forget-gate
    bias raised by +1."""
    rng = np.random.default_rng(seed)
    H = config.hidden
    bound = 1.0 / np.sqrt(H)

    def u(*shape):
        return rng.uniform(-bound, bound, size=shape).astype(dtype)

    layers = []
    for l in range(config.num_layers):
        in_dim = config.input_dim if l == 0 else config.out_dim
        dirs = {}
        for dname in ("fw", "bw"):
            b = u(4 * H)
            b[H : 2 * H] += 1.0
            dirs[dname] = DirectionWeights(W=u(4 * H, in_dim), R=u(4 * H, H), b=b)
        layers.append(LayerWeights(**dirs))
    return ModelParams(
        layers=layers,
        attn_w=u(config.heads, config.head_dim, config.out_dim),
        attn_q=u(config.heads, config.head_dim),
        cls_w=u(config.classes, config.heads * config.out_dim),
        cls_b=u(config.classes),
    )


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _run_direction(x, maskf, w, reverse):
    """One direction of one layer. Returns masked hidden states and the
    step caches needed for backprop, all indexed by absolute time."""
    B, T, _ = x.shape
    H = w.R.shape[1]
    order = range(T - 1, -1, -1) if reverse else range(T)
    h = np.zeros((B, H), dtype=x.dtype)
    c = np.zeros((B, H), dtype=x.dtype)
    out = np.zeros((B, T, H), dtype=x.dtype)
    cache = {
        key: np.zeros((B, T, H), dtype=x.dtype)
        for key in ("i", "f", "g", "o", "tct", "cprev", "hprev")
    }
    for t in order:
        m = maskf[:, t : t + 1]
        z = x[:, t] @ w.W.T + h @ w.R.T + w.b
        i = _sigmoid(z[:, :H])
        f = _sigmoid(z[:, H : 2 * H])
        g = np.tanh(z[:, 2 * H : 3 * H])
        o = _sigmoid(z[:, 3 * H :])
        ct = f * c + i * g
        tct = np.tanh(ct)
        cache["i"][:, t] = i
        cache["f"][:, t] = f
        cache["g"][:, t] = g
        cache["o"][:, t] = o
        cache["tct"][:, t] = tct
        cache["cprev"][:, t] = c
        cache["hprev"][:, t] = h
        h = m * (o * tct)
        c = m * ct
        out[:, t] = h
    return out, cache


def _backward_direction(x, maskf, w, cache, d_out, reverse):
    """Backprop through one direction; returns (dW, dR, db, dX)."""
    B, T, _ = x.shape
    H = w.R.shape[1]
    order = range(T - 1, -1, -1) if reverse else range(T)
    dW = np.zeros_like(w.W)
    dR = np.zeros_like(w.R)
    db = np.zeros_like(w.b)
    dX = np.zeros_like(x)
    dh_rec = np.zeros((B, H), dtype=x.dtype)
    dc_rec = np.zeros((B, H), dtype=x.dtype)
    for t in reversed(list(order)):
        m = maskf[:, t : t + 1]
        i = cache["i"][:, t]
        f = cache["f"][:, t]
        g = cache["g"][:, t]
        o = cache["o"][:, t]
        tct = cache["tct"][:, t]
        cprev = cache["cprev"][:, t]
        hprev = cache["hprev"][:, t]

        dht = m * (d_out[:, t] + dh_rec)
        dct = m * dc_rec + dht * o * (1.0 - tct * tct)
        dz = np.concatenate(
            [
                dct * g * i * (1.0 - i),
                dct * cprev * f * (1.0 - f),
                dct * i * (1.0 - g * g),
                dht * tct * o * (1.0 - o),
            ],
            axis=1,
        )
        dW += dz.T @ x[:, t]
        dR += dz.T @ hprev
        db += dz.sum(axis=0)
        dh_rec = dz @ w.R
        dc_rec = dct * f
        dX[:, t] = dz @ w.W
    return dW, dR, db, dX


def _dropout_masks(config, shape_btd, dropout_seed, dtype):
    """Inverted-dropout masks for every layer boundary, in a fixed draw
    order so a seed fully determines them."""
    rng = np.random.default_rng(dropout_seed)
    keep = 1.0 - config.dropout
    masks = []
    for _ in range(config.num_layers - 1):
        masks.append(
            (rng.random(shape_btd) < keep).astype(dtype) / keep
        )
    return masks


def _forward_full(features, mask, params, config, train_mode, dropout_seed):
    """Shared forward pass; returns (probs, attention B x heads x T, cache)."""
    x = np.asarray(features, dtype=params.cls_w.dtype)
    maskb = np.asarray(mask, dtype=bool)
    if x.ndim != 3 or x.shape[2] != config.input_dim:
        raise ValidationError(
            f"features must be B x T x {config.input_dim}, got {x.shape}"
        )
    if maskb.shape != x.shape[:2]:
        raise ValidationError("mask shape does not match features")
    if not maskb.any(axis=1).all():
        raise ValidationError("every sequence needs at least one valid step")
    maskf = maskb.astype(x.dtype)

    use_dropout = train_mode and config.dropout > 0.0 and config.num_layers > 1
    drop_masks = (
        _dropout_masks(config, (x.shape[0], x.shape[1], config.out_dim), dropout_seed, x.dtype)
        if use_dropout
        else None
    )

    cache = {"inputs": [], "dir_caches": [], "drop_masks": drop_masks, "maskf": maskf}
    for l, layer in enumerate(params.layers):
        cache["inputs"].append(x)
        h_fw, c_fw = _run_direction(x, maskf, layer.fw, reverse=False)
        h_bw, c_bw = _run_direction(x, maskf, layer.bw, reverse=True)
        cache["dir_caches"].append((c_fw, c_bw))
        y = np.concatenate([h_fw, h_bw], axis=2)
        if not np.all(np.isfinite(y)):
            raise NumericError(f"non-finite activations in LSTM layer {l}")
        if use_dropout and l < config.num_layers - 1:
            y = y * drop_masks[l]
        x = y

    # additive attention: per head, score each step, masked softmax, pool
    u = np.tanh(np.einsum("hdo,bto->bthd", params.attn_w, x))
    scores = np.einsum("bthd,hd->bth", u, params.attn_q)
    neg = np.finfo(x.dtype).min
    scores = np.where(maskb[:, :, None], scores, neg)
    smax = scores.max(axis=1, keepdims=True)
    expo = np.exp(scores - smax) * maskf[:, :, None]
    denom = expo.sum(axis=1, keepdims=True)
    alpha = expo / denom  # (B, T, heads), padded steps exactly 0
    if not np.all(np.isfinite(alpha)):
        raise NumericError("non-finite activations in attention")

    ctx = np.einsum("bth,bto->bho", alpha, x)
    B = x.shape[0]
    ctx_flat = ctx.reshape(B, -1)
    logits = ctx_flat @ params.cls_w.T + params.cls_b
    if not np.all(np.isfinite(logits)):
        raise NumericError("non-finite activations in classifier")
    lmax = logits.max(axis=1, keepdims=True)
    el = np.exp(logits - lmax)
    probs = el / el.sum(axis=1, keepdims=True)

    cache.update({"top": x, "u": u, "alpha": alpha, "ctx_flat": ctx_flat, "maskb": maskb})
    return probs, alpha.transpose(0, 2, 1), cache


def _backward_full(dlogits, params, config, cache):
    """Reverse-mode pass from classifier logits down to the first layer."""
    grads = zeros_like_params(params)
    x = cache["top"]
    alpha = cache["alpha"]
    u = cache["u"]

    grads.cls_w[:] = dlogits.T @ cache["ctx_flat"]
    grads.cls_b[:] = dlogits.sum(axis=0)
    B = x.shape[0]
    dctx = (dlogits @ params.cls_w).reshape(B, config.heads, config.out_dim)

    dalpha = np.einsum("bho,bto->bth", dctx, x)
    dy = np.einsum("bth,bho->bto", alpha, dctx)
    ds = alpha * (dalpha - (alpha * dalpha).sum(axis=1, keepdims=True))
    grads.attn_q[:] = np.einsum("bth,bthd->hd", ds, u)
    du = np.einsum("bth,hd->bthd", ds, params.attn_q)
    dzu = du * (1.0 - u * u)
    grads.attn_w[:] = np.einsum("bthd,bto->hdo", dzu, x)
    dy += np.einsum("bthd,hdo->bto", dzu, params.attn_w)

    maskf = cache["maskf"]
    H = config.hidden
    for l in range(config.num_layers - 1, -1, -1):
        if cache["drop_masks"] is not None and l < config.num_layers - 1:
            dy = dy * cache["drop_masks"][l]
        x_in = cache["inputs"][l]
        c_fw, c_bw = cache["dir_caches"][l]
        layer = params.layers[l]
        dW, dR, db, dx_fw = _backward_direction(
            x_in, maskf, layer.fw, c_fw, dy[:, :, :H], reverse=False
        )
        glayer = grads.layers[l]
        glayer.fw.W[:] = dW
        glayer.fw.R[:] = dR
        glayer.fw.b[:] = db
        dW, dR, db, dx_bw = _backward_direction(
            x_in, maskf, layer.bw, c_bw, dy[:, :, H:], reverse=True
        )
        glayer.bw.W[:] = dW
        glayer.bw.R[:] = dR
        glayer.bw.b[:] = db
        dy = dx_fw + dx_bw
    return grads


def forward(batch, params, config, train_mode=False, dropout_seed=None):
    """Class probabilities (B x classes) and attention (B x heads x Lmax)."""
    probs, attn, _ = _forward_full(
        batch.features, batch.mask, params, config, train_mode, dropout_seed
    )
    return probs, attn


def cross_entropy_loss(probs, labels):
    """Mean negative log-probability of the true class."""
    probs = np.asarray(probs)
    labels = np.asarray(labels, dtype=np.int64)
    if np.max(np.abs(probs.sum(axis=1) - 1.0)) > 1e-6:
        raise ValidationError("probability rows must sum to 1")
    p_true = probs[np.arange(len(labels)), labels]
    if np.any(p_true < 1e-12):
        warnings.warn("true-class probability clamped at 1e-12", stacklevel=2)
        p_true = np.maximum(p_true, 1e-12)
    return float(-np.mean(np.log(p_true)))


def loss_and_gradients(batch, params, config, labels=None, train_mode=False, dropout_seed=None):
    """Loss, probabilities, attention and exact gradients in one pass.

    Gradients are taken through the same dropout masks used by the
    forward computation, so a training step descends the loss it
    actually measured.
    """
    y = np.asarray(batch.labels if labels is None else labels, dtype=np.int64)
    probs, attn, cache = _forward_full(
        batch.features, batch.mask, params, config, train_mode, dropout_seed
    )
    loss = cross_entropy_loss(probs, y)
    onehot = np.zeros_like(probs)
    onehot[np.arange(len(y)), y] = 1.0
    dlogits = (probs - onehot) / len(y)
    grads = _backward_full(dlogits, params, config, cache)
    return loss, probs, attn, grads


def backward(batch, params, config, labels=None):
    """Exact gradients of cross_entropy_loss(forward(...)) with dropout
    disabled; padded positions contribute nothing."""
    _, _, _, grads = loss_and_gradients(
        batch, params, config, labels=labels, train_mode=False
    )
    return grads
