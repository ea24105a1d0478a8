"""Relative-performance prediction head.

A small dense network scores video frames: the input is the concatenated
feature vectors of the frames under comparison plus reference frames, with
their normalized positions optionally appended. Four hidden layers with
Leaky ReLU feed one linear output neuron. Every hidden layer re-appends the
normalized-position sub-vector to its input; hidden layers after the first
apply inverted dropout to their inputs during training.

The module is self-contained: forward pass, exact gradients for the batch
objective  mean |target - f|  plus an L1 penalty on weights, and Adam.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

LOSS_RELATIVE = "relative"
LOSS_SINGLE = "single"
LOSS_MIDDLE = "middle-biased"
LOSS_KINDS = (LOSS_RELATIVE, LOSS_SINGLE, LOSS_MIDDLE)

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


class TrainingError(RuntimeError):
    """Non-finite loss or gradient encountered while training."""


def normalized_index(position: int, n: int) -> float:
    """Map a 0-based frame position to its normalized index in (0, 1].

    The last frame of any video maps to exactly 1.0, frame 0 to 1/n.
    """
    if n < 1:
        raise ValueError(f"video length must be >= 1, got {n}")
    if not 0 <= position < n:
        raise ValueError(f"position {position} out of range for {n} frames")
    return (position + 1) / n


@dataclass(frozen=True)
class ModelConfig:
    """Architecture and loss configuration.

    ``hidden_widths`` must hold four non-increasing positive widths.
    ``middle_weight`` and ``middle_index`` only matter for the
    middle-biased loss; ``drop_index_inputs=False`` exempts the
    normalized-position inputs from dropout.
    """

    feature_dim: int
    num_refs: int = 3
    use_indices: bool = True
    hidden_widths: tuple[int, int, int, int] = (512, 256, 128, 64)
    leaky_slope: float = 0.01
    dropout_rate: float = 0.2
    drop_index_inputs: bool = True
    loss_kind: str = LOSS_RELATIVE
    middle_weight: float = 0.5
    middle_index: float = 0.5

    def __post_init__(self):
        if self.feature_dim < 1:
            raise ValueError("feature_dim must be >= 1")
        if self.num_refs < 0:
            raise ValueError("num_refs must be >= 0")
        widths = tuple(int(w) for w in self.hidden_widths)
        if len(widths) != 4 or any(w < 1 for w in widths):
            raise ValueError("hidden_widths must be four positive counts")
        if any(a < b for a, b in zip(widths, widths[1:])):
            raise ValueError("hidden_widths must be non-increasing")
        object.__setattr__(self, "hidden_widths", widths)
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must be in [0, 1)")
        if self.loss_kind not in LOSS_KINDS:
            raise ValueError(f"unknown loss_kind {self.loss_kind!r}")
        if self.middle_weight < 0:
            raise ValueError("middle_weight must be >= 0")
        if not 0.0 <= self.middle_index <= 1.0:
            raise ValueError("middle_index must be in [0, 1]")

    @property
    def n_input_frames(self) -> int:
        """Frames consumed per prediction: comparison frame(s) plus references."""
        comparison = 1 if self.loss_kind == LOSS_SINGLE else 2
        return comparison + self.num_refs

    @property
    def n_index_inputs(self) -> int:
        return self.n_input_frames if self.use_indices else 0

    def layer_dims(self) -> list[tuple[int, int]]:
        """(fan_in, fan_out) for each dense layer, hidden first, output last.

        Hidden layers after the first take the previous activation with the
        normalized-position sub-vector re-appended; the output neuron takes
        the last hidden activation alone.
        """
        n_idx = self.n_index_inputs
        dims = []
        fan_in = self.n_input_frames * self.feature_dim + n_idx
        for width in self.hidden_widths:
            dims.append((fan_in, width))
            fan_in = width + n_idx
        dims.append((self.hidden_widths[-1], 1))
        return dims

    def weight_count(self) -> int:
        return sum(fi * fo + fo for fi, fo in self.layer_dims())


@dataclass(frozen=True)
class FrameSample:
    """One frame as the network sees it: feature vector plus normalized index."""

    features: np.ndarray
    index: float

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=np.float64)
        if feats.ndim != 1:
            raise ValueError("frame features must be a 1-D vector")
        object.__setattr__(self, "features", feats)
        if not 0.0 < self.index <= 1.0:
            raise ValueError(f"normalized index must be in (0, 1], got {self.index}")


ReferenceSet = tuple  # k FrameSamples from the same video, distinct positions


@dataclass
class ModelWeights:
    """Per-layer weight matrices (fan_in, fan_out) and bias vectors."""

    layers: list[tuple[np.ndarray, np.ndarray]]

    def to_vector(self) -> np.ndarray:
        """Flatten in canonical order: per layer weights then bias, first
        hidden layer through the output neuron."""
        parts = []
        for w, b in self.layers:
            parts.append(w.ravel())
            parts.append(b.ravel())
        return np.concatenate(parts)

    @classmethod
    def from_vector(cls, cfg: ModelConfig, vec: np.ndarray) -> "ModelWeights":
        vec = np.asarray(vec, dtype=np.float64)
        expected = cfg.weight_count()
        if vec.shape != (expected,):
            raise ValueError(
                f"weight vector has {vec.size} entries, config implies {expected}"
            )
        layers = []
        pos = 0
        for fan_in, fan_out in cfg.layer_dims():
            w = vec[pos : pos + fan_in * fan_out].reshape(fan_in, fan_out)
            pos += fan_in * fan_out
            b = vec[pos : pos + fan_out]
            pos += fan_out
            layers.append((w.copy(), b.copy()))
        return cls(layers)

    @classmethod
    def zeros(cls, cfg: ModelConfig) -> "ModelWeights":
        return cls([
            (np.zeros((fi, fo)), np.zeros(fo)) for fi, fo in cfg.layer_dims()
        ])

    def check_shapes(self, cfg: ModelConfig) -> None:
        dims = cfg.layer_dims()
        if len(self.layers) != len(dims):
            raise ValueError("layer count does not match config")
        for (w, b), (fi, fo) in zip(self.layers, dims):
            if w.shape != (fi, fo) or b.shape != (fo,):
                raise ValueError(
                    f"layer shape {w.shape}/{b.shape} does not match config {(fi, fo)}"
                )


def init_weights(cfg: ModelConfig, rng: np.random.Generator) -> ModelWeights:
    """Seed-deterministic init: uniform in +-sqrt(6/(fan_in+fan_out)), zero biases."""
    layers = []
    for fan_in, fan_out in cfg.layer_dims():
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        w = rng.uniform(-bound, bound, size=(fan_in, fan_out))
        layers.append((w, np.zeros(fan_out)))
    return ModelWeights(layers)


# ---------------------------------------------------------------------------
# forward / backward


def _assemble_batch(cfg, samples):
    """Stack samples into a feature block (N, frames*D) and index block (N, n_idx).

    Each sample is (xi, xj_or_None, refs); presence of xj and the reference
    count must match the config.
    """
    needs_xj = cfg.loss_kind != LOSS_SINGLE
    feats = np.empty((len(samples), cfg.n_input_frames * cfg.feature_dim))
    idx = np.empty((len(samples), cfg.n_input_frames)) if cfg.use_indices else None
    for row, (xi, xj, refs) in enumerate(samples):
        if needs_xj and xj is None:
            raise ValueError(f"loss kind {cfg.loss_kind!r} requires a second frame")
        if not needs_xj and xj is not None:
            raise ValueError("single-frame prediction takes no second frame")
        if len(refs) != cfg.num_refs:
            raise ValueError(
                f"expected {cfg.num_refs} reference frames, got {len(refs)}"
            )
        frames = [xi] + ([xj] if needs_xj else []) + list(refs)
        for f in frames:
            if f.features.shape != (cfg.feature_dim,):
                raise ValueError(
                    f"feature vector has dim {f.features.shape}, config wants "
                    f"{cfg.feature_dim}"
                )
        feats[row] = np.concatenate([f.features for f in frames])
        if idx is not None:
            idx[row] = [f.index for f in frames]
    return feats, idx


def sample_dropout_masks(
    cfg: ModelConfig, n_samples: int, rng: np.random.Generator
) -> list[np.ndarray] | None:
    """Draw inverted-dropout masks for the hidden layers after the first.

    Mask entries are 0 or 1/keep so inference needs no rescaling. When the
    config exempts index inputs, their mask entries are fixed at 1.
    """
    if cfg.dropout_rate == 0.0:
        return None
    keep = 1.0 - cfg.dropout_rate
    dims = cfg.layer_dims()
    n_idx = cfg.n_index_inputs
    masks = []
    for layer in range(1, len(cfg.hidden_widths)):
        fan_in = dims[layer][0]
        m = (rng.random((n_samples, fan_in)) < keep) / keep
        if n_idx and not cfg.drop_index_inputs:
            m[:, fan_in - n_idx :] = 1.0
        masks.append(m)
    return masks


def _forward_batch(weights, cfg, feats, idx, masks=None):
    """Run the network on stacked inputs; returns (outputs (N,), cache).

    The cache holds each layer's post-dropout input and pre-activation for
    the exactly matching backward pass.
    """
    n_hidden = len(cfg.hidden_widths)
    act = np.concatenate([feats, idx], axis=1) if idx is not None else feats
    inputs, preacts = [], []
    for layer in range(n_hidden):
        raw = act if layer == 0 else (
            np.concatenate([act, idx], axis=1) if idx is not None else act
        )
        if masks is not None and layer >= 1:
            raw = raw * masks[layer - 1]
        w, b = weights.layers[layer]
        z = raw @ w + b
        inputs.append(raw)
        preacts.append(z)
        act = np.where(z > 0, z, cfg.leaky_slope * z)
    w_out, b_out = weights.layers[-1]
    out = act @ w_out + b_out
    inputs.append(act)
    return out[:, 0], (inputs, preacts, masks)


def _backward_batch(weights, cfg, cache, d_out):
    """Gradients of sum(d_out * f) w.r.t. every weight and bias."""
    inputs, preacts, masks = cache
    n_hidden = len(cfg.hidden_widths)
    n_idx = cfg.n_index_inputs
    grads = [None] * len(weights.layers)

    w_out, _ = weights.layers[-1]
    delta = d_out[:, None]
    grads[-1] = (inputs[-1].T @ delta, delta.sum(axis=0))
    d_act = delta @ w_out.T

    for layer in range(n_hidden - 1, -1, -1):
        z = preacts[layer]
        dz = d_act * np.where(z > 0, 1.0, cfg.leaky_slope)
        w, _ = weights.layers[layer]
        grads[layer] = (inputs[layer].T @ dz, dz.sum(axis=0))
        if layer == 0:
            break
        d_raw = dz @ w.T
        if masks is not None:
            d_raw = d_raw * masks[layer - 1]
        # the re-appended index sub-vector is a constant input: strip it
        d_act = d_raw[:, :-n_idx] if n_idx else d_raw
    return grads


def forward(
    weights: ModelWeights,
    cfg: ModelConfig,
    xi: FrameSample,
    xj: FrameSample | None = None,
    refs: Sequence[FrameSample] = (),
    *,
    dropout_rng: np.random.Generator | None = None,
) -> float:
    """Predict relative (or single-frame) performance for one input tuple.

    With ``dropout_rng`` omitted the pass is deterministic; passing a
    generator enables training-time input dropout.
    """
    weights.check_shapes(cfg)
    feats, idx = _assemble_batch(cfg, [(xi, xj, tuple(refs))])
    masks = (
        sample_dropout_masks(cfg, 1, dropout_rng) if dropout_rng is not None else None
    )
    out, _ = _forward_batch(weights, cfg, feats, idx, masks)
    return float(out[0])


def predict_batch(weights, cfg, samples) -> np.ndarray:
    """Deterministic (no-dropout) forward pass over many input tuples."""
    feats, idx = _assemble_batch(cfg, samples)
    out, _ = _forward_batch(weights, cfg, feats, idx)
    return out


@dataclass(frozen=True)
class TargetedSample:
    """One training example: input tuple plus the value f should output."""

    xi: FrameSample
    xj: FrameSample | None
    refs: tuple
    target: float


def loss_and_grad(
    weights: ModelWeights,
    cfg: ModelConfig,
    batch: Sequence[TargetedSample],
    *,
    l1: float = 0.0,
    dropout_rng: np.random.Generator | None = None,
    dropout_masks: list[np.ndarray] | None = None,
) -> tuple[float, np.ndarray]:
    """Mean absolute-error loss over the batch plus L1 penalty, with its
    exact gradient as a flat vector (canonical layer order).

    Dropout: pass ``dropout_rng`` to draw fresh masks, or ``dropout_masks``
    to pin them (gradient checking). The absolute loss and L1 penalty use
    subgradient 0 at their kinks.
    """
    if not batch:
        raise ValueError("empty batch")
    weights.check_shapes(cfg)
    feats, idx = _assemble_batch(cfg, [(s.xi, s.xj, s.refs) for s in batch])
    if dropout_masks is None and dropout_rng is not None:
        dropout_masks = sample_dropout_masks(cfg, len(batch), dropout_rng)
    targets = np.array([s.target for s in batch], dtype=np.float64)

    out, cache = _forward_batch(weights, cfg, feats, idx, dropout_masks)
    residual = targets - out
    loss = float(np.mean(np.abs(residual)))

    d_out = -np.sign(residual) / len(batch)
    grads = _backward_batch(weights, cfg, cache, d_out)

    if l1 > 0.0:
        loss += l1 * sum(float(np.abs(w).sum()) for w, _ in weights.layers)

    parts = []
    for layer, ((gw, gb), (w, _)) in enumerate(zip(grads, weights.layers)):
        if l1 > 0.0:
            gw = gw + l1 * np.sign(w)
        if not (np.all(np.isfinite(gw)) and np.all(np.isfinite(gb))):
            raise TrainingError(f"non-finite gradient in layer {layer + 1}")
        parts.append(gw.ravel())
        parts.append(gb.ravel())
    return loss, np.concatenate(parts)


def backward(weights, cfg, batch, *, l1=0.0, dropout_rng=None, dropout_masks=None):
    """Gradient vector of the batch objective; see ``loss_and_grad``."""
    return loss_and_grad(
        weights, cfg, batch, l1=l1, dropout_rng=dropout_rng, dropout_masks=dropout_masks
    )[1]


def batch_loss(weights, cfg, batch, *, l1=0.0, dropout_masks=None) -> float:
    """Objective value alone, for finite-difference checks."""
    feats, idx = _assemble_batch(cfg, [(s.xi, s.xj, s.refs) for s in batch])
    targets = np.array([s.target for s in batch], dtype=np.float64)
    out, _ = _forward_batch(weights, cfg, feats, idx, dropout_masks)
    loss = float(np.mean(np.abs(targets - out)))
    if l1 > 0.0:
        loss += l1 * sum(float(np.abs(w).sum()) for w, _ in weights.layers)
    return loss


# ---------------------------------------------------------------------------
# Adam


@dataclass
class AdamState:
    """First/second moment estimates and the step counter."""

    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros(cls, n_params: int) -> "AdamState":
        return cls(np.zeros(n_params), np.zeros(n_params), 0)


def adam_step(
    state: AdamState,
    params: np.ndarray,
    grad: np.ndarray,
    lr: float,
    beta1: float = ADAM_BETA1,
    beta2: float = ADAM_BETA2,
    eps: float = ADAM_EPS,
) -> tuple[np.ndarray, AdamState]:
    """One bias-corrected Adam update; returns new params and state."""
    if params.shape != grad.shape or params.shape != state.m.shape:
        raise ValueError("parameter, gradient, and state sizes disagree")
    t = state.t + 1
    m = beta1 * state.m + (1 - beta1) * grad
    v = beta2 * state.v + (1 - beta2) * grad * grad
    m_hat = m / (1 - beta1**t)
    v_hat = v / (1 - beta2**t)
    new_params = params - lr * m_hat / (np.sqrt(v_hat) + eps)
    return new_params, AdamState(m, v, t)
