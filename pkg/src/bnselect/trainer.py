"""Training-tuple sampling, configuration presets, and the training loop.

The five shipped presets (full-scale iteration counts, 1,024-video
batches):

|  id  | indices | refs | loss          | iterations |
|------|---------|------|---------------|------------|
| BN0  | yes     | 3    | relative      | 3,125      |
| NIFI | no      | 3    | relative      | 2,500      |
| NRF  | yes     | 0    | relative      | 3,125      |
| LSP  | yes     | 3    | single        | 1,875      |
| LF   | yes     | 3    | middle-biased | 8,125      |

LF additionally exempts the normalized-position inputs from dropout so the
position-based part of its target stays learnable. ``desk_scale`` shrinks
any spec to laptop-sized runs (batch 64, 2,000 iterations).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np

from .ingest import VideoUnit
from .losses import TrainingPair, prediction_target
from .net import (
    LOSS_MIDDLE,
    LOSS_RELATIVE,
    LOSS_SINGLE,
    AdamState,
    FrameSample,
    ModelConfig,
    ModelWeights,
    TargetedSample,
    TrainingError,
    init_weights,
    loss_and_grad,
    adam_step,
    normalized_index,
)

PRESET_IDS = ("BN0", "NIFI", "NRF", "LSP", "LF")

_PRESET_ITERATIONS = {"BN0": 3125, "NIFI": 2500, "NRF": 3125, "LSP": 1875, "LF": 8125}
FULL_BATCH_VIDEOS = 1024
DESK_ITERATIONS = 2000
DESK_BATCH_VIDEOS = 64


@dataclass(frozen=True)
class TrainSpec:
    preset: str
    iterations: int
    batch_videos: int
    lr: float = 1e-3
    l1_coeff: float = 2e-6
    seed: int = 0

    def __post_init__(self):
        if self.preset not in PRESET_IDS:
            raise ValueError(f"unknown preset {self.preset!r}")
        if self.iterations <= 0:
            raise ValueError("iterations must be > 0")
        if self.batch_videos <= 0:
            raise ValueError("batch_videos must be > 0")


def preset(
    preset_id: str,
    feature_dim: int,
    hidden_widths: tuple[int, int, int, int] = (512, 256, 128, 64),
    seed: int = 0,
) -> tuple[ModelConfig, TrainSpec]:
    """Model configuration and full-scale training spec for a preset id."""
    if preset_id not in PRESET_IDS:
        raise ValueError(f"unknown preset {preset_id!r}; choose from {PRESET_IDS}")
    cfg = ModelConfig(
        feature_dim=feature_dim,
        num_refs=0 if preset_id == "NRF" else 3,
        use_indices=preset_id != "NIFI",
        hidden_widths=hidden_widths,
        loss_kind={
            "LSP": LOSS_SINGLE,
            "LF": LOSS_MIDDLE,
        }.get(preset_id, LOSS_RELATIVE),
        drop_index_inputs=preset_id != "LF",
    )
    spec = TrainSpec(
        preset=preset_id,
        iterations=_PRESET_ITERATIONS[preset_id],
        batch_videos=FULL_BATCH_VIDEOS,
        seed=seed,
    )
    return cfg, spec


def desk_scale(spec: TrainSpec) -> TrainSpec:
    return replace(spec, iterations=DESK_ITERATIONS, batch_videos=DESK_BATCH_VIDEOS)


def sample_batch(
    units: list[VideoUnit],
    rng: np.random.Generator,
    batch_videos: int,
    cfg: ModelConfig,
) -> list[TrainingPair]:
    """Draw one training batch.

    Units are sampled uniformly with replacement; within a unit, 2 +
    num_refs distinct frame positions are drawn without replacement, the
    first two as comparison frames and the rest as references. Units too
    short to supply that many frames are skipped (with a warning) and
    redrawn.
    """
    min_frames = 2 + cfg.num_refs
    if not any(u.features.n_frames >= min_frames for u in units):
        raise ValueError(f"no unit has the {min_frames} frames a batch needs")
    warned: set[str] = set()
    batch = []
    while len(batch) < batch_videos:
        unit = units[int(rng.integers(len(units)))]
        n = unit.features.n_frames
        if n < min_frames:
            if unit.video_id not in warned:
                warnings.warn(
                    f"skipping {unit.video_id}: {n} frames < {min_frames} needed"
                )
                warned.add(unit.video_id)
            continue
        positions = rng.choice(n, size=min_frames, replace=False)
        samples = [
            FrameSample(unit.features.frame(int(p)), normalized_index(int(p), n))
            for p in positions
        ]
        batch.append(
            TrainingPair(
                xi=samples[0],
                xj=samples[1],
                refs=tuple(samples[2:]),
                yi=float(unit.labels[positions[0]]),
                yj=float(unit.labels[positions[1]]),
            )
        )
    return batch


def _to_targeted(pair: TrainingPair, cfg: ModelConfig) -> TargetedSample:
    target = prediction_target(pair, cfg.loss_kind, cfg.middle_weight, cfg.middle_index)
    xj = None if cfg.loss_kind == LOSS_SINGLE else pair.xj
    return TargetedSample(pair.xi, xj, pair.refs, target)


@dataclass(frozen=True)
class TrainResult:
    config: ModelConfig
    weights: ModelWeights
    losses: list


def train(units: list[VideoUnit], cfg: ModelConfig, spec: TrainSpec) -> TrainResult:
    """Adam training loop over sampled batches; fully seed-deterministic.

    A single generator drives sampling, init, and dropout, so two runs with
    the same seed produce identical weights. Raises on a non-finite loss.
    """
    for unit in units:
        if unit.features.dim != cfg.feature_dim:
            raise ValueError(
                f"{unit.video_id}: feature dim {unit.features.dim} != "
                f"config dim {cfg.feature_dim}"
            )
    rng = np.random.default_rng(spec.seed)
    weights = init_weights(cfg, rng)
    params = weights.to_vector()
    state = AdamState.zeros(params.size)
    losses = []
    for iteration in range(spec.iterations):
        pairs = sample_batch(units, rng, spec.batch_videos, cfg)
        batch = [_to_targeted(p, cfg) for p in pairs]
        loss, grad = loss_and_grad(
            weights, cfg, batch, l1=spec.l1_coeff, dropout_rng=rng
        )
        if not np.isfinite(loss):
            raise TrainingError(f"non-finite loss at iteration {iteration}")
        params, state = adam_step(state, params, grad, spec.lr)
        weights = ModelWeights.from_vector(cfg, params)
        losses.append(loss)
    return TrainResult(cfg, weights, losses)
