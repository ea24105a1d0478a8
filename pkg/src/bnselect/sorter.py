"""Stochastic batched bubble sorting over video frames.

Each sweep walks the working order front to back, compares adjacent frames
with a (possibly stochastic) comparator, and swaps whenever the comparator
says the earlier frame performs better, so stronger frames migrate toward
the end of the list. After the configured number of sweeps the frame at the
end of the order is the selection.

The model comparator batches one prediction over several independently
drawn reference sets and sums the outputs, which damps the draw-to-draw
variability of a single prediction. Sweeps always cover the whole list:
with a noisy comparator, revisiting earlier comparisons is what makes the
sort converge, so no sorted suffix is assumed.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .ingest import VideoFeatures
from .net import (
    LOSS_SINGLE,
    ModelConfig,
    ModelWeights,
    _forward_batch,
)

Comparator = Callable[[int, int, np.random.Generator], float]


@dataclass(frozen=True)
class SortConfig:
    """batch_size is the number of reference-set draws summed per
    comparison; passes defaults to one sweep per frame."""

    batch_size: int = 5
    passes: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.passes is not None and self.passes < 1:
            raise ValueError("passes must be >= 1")


@dataclass(frozen=True)
class ComparisonRecord:
    sweep: int
    position: int
    frame_a: int
    frame_b: int
    summed_f: float
    swapped: bool


@dataclass(frozen=True)
class SortTrace:
    comparisons: tuple
    ranking: tuple


@dataclass(frozen=True)
class SelectionResult:
    selected_frame: int
    ranking: tuple
    trace: SortTrace


def _draw_reference_positions(n, exclude, k, batch_size, rng):
    """batch_size independent draws of k distinct positions, excluding the
    two comparison frames."""
    candidates = np.array([p for p in range(n) if p not in exclude])
    pool = np.tile(candidates, (batch_size, 1))
    return rng.permuted(pool, axis=1)[:, :k]


def compare(
    weights: ModelWeights,
    cfg: ModelConfig,
    feats: VideoFeatures,
    frame_a: int,
    frame_b: int,
    rng: np.random.Generator,
    batch_size: int,
) -> float:
    """Summed predicted relative performance of frame_a over frame_b.

    Draws ``batch_size`` reference sets (excluding the two frames under
    comparison) and sums the predictions. The single-frame model needs two
    passes per comparison: the result is the summed difference of its
    per-frame scores under shared reference sets.
    """
    n = feats.n_frames
    if frame_a == frame_b:
        raise ValueError("comparison frames must be distinct")
    for f in (frame_a, frame_b):
        if not 0 <= f < n:
            raise ValueError(f"frame {f} out of range for {n}-frame video")
    k = cfg.num_refs
    if k > 0 and n < 2 + k:
        raise ValueError(
            f"video has {n} frames; need at least {2 + k} for {k} reference frames"
        )
    if feats.dim != cfg.feature_dim:
        raise ValueError(
            f"feature dim {feats.dim} does not match config dim {cfg.feature_dim}"
        )
    data = feats.data.astype(np.float64, copy=False)
    norm_idx = (np.arange(n) + 1.0) / n
    dim = cfg.feature_dim
    refs = (
        _draw_reference_positions(n, (frame_a, frame_b), k, batch_size, rng)
        if k
        else np.empty((batch_size, 0), dtype=int)
    )
    ref_feats = data[refs].reshape(batch_size, k * dim)
    ref_idx = norm_idx[refs]

    def stack(first_frames):
        head_feats = data[first_frames].reshape(-1)
        x = np.concatenate([np.tile(head_feats, (batch_size, 1)), ref_feats], axis=1)
        idx = None
        if cfg.use_indices:
            head_idx = np.tile(norm_idx[first_frames], (batch_size, 1))
            idx = np.concatenate([head_idx, ref_idx], axis=1)
        return x, idx

    if cfg.loss_kind == LOSS_SINGLE:
        out_a, _ = _forward_batch(weights, cfg, *stack([frame_a]))
        out_b, _ = _forward_batch(weights, cfg, *stack([frame_b]))
        return float(np.sum(out_a - out_b))
    out, _ = _forward_batch(weights, cfg, *stack([frame_a, frame_b]))
    return float(np.sum(out))


def bubble_select(
    comparator: Comparator,
    n: int,
    cfg: SortConfig,
    rng: np.random.Generator | None = None,
) -> SelectionResult:
    """Run the sort with an arbitrary comparator over frames 0..n-1.

    The comparator receives (frame_a, frame_b, rng) and returns a summed
    relative-performance score; positive means frame_a is predicted better
    and triggers the swap. Exact zero never swaps, so an uninformative
    comparator degenerates to selecting the last frame.
    """
    if n < 2:
        raise ValueError("need at least 2 frames to sort")
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    passes = cfg.passes if cfg.passes is not None else n
    order = list(range(n))
    records = []
    for sweep in range(passes):
        for pos in range(n - 1):
            a, b = order[pos], order[pos + 1]
            summed_f = float(comparator(a, b, rng))
            swapped = summed_f > 0
            if swapped:
                order[pos], order[pos + 1] = b, a
            records.append(ComparisonRecord(sweep, pos, a, b, summed_f, swapped))
    ranking = tuple(order)
    trace = SortTrace(tuple(records), ranking)
    return SelectionResult(ranking[-1], ranking, trace)


def model_comparator(
    weights: ModelWeights, cfg: ModelConfig, feats: VideoFeatures, batch_size: int
) -> Comparator:
    return lambda a, b, rng: compare(weights, cfg, feats, a, b, rng, batch_size)


def select_frame(
    weights: ModelWeights,
    cfg: ModelConfig,
    feats: VideoFeatures,
    sort_cfg: SortConfig,
    rng: np.random.Generator | None = None,
) -> SelectionResult:
    """Sort a video with the trained comparator and pick the top frame."""
    comparator = model_comparator(weights, cfg, feats, sort_cfg.batch_size)
    return bubble_select(comparator, feats.n_frames, sort_cfg, rng)


def write_trace(path, trace: SortTrace) -> None:
    with open(Path(path), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["pass", "position", "frame_a", "frame_b", "summed_f", "swapped"])
        for rec in trace.comparisons:
            writer.writerow(
                [
                    rec.sweep,
                    rec.position,
                    rec.frame_a,
                    rec.frame_b,
                    repr(rec.summed_f),
                    int(rec.swapped),
                ]
            )
