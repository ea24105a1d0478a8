"""Dataset-wide benchmarking, summary statistics, ablations, and synthetic
dataset generation for desk-scale verification.

A benchmark walks every (video, object) unit, selects a frame with the
chosen strategy, and records that frame's label: the video-wide mean
quality an annotation on it would yield. Statistics are computed per unit,
so a two-object video counts twice. Raw per-object scores are persisted
next to the summary so every reported number can be recomputed.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .ingest import (
    LabelTable,
    ManifestRecord,
    VideoUnit,
    save_features,
    save_manifest,
)
from .net import ModelConfig, ModelWeights
from .sorter import SortConfig, select_frame
from .strategies import STRATEGIES, select

LABEL_MODELS = ("linear", "peaked", "noisy-linear")


@dataclass(frozen=True)
class ObjectScore:
    video_id: str
    object_id: str
    frame: int
    score: float


@dataclass(frozen=True)
class StrategyReport:
    strategy: str
    scores: tuple
    mean: float
    median: float
    min: float
    max: float
    cov: float | None


def cov(scores) -> float:
    """Coefficient of variation: population standard deviation over mean."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.size == 0:
        raise ValueError("no scores")
    mean = float(scores.mean())
    if mean <= 0:
        raise ValueError(f"coefficient of variation undefined for mean {mean}")
    return float(scores.std(ddof=0)) / mean


def summarize(strategy: str, scores) -> StrategyReport:
    values = np.array([s.score for s in scores], dtype=np.float64)
    if values.size == 0:
        raise ValueError("cannot summarize an empty score list")
    mean = float(values.mean())
    return StrategyReport(
        strategy=strategy,
        scores=tuple(scores),
        mean=mean,
        median=float(np.median(values)),
        min=float(values.min()),
        max=float(values.max()),
        cov=cov(values) if mean > 0 else None,
    )


def benchmark(
    units: list[VideoUnit],
    strategy: str,
    model: tuple[ModelConfig, ModelWeights] | None = None,
    sort_cfg: SortConfig | None = None,
    seed: int | None = None,
) -> StrategyReport:
    """Score a selection strategy over every (video, object) unit."""
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}")
    if not units:
        raise ValueError("no units to benchmark")
    rng = np.random.default_rng(seed)
    sort_rng = None
    if strategy == "bn":
        if model is None:
            raise ValueError("strategy 'bn' needs a trained model")
        sort_cfg = sort_cfg or SortConfig()
        sort_rng = np.random.default_rng(sort_cfg.seed)
    scores = []
    for unit in units:
        n = unit.features.n_frames
        if strategy == "bn":
            cfg, weights = model
            frame = select_frame(
                weights, cfg, unit.features, sort_cfg, sort_rng
            ).selected_frame
        else:
            frame = select(strategy, n, labels=unit.labels, rng=rng)
        scores.append(
            ObjectScore(unit.video_id, unit.object_id, frame, float(unit.labels[frame]))
        )
    return summarize(strategy, scores)


@dataclass(frozen=True)
class AblationRow:
    batch_size: int
    mean_score: float
    mean_sort_time: float


def ablate_batch(
    units: list[VideoUnit],
    model: tuple[ModelConfig, ModelWeights],
    batch_sizes,
    sort_cfg: SortConfig | None = None,
) -> list[AblationRow]:
    """Benchmark the learned strategy at several comparison batch sizes.

    Sort time is wall clock around the sort alone, averaged per unit; file
    IO happens before benchmarking and is excluded.
    """
    sort_cfg = sort_cfg or SortConfig()
    cfg, weights = model
    rows = []
    for b in batch_sizes:
        run_cfg = SortConfig(batch_size=b, passes=sort_cfg.passes, seed=sort_cfg.seed)
        sort_rng = np.random.default_rng(run_cfg.seed)
        scores, elapsed = [], 0.0
        for unit in units:
            start = time.perf_counter()
            result = select_frame(weights, cfg, unit.features, run_cfg, sort_rng)
            elapsed += time.perf_counter() - start
            scores.append(float(unit.labels[result.selected_frame]))
        rows.append(AblationRow(b, float(np.mean(scores)), elapsed / len(units)))
    return rows


# ---------------------------------------------------------------------------
# synthetic datasets


@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for a self-contained synthetic dataset on disk."""

    m: int
    n_range: tuple[int, int]
    dim: int
    label_model: str = "linear"
    noise: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("need at least one video")
        lo, hi = self.n_range
        if not (5 <= lo <= hi <= 200):
            raise ValueError("n_range must lie within [5, 200]")
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if self.label_model not in LABEL_MODELS:
            raise ValueError(f"label_model must be one of {LABEL_MODELS}")
        if self.noise < 0:
            raise ValueError("noise must be >= 0")


def make_synthetic(spec: SyntheticSpec, out_dir) -> tuple[Path, Path]:
    """Generate feature files, labels, and a manifest under out_dir.

    Features drift smoothly frame to frame. Label models:

    * linear: labels are one fixed affine map of a hidden linear
                     functional of the features, so the best frame is
                     always the argmax of that functional.
    * noisy-linear: same, plus Gaussian noise (space left above zero so
                     clipping is rare).
    * peaked: unimodal in the frame position with a random peak.

    Returns (manifest_path, labels_path); output is byte-identical for a
    fixed spec.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(spec.seed)
    lo, hi = spec.n_range

    videos = []
    for v in range(spec.m):
        n = int(rng.integers(lo, hi + 1))
        steps = rng.normal(0.0, 0.15, size=(n, spec.dim))
        steps[0] = rng.normal(0.0, 1.0, size=spec.dim)
        # labels are derived from the float32 values that reach disk
        feats = np.cumsum(steps, axis=0).astype(np.float32).astype(np.float64)
        videos.append((f"video_{v:03d}", feats))

    hidden_w = rng.normal(0.0, 1.0, size=spec.dim) / np.sqrt(spec.dim)
    raw = {vid: feats @ hidden_w for vid, feats in videos}
    all_raw = np.concatenate(list(raw.values()))
    span = float(all_raw.max() - all_raw.min()) or 1.0
    scale, offset = 1.6 / span, 0.2 - 1.6 * float(all_raw.min()) / span

    label_rows = []
    records = []
    for vid, feats in videos:
        n = len(feats)
        if spec.label_model == "peaked":
            peak = rng.uniform(0.2 * n, 0.8 * n)
            width = n / 6.0
            y = 0.2 + 1.6 * np.exp(-((np.arange(n) - peak) ** 2) / (2 * width**2))
        else:
            y = scale * raw[vid] + offset
            if spec.label_model == "noisy-linear":
                y = np.maximum(y + rng.normal(0.0, spec.noise, size=n), 0.0)
        feature_name = f"{vid}.bnf"
        save_features(out_dir / feature_name, feats.astype(np.float32))
        records.append(ManifestRecord(vid, n, Path(feature_name)))
        label_rows.extend(
            (vid, "0", frame, float(val)) for frame, val in enumerate(y)
        )

    labels_path = out_dir / "labels.csv"
    with open(labels_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["video", "object", "frame", "y"])
        for row in label_rows:
            writer.writerow([row[0], row[1], row[2], repr(row[3])])

    manifest_path = out_dir / "manifest.txt"
    save_manifest(
        manifest_path,
        [
            ManifestRecord(r.video_id, r.n_frames, r.feature_path, Path("labels.csv"))
            for r in records
        ],
    )
    # generator provenance, so the hidden functional stays auditable
    meta = {
        "label_model": spec.label_model,
        "hidden_w": [float(x) for x in hidden_w],
        "scale": scale,
        "offset": offset,
    }
    (out_dir / "synth_meta.json").write_text(json.dumps(meta, sort_keys=True))
    return manifest_path, labels_path


# ---------------------------------------------------------------------------
# persistence


def write_report(path, report: StrategyReport) -> None:
    """Persist raw per-object scores; every summary statistic can be
    recomputed from these rows."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["video", "object", "selected_frame", "score"])
        for s in report.scores:
            writer.writerow([s.video_id, s.object_id, s.frame, repr(s.score)])


def write_ablation(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["batch_size", "mean_jf", "mean_sort_time_s"])
        for row in rows:
            writer.writerow([row.batch_size, repr(row.mean_score), repr(row.mean_sort_time)])


def format_report(report: StrategyReport) -> str:
    cov_txt = "n/a" if report.cov is None else f"{report.cov:.4f}"
    return (
        f"{report.strategy}: mean={report.mean:.4f} median={report.median:.4f} "
        f"range={report.min:.4f}-{report.max:.4f} cov={cov_txt} "
        f"({len(report.scores)} objects)"
    )
