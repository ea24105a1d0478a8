"""Segmentation quality metrics and label generation.

Region similarity is plain intersection-over-union. Contour accuracy is the
F-measure of boundary precision/recall under a pixel-distance tolerance: a
boundary pixel counts as matched when some boundary pixel of the other mask
lies within ``tol`` (Euclidean). Boundary pixels are foreground pixels with
a background 4-neighbor, where outside the image counts as background.

Empty-vs-empty convention (matching the usual benchmark toolkits): both
masks (or both boundaries) empty scores 1.0, exactly one empty scores 0.0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .ingest import Mask


@dataclass(frozen=True)
class FrameScore:
    """Region and contour quality for a single frame."""

    j: float
    f: float

    def __post_init__(self):
        if not 0.0 <= self.j <= 1.0:
            raise ValueError(f"j must be in [0, 1], got {self.j}")
        if not 0.0 <= self.f <= 1.0:
            raise ValueError(f"f must be in [0, 1], got {self.f}")

    @property
    def jf(self) -> float:
        return self.j + self.f


def _check_same_shape(m: Mask, g: Mask) -> None:
    if m.pixels.shape != g.pixels.shape:
        raise ValueError(
            f"mask dimensions differ: {m.pixels.shape} vs {g.pixels.shape}"
        )


def jaccard(m: Mask, g: Mask) -> float:
    """Intersection over union of two masks; 1.0 when both are empty."""
    _check_same_shape(m, g)
    union = int(np.count_nonzero(m.pixels | g.pixels))
    if union == 0:
        return 1.0
    inter = int(np.count_nonzero(m.pixels & g.pixels))
    return inter / union


def boundary_map(pixels: np.ndarray) -> np.ndarray:
    """Foreground pixels with any 4-neighbor background or off-image."""
    padded = np.pad(pixels, 1, constant_values=False)
    interior = (
        padded[:-2, 1:-1] & padded[2:, 1:-1] & padded[1:-1, :-2] & padded[1:-1, 2:]
    )
    return pixels & ~interior


def default_boundary_tol(width: int, height: int) -> int:
    """Benchmark-style default: ceil(0.008 * image diagonal)."""
    return math.ceil(0.008 * math.hypot(width, height))


def boundary_f(m: Mask, g: Mask, tol: float | None = None) -> float:
    """F-measure 2PR/(P+R) of boundary precision and recall at tolerance tol."""
    _check_same_shape(m, g)
    if tol is None:
        tol = default_boundary_tol(m.width, m.height)
    if tol < 0:
        raise ValueError(f"tol must be >= 0, got {tol}")
    bm = boundary_map(m.pixels)
    bg = boundary_map(g.pixels)
    nm, ng = int(bm.sum()), int(bg.sum())
    if nm == 0 and ng == 0:
        return 1.0
    if nm == 0 or ng == 0:
        return 0.0
    # distance to the nearest boundary pixel of the other mask; the dilation
    # by a disc of radius tol is exactly "distance <= tol"
    dist_to_g = ndimage.distance_transform_edt(~bg)
    dist_to_m = ndimage.distance_transform_edt(~bm)
    precision = float(np.count_nonzero(dist_to_g[bm] <= tol)) / nm
    recall = float(np.count_nonzero(dist_to_m[bg] <= tol)) / ng
    if precision + recall == 0.0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def label_vector(p: np.ndarray, n: int | None = None) -> np.ndarray:
    """Per-frame performance labels from a full performance matrix.

    Label i is the mean over all frames of the quality achieved when frame
    i is the annotated frame, i.e. the mean of row i.
    """
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 2 or p.shape[0] != p.shape[1]:
        raise ValueError(f"performance matrix must be square, got {p.shape}")
    if n is not None and p.shape[0] != n:
        raise ValueError(f"matrix is {p.shape[0]}x{p.shape[0]}, expected {n}")
    if not np.all(np.isfinite(p)):
        raise ValueError("performance matrix must be finite")
    return p.mean(axis=1)


def score_frame(m: Mask, g: Mask, tol: float | None = None) -> FrameScore:
    """Convenience: both metrics for one predicted/ground-truth mask pair."""
    return FrameScore(j=jaccard(m, g), f=boundary_f(m, g, tol))
