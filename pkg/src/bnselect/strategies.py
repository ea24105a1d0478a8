"""Baseline and oracle annotation-frame selection strategies."""

from __future__ import annotations

import numpy as np

SIMPLE_STRATEGIES = ("first", "middle", "last", "random")
ORACLE_STRATEGIES = ("best", "worst")
STRATEGIES = SIMPLE_STRATEGIES + ORACLE_STRATEGIES + ("bn",)


def select(
    strategy: str,
    n: int,
    labels: np.ndarray | None = None,
    rng: np.random.Generator | None = None,
) -> int:
    """Pick a frame position in 0..n-1.

    middle is floor(n/2) on 0-based positions; best/worst need labels and
    break ties toward the lowest index. The learned strategy is not handled
    here: it needs a trained model and runs through the sorter.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if strategy == "first":
        return 0
    if strategy == "middle":
        return n // 2
    if strategy == "last":
        return n - 1
    if strategy == "random":
        if rng is None:
            rng = np.random.default_rng()
        return int(rng.integers(n))
    if strategy in ORACLE_STRATEGIES:
        if labels is None:
            raise ValueError(f"strategy {strategy!r} needs a label vector")
        labels = np.asarray(labels)
        if len(labels) != n:
            raise ValueError(f"{len(labels)} labels for {n} frames")
        return int(np.argmax(labels) if strategy == "best" else np.argmin(labels))
    if strategy == "bn":
        raise ValueError("the learned strategy runs through the sorter, not select()")
    raise ValueError(f"unknown strategy {strategy!r}")
