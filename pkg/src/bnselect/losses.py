"""Loss functions for training the performance predictor.

Three variants share one shape, |target - f|:

* relative:       target = yi - yj
* single:         target = yi (second frame unused)
* middle-biased:  target = (yi - yj) - (di - dj), where d is a weighted
                  distance of each frame's normalized index from the video
                  middle. Trained this way, the raw network output is used
                  unchanged as the sort comparator; absent a performance
                  signal it comes out negative for frames farther from the
                  middle, which is exactly the wanted fallback bias.
"""

from __future__ import annotations

from dataclasses import dataclass

from .net import LOSS_MIDDLE, LOSS_RELATIVE, LOSS_SINGLE, FrameSample


@dataclass(frozen=True)
class TrainingPair:
    """Two labeled comparison frames plus reference frames, one video."""

    xi: FrameSample
    xj: FrameSample
    refs: tuple
    yi: float
    yj: float

    def __post_init__(self):
        indices = [self.xi.index, self.xj.index] + [r.index for r in self.refs]
        if len(set(indices)) != len(indices):
            raise ValueError("comparison and reference frames must be distinct")


def middle_distance(index: float, weight: float = 0.5, middle: float = 0.5) -> float:
    """Weighted distance of a normalized frame index from the middle frame."""
    if not 0.0 < index <= 1.0:
        raise ValueError(f"normalized index must be in (0, 1], got {index}")
    return weight * abs(index - middle)


def loss_relative(pair: TrainingPair, f: float) -> float:
    return abs((pair.yi - pair.yj) - f)


def loss_single(yi: float, f: float) -> float:
    return abs(yi - f)


def loss_middle_biased(
    pair: TrainingPair, f: float, weight: float = 0.5, middle: float = 0.5
) -> float:
    di = middle_distance(pair.xi.index, weight, middle)
    dj = middle_distance(pair.xj.index, weight, middle)
    return abs((pair.yi - pair.yj) - (di - dj) - f)


def prediction_target(
    pair: TrainingPair, loss_kind: str, weight: float = 0.5, middle: float = 0.5
) -> float:
    """The output value that zeroes the given loss for this pair."""
    if loss_kind == LOSS_RELATIVE:
        return pair.yi - pair.yj
    if loss_kind == LOSS_SINGLE:
        return pair.yi
    if loss_kind == LOSS_MIDDLE:
        di = middle_distance(pair.xi.index, weight, middle)
        dj = middle_distance(pair.xj.index, weight, middle)
        return (pair.yi - pair.yj) - (di - dj)
    raise ValueError(f"unknown loss_kind {loss_kind!r}")
