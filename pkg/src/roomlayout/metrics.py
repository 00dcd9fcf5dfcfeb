"""Layout evaluation: corner error and pixel error.

Corner error pairs predicted and ground-truth corners by an exact minimum
cost assignment (distances normalized by the image diagonal) and charges a
flat 0.3 for every corner left unmatched on either side.  Pixel error is the
fraction of pixels whose surface label differs, with wall labels compared by
left-to-right index.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .layout import ImageGeometry, LabelMap, Point2, corners_xy

UNMATCHED_PENALTY = 0.3
_FORBIDDEN = 1e6  # blocks dummy-to-dummy diagonals; never part of an optimal assignment


@dataclass(frozen=True)
class CornerError:
    value: float
    matched: int
    unmatched_gt: int
    unmatched_pred: int


@dataclass(frozen=True)
class PixelError:
    value: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.value <= 1.0:
            raise ValueError(f"pixel error must lie in [0, 1], got {self.value}")


def corner_error(
    gt: Sequence[Point2], pred: Sequence[Point2], geometry: ImageGeometry
) -> CornerError:
    """Minimum-cost corner matching with a 0.3 penalty per unmatched corner.

    Leaving a pair unmatched is modeled as two 0.3-cost edges to dummy nodes,
    so "match" versus "leave both unmatched" is decided jointly and exactly.
    The total is divided by max(1, max(|gt|, |pred|)), which keeps the error
    symmetric and bounded.
    """
    n, m = len(gt), len(pred)
    if n == 0 and m == 0:
        return CornerError(value=0.0, matched=0, unmatched_gt=0, unmatched_pred=0)
    diag = geometry.diagonal()
    g = corners_xy(gt)
    p = corners_xy(pred)

    size = n + m
    cost = np.full((size, size), _FORBIDDEN)
    if n and m:
        d = np.hypot(g[:, None, 0] - p[None, :, 0], g[:, None, 1] - p[None, :, 1]) / diag
        cost[:n, :m] = d
    cost[n:, m:] = 0.0  # unused dummy-to-dummy pairings are free
    for i in range(n):
        cost[i, m + i] = UNMATCHED_PENALTY
    for j in range(m):
        cost[n + j, j] = UNMATCHED_PENALTY

    rows, cols = linear_sum_assignment(cost)
    matched = 0
    total = 0.0
    for r, c in zip(rows, cols):
        if r < n and c < m:
            matched += 1
            total += cost[r, c]
        elif r < n or c < m:
            total += UNMATCHED_PENALTY
    return CornerError(
        value=float(total / max(1, max(n, m))),
        matched=matched,
        unmatched_gt=n - matched,
        unmatched_pred=m - matched,
    )


def pixel_error(gt: LabelMap, pred: LabelMap) -> PixelError:
    """Fraction of pixels whose surface label differs."""
    if gt.geometry != pred.geometry:
        raise ValueError(f"geometry mismatch: {gt.geometry} vs {pred.geometry}")
    return PixelError(value=float(np.mean(gt.labels != pred.labels)))
