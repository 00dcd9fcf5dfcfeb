"""Flat row-vector layout representation: encoding and training-side losses.

The representation packs a layout into three per-column row vectors plus two
presence probabilities.  Columns where a boundary does not exist carry a
sentinel value outside [0, 1] so the decoder (and the masked loss) can tell
absence apart from a real position.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .layout import Boundary, LayoutAnnotation, boundary_y_at

SENTINEL_CEILING = -0.01
SENTINEL_FLOOR = 1.01
WALL_DECAY = 0.96


@dataclass(frozen=True)
class FlatRepr:
    """Per-column layout targets plus boundary-presence probabilities."""

    width: int
    y_ceil: np.ndarray = field(repr=False)
    y_floor: np.ndarray = field(repr=False)
    p_wall: np.ndarray = field(repr=False)
    p_ceil: float
    p_floor: float

    def __post_init__(self) -> None:
        for name in ("y_ceil", "y_floor", "p_wall"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if arr.shape != (self.width,):
                raise ValueError(f"{name} must have length {self.width}, got {arr.shape}")
            object.__setattr__(self, name, arr)
        if not 0.0 <= self.p_ceil <= 1.0 or not 0.0 <= self.p_floor <= 1.0:
            raise ValueError("presence probabilities must lie in [0, 1]")


@dataclass(frozen=True)
class LossReport:
    """Per-branch training losses; combine with total()."""

    loss_yceil: float
    loss_yfloor: float
    loss_pwall: float
    loss_pceil: float
    loss_pfloor: float

    def total(self, weights: Sequence[float] | None = None) -> float:
        parts = (self.loss_yceil, self.loss_yfloor, self.loss_pwall, self.loss_pceil, self.loss_pfloor)
        if weights is None:
            return float(sum(parts))
        if len(weights) != 5:
            raise ValueError("expected 5 branch weights")
        return float(sum(w * p for w, p in zip(weights, parts)))


def wall_distance_profile(walls: Sequence[float], width: int) -> np.ndarray:
    """Integer column distance to the nearest wall; width when no walls."""
    if not walls:
        return np.full(width, width, dtype=np.int64)
    cols = np.rint(np.asarray(walls, dtype=np.float64)).astype(np.int64)
    idx = np.arange(width, dtype=np.int64)
    return np.abs(idx[:, None] - cols[None, :]).min(axis=1)


def encode(annotation: LayoutAnnotation) -> FlatRepr:
    """Build the flat representation of a layout.

    Boundary positions are normalized by (height - 1) so rows 0 and height-1
    map exactly to 0 and 1; absent columns get the sentinel.  Wall existence
    decays as WALL_DECAY**dx with dx the column distance to the nearest wall.
    """
    geom = annotation.geometry
    w, h = geom.width, geom.height
    y_ceil = np.full(w, SENTINEL_CEILING, dtype=np.float64)
    y_floor = np.full(w, SENTINEL_FLOOR, dtype=np.float64)
    for i in range(w):
        yc = boundary_y_at(annotation, "ceiling", float(i))
        if yc is not None:
            y_ceil[i] = yc / (h - 1)
        yf = boundary_y_at(annotation, "floor", float(i))
        if yf is not None:
            y_floor[i] = yf / (h - 1)
    dx = wall_distance_profile(annotation.walls, w)
    p_wall = WALL_DECAY ** dx.astype(np.float64)
    return FlatRepr(
        width=w,
        y_ceil=y_ceil,
        y_floor=y_floor,
        p_wall=p_wall,
        p_ceil=1.0 if annotation.has_ceiling else 0.0,
        p_floor=1.0 if annotation.has_floor else 0.0,
    )


def masked_boundary_loss(pred: Sequence[float], gt: Sequence[float], which: Boundary) -> float:
    """Mean squared boundary error, skipping columns the target masks out.

    A ceiling column is masked when the target is the sentinel and the
    prediction already sits below 0; a floor column when the target is the
    sentinel and the prediction already sits above 1.  The masking is
    one-sided: a prediction on the wrong side of the sentinel still counts.
    """
    p = np.asarray(pred, dtype=np.float64)
    g = np.asarray(gt, dtype=np.float64)
    if p.shape != g.shape:
        raise ValueError(f"length mismatch: {p.shape} vs {g.shape}")
    if which == "ceiling":
        masked = (g == SENTINEL_CEILING) & (p < 0.0)
    else:
        masked = (g == SENTINEL_FLOOR) & (p > 1.0)
    keep = ~masked
    if not keep.any():
        return 0.0
    diff = p[keep] - g[keep]
    return float(np.mean(diff * diff))


def bce_loss(pred: Sequence[float], gt: Sequence[float]) -> float:
    """Mean binary cross-entropy; predictions must lie strictly inside (0, 1)."""
    p = np.asarray(pred, dtype=np.float64)
    g = np.asarray(gt, dtype=np.float64)
    if p.shape != g.shape:
        raise ValueError(f"length mismatch: {p.shape} vs {g.shape}")
    if np.any(p <= 0.0) or np.any(p >= 1.0):
        raise ValueError("predictions must be strictly inside (0, 1)")
    return float(np.mean(-(g * np.log(p) + (1.0 - g) * np.log(1.0 - p))))


def poly_lr_factor(iter_now: int, iter_max: int) -> float:
    """Polynomial decay factor (1 - iter_now/iter_max)**0.9."""
    if iter_max <= 0:
        raise ValueError("iter_max must be positive")
    if iter_now < 0 or iter_now > iter_max:
        raise ValueError(f"iter_now must lie in [0, {iter_max}], got {iter_now}")
    return float((1.0 - iter_now / iter_max) ** 0.9)


def loss_report(pred: FlatRepr, gt: FlatRepr) -> LossReport:
    """All five branch losses between a predicted and a target representation."""
    if pred.width != gt.width:
        raise ValueError("width mismatch between prediction and target")
    return LossReport(
        loss_yceil=masked_boundary_loss(pred.y_ceil, gt.y_ceil, "ceiling"),
        loss_yfloor=masked_boundary_loss(pred.y_floor, gt.y_floor, "floor"),
        loss_pwall=bce_loss(pred.p_wall, gt.p_wall),
        loss_pceil=bce_loss([pred.p_ceil], [gt.p_ceil]),
        loss_pfloor=bce_loss([pred.p_floor], [gt.p_floor]),
    )
