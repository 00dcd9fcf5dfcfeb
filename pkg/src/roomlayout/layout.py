"""Core geometric types: image geometry, layout annotations, label maps.

A layout annotation describes a room layout in the rectified frame, where
every wall-wall boundary is vertical: the ceiling-wall and floor-wall
boundaries are x-monotone corner polylines and the wall-wall boundaries are
plain x positions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal, Optional, Sequence

import numpy as np

Boundary = Literal["ceiling", "floor"]

# Tolerance for matching a corner x against a wall-wall x position.
WALL_MATCH_TOL = 1e-6


@dataclass(frozen=True)
class ImageGeometry:
    """Pixel dimensions of the working image."""

    width: int
    height: int

    def __post_init__(self) -> None:
        if self.width < 2 or self.height < 2:
            raise ValueError(f"image must be at least 2x2, got {self.width}x{self.height}")

    def diagonal(self) -> float:
        return math.hypot(self.width, self.height)

    def center(self) -> tuple[float, float]:
        """Origin of the image-centered coordinate convention."""
        return (self.width - 1) / 2.0, (self.height - 1) / 2.0


@dataclass(frozen=True)
class Point2:
    x: float
    y: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite point ({self.x}, {self.y})")


def corners_xy(corners: Sequence[Point2]) -> np.ndarray:
    """Corner sequence as an (n, 2) float array."""
    if not corners:
        return np.zeros((0, 2), dtype=np.float64)
    return np.array([(p.x, p.y) for p in corners], dtype=np.float64)


def _check_polyline(
    name: str,
    corners: Sequence[Point2],
    walls: Sequence[float],
    geometry: ImageGeometry,
) -> None:
    xs = [p.x for p in corners]
    for p in corners:
        if not (0.0 <= p.x <= geometry.width - 1 and 0.0 <= p.y <= geometry.height - 1):
            raise ValueError(f"{name} corner ({p.x}, {p.y}) outside image bounds")
    if any(b <= a for a, b in zip(xs, xs[1:])):
        raise ValueError(f"{name} corner x positions must be strictly increasing: {xs}")
    # Non-endpoint corners must sit on a wall-wall boundary; endpoints may lie
    # anywhere (they are where the boundary leaves the image or its span).
    for p in corners[1:-1]:
        if not any(abs(p.x - w) <= WALL_MATCH_TOL for w in walls):
            raise ValueError(
                f"{name} corner at x={p.x} is not an endpoint and matches no wall position"
            )


@dataclass(frozen=True)
class LayoutAnnotation:
    """A general room layout: two boundary polylines plus wall x positions."""

    geometry: ImageGeometry
    ceiling: tuple[Point2, ...] = ()
    floor: tuple[Point2, ...] = ()
    walls: tuple[float, ...] = ()
    has_ceiling: bool = True
    has_floor: bool = True

    def __post_init__(self) -> None:
        object.__setattr__(self, "ceiling", tuple(self.ceiling))
        object.__setattr__(self, "floor", tuple(self.floor))
        object.__setattr__(self, "walls", tuple(float(w) for w in self.walls))
        if any(b <= a for a, b in zip(self.walls, self.walls[1:])):
            raise ValueError(f"wall x positions must be strictly increasing: {self.walls}")
        for w in self.walls:
            if not 0.0 <= w <= self.geometry.width - 1:
                raise ValueError(f"wall position {w} outside image")
        if not self.has_ceiling and self.ceiling:
            raise ValueError("has_ceiling is false but ceiling corners are present")
        if not self.has_floor and self.floor:
            raise ValueError("has_floor is false but floor corners are present")
        if self.has_ceiling and not self.ceiling:
            raise ValueError("has_ceiling is true but ceiling corners are empty")
        if self.has_floor and not self.floor:
            raise ValueError("has_floor is true but floor corners are empty")
        _check_polyline("ceiling", self.ceiling, self.walls, self.geometry)
        _check_polyline("floor", self.floor, self.walls, self.geometry)
        self._check_ordering()

    def _check_ordering(self) -> None:
        # Ceiling must stay strictly above floor wherever both are defined.
        # Both polylines are linear between breakpoints, so checking the union
        # of corner x positions (restricted to the common span) is sufficient.
        if not (self.has_ceiling and self.has_floor):
            return
        lo = max(self.ceiling[0].x, self.floor[0].x)
        hi = min(self.ceiling[-1].x, self.floor[-1].x)
        if lo > hi:
            return
        xs = {lo, hi}
        xs.update(p.x for p in self.ceiling if lo <= p.x <= hi)
        xs.update(p.x for p in self.floor if lo <= p.x <= hi)
        for x in xs:
            yc = boundary_y_at(self, "ceiling", x)
            yf = boundary_y_at(self, "floor", x)
            if yc is not None and yf is not None and not yc < yf:
                raise ValueError(f"ceiling y={yc} not above floor y={yf} at x={x}")

    def corners(self, which: Boundary) -> tuple[Point2, ...]:
        return self.ceiling if which == "ceiling" else self.floor

    def all_corners(self) -> tuple[Point2, ...]:
        """Ceiling corners followed by floor corners (the corner-error set)."""
        return self.ceiling + self.floor


@dataclass(frozen=True)
class LabelMap:
    """Per-pixel surface labels: 0 ceiling, 1 floor, 2+k the k-th wall."""

    geometry: ImageGeometry
    labels: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        if self.labels.shape != (self.geometry.height, self.geometry.width):
            raise ValueError(
                f"label grid shape {self.labels.shape} does not match geometry "
                f"{self.geometry.height}x{self.geometry.width}"
            )


def boundary_y_at(annotation: LayoutAnnotation, which: Boundary, x: float) -> Optional[float]:
    """Boundary y at column x by linear interpolation, None where absent.

    The boundary exists only over the x span of its corner polyline.
    """
    if not 0.0 <= x <= annotation.geometry.width - 1:
        raise ValueError(f"x={x} outside image")
    corners = annotation.corners(which)
    if not corners or x < corners[0].x or x > corners[-1].x:
        return None
    for a, b in zip(corners, corners[1:]):
        if a.x <= x <= b.x:
            t = (x - a.x) / (b.x - a.x)
            return a.y + t * (b.y - a.y)
    return corners[-1].y  # x == last corner exactly


def rasterize(annotation: LayoutAnnotation) -> LabelMap:
    """Column-wise fill of surface labels at integer pixel centers.

    A pixel (x, y) is ceiling when y is strictly above the ceiling boundary,
    floor when strictly below the floor boundary, otherwise the wall whose
    index is the count of wall positions <= x.  Columns where a boundary is
    absent are wall-filled up to the image border.
    """
    geom = annotation.geometry
    w, h = geom.width, geom.height
    walls = np.asarray(annotation.walls, dtype=np.float64)
    ys = np.arange(h, dtype=np.float64)[:, None]
    xs = np.arange(w, dtype=np.float64)

    wall_index = np.searchsorted(walls, xs, side="right") if walls.size else np.zeros(w, dtype=int)
    labels = np.broadcast_to(wall_index.astype(np.int32) + 2, (h, w)).copy()

    ceil_y = np.array(
        [v if (v := boundary_y_at(annotation, "ceiling", float(x))) is not None else np.nan for x in xs]
    )
    floor_y = np.array(
        [v if (v := boundary_y_at(annotation, "floor", float(x))) is not None else np.nan for x in xs]
    )
    with np.errstate(invalid="ignore"):
        labels[ys < ceil_y[None, :]] = 0
        labels[ys > floor_y[None, :]] = 1
    return LabelMap(geometry=geom, labels=labels)
