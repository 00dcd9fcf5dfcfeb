"""Vertical vanishing-point estimation and image rectification.

Vertically pointing line segments vote for the vertical vanishing point via
RANSAC; a homography built in image-centered coordinates then sends that
point to the Y-axis point at infinity, making every wall-wall boundary
parallel to the image Y axis.  All homography math uses centered coordinates
with the origin at ((width-1)/2, (height-1)/2).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .layout import ImageGeometry, LayoutAnnotation, Point2

INFINITY_TOL = 1e-9
HORIZON_TOL = 1e-9


@dataclass(frozen=True)
class LineSegment:
    a: Point2
    b: Point2

    def __post_init__(self) -> None:
        if self.a.x == self.b.x and self.a.y == self.b.y:
            raise ValueError("segment endpoints coincide")

    def angle_deg(self) -> float:
        """Direction angle from the horizontal axis, in [0, 90]."""
        dx = abs(self.b.x - self.a.x)
        dy = abs(self.b.y - self.a.y)
        return math.degrees(math.atan2(dy, dx))

    def midpoint(self) -> tuple[float, float]:
        return (self.a.x + self.b.x) / 2.0, (self.a.y + self.b.y) / 2.0

    def direction(self) -> tuple[float, float]:
        return self.b.x - self.a.x, self.b.y - self.a.y

    def line(self) -> np.ndarray:
        """Homogeneous supporting line, scaled to unit (a, b) norm."""
        p = np.array([self.a.x, self.a.y, 1.0])
        q = np.array([self.b.x, self.b.y, 1.0])
        l = np.cross(p, q)
        return l / math.hypot(l[0], l[1])


@dataclass(frozen=True)
class VanishingPoint:
    """Homogeneous image point, normalized so the largest component is 1."""

    homogeneous: tuple[float, float, float]

    def __post_init__(self) -> None:
        v = np.asarray(self.homogeneous, dtype=np.float64)
        if v.shape != (3,) or not np.any(v != 0.0):
            raise ValueError("homogeneous triple must be three reals, not all zero")
        v = v / v[np.argmax(np.abs(v))]
        object.__setattr__(self, "homogeneous", (float(v[0]), float(v[1]), float(v[2])))

    def is_at_infinity(self, tol: float = INFINITY_TOL) -> bool:
        return abs(self.homogeneous[2]) <= tol

    def centered(self, geometry: ImageGeometry) -> tuple[float, float, float]:
        """The same point with the origin moved to the image center."""
        cx, cy = geometry.center()
        x, y, w = self.homogeneous
        return x - cx * w, y - cy * w, w


@dataclass(frozen=True)
class Homography:
    m: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        mat = np.asarray(self.m, dtype=np.float64).reshape(3, 3)
        object.__setattr__(self, "m", mat)
        scale = np.abs(mat).max(axis=1, keepdims=True)
        if np.any(scale == 0.0) or abs(np.linalg.det(mat / scale)) < 1e-12:
            raise ValueError("homography matrix is singular")

    def inverse(self) -> "Homography":
        return Homography(np.linalg.inv(self.m))

    @staticmethod
    def identity() -> "Homography":
        return Homography(np.eye(3))


@dataclass(frozen=True)
class RansacConfig:
    iterations: int = 500
    inlier_angle_deg: float = 2.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if not 0.0 < self.inlier_angle_deg < 45.0:
            raise ValueError("inlier_angle_deg must lie in (0, 45)")


def filter_vertical(segments: Sequence[LineSegment]) -> list[LineSegment]:
    """Keep segments steeper than 45 degrees from the horizontal axis."""
    return [s for s in segments if abs(s.b.y - s.a.y) > abs(s.b.x - s.a.x)]


def _angle_to_candidate(seg: LineSegment, candidate: np.ndarray) -> float:
    """Angle between a segment and the direction from its midpoint to the candidate."""
    dx, dy = seg.direction()
    mx, my = seg.midpoint()
    x, y, w = candidate
    if abs(w) <= INFINITY_TOL * math.hypot(x, y):
        tx, ty = x, y
    else:
        tx, ty = x / w - mx, y / w - my
    cross = dx * ty - dy * tx
    dot = dx * tx + dy * ty
    ang = abs(math.atan2(cross, dot))
    return min(ang, math.pi - ang)


def _count_inliers(segments, candidate, threshold_rad):
    return [i for i, s in enumerate(segments) if _angle_to_candidate(s, candidate) <= threshold_rad]


def ransac_vpz(segments: Sequence[LineSegment], cfg: RansacConfig = RansacConfig()) -> VanishingPoint:
    """Most-voted intersection point of the segments' supporting lines.

    Two segments are sampled per iteration; a segment votes for a candidate
    when the direction from its midpoint to the candidate is within the
    angular threshold of its own direction.  The winning candidate is refined
    by algebraic least squares over its inlier lines.  Deterministic for a
    fixed seed.
    """
    if len(segments) < 2:
        raise ValueError("need at least two segments to intersect")
    rng = np.random.default_rng(cfg.seed)
    lines = [s.line() for s in segments]
    threshold = math.radians(cfg.inlier_angle_deg)

    best_inliers: list[int] = []
    best_candidate: np.ndarray | None = None
    for _ in range(cfg.iterations):
        i, j = rng.choice(len(segments), size=2, replace=False)
        candidate = np.cross(lines[i], lines[j])
        norm = np.abs(candidate).max()
        if norm < 1e-12:
            continue  # parallel pair
        candidate = candidate / norm
        inliers = _count_inliers(segments, candidate, threshold)
        if len(inliers) > len(best_inliers):
            best_inliers = inliers
            best_candidate = candidate
    if best_candidate is None:
        raise ValueError("all sampled segment pairs were parallel")

    stack = np.array([lines[i] for i in best_inliers])
    # v minimizing sum (l . v)^2 over unit v: smallest right singular vector
    _, _, vt = np.linalg.svd(stack)
    refined = vt[-1]
    if np.abs(refined).max() < 1e-12:
        refined = best_candidate
    return VanishingPoint(homogeneous=tuple(refined))


def build_rectifying_homography(vp: VanishingPoint, geometry: ImageGeometry) -> Homography:
    """Homography sending the vanishing point to the Y-axis point at infinity.

    For a finite centered vp (vx, vy) the canonical form is Shear @ P where P
    moves the point to infinity and the shear straightens the verticals:

        P = [[1, 0, 0], [0, 1, 0], [0, -1/vy, 1]]
        Shear = [[1, -vx/vy, 0], [0, 1, 0], [0, 0, 1]]

    A vp already at Y infinity yields the identity; a vp on the horizon
    (|vy| below tolerance) cannot be rectified and raises.
    """
    x, y, w = vp.centered(geometry)
    scale = max(abs(x), abs(y), abs(w))
    x, y, w = x / scale, y / scale, w / scale
    if abs(w) <= INFINITY_TOL:
        if abs(y) <= HORIZON_TOL:
            raise ValueError("vanishing point lies on the horizon; cannot rectify")
        if abs(x) <= INFINITY_TOL:
            return Homography.identity()
        shear = np.array([[1.0, -x / y, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
        return Homography(shear)
    vx, vy = x / w, y / w
    if abs(vy) < HORIZON_TOL:
        raise ValueError("vanishing point lies on the horizon; cannot rectify")
    p = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, -1.0 / vy, 1.0]])
    shear = np.array([[1.0, -vx / vy, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    return Homography(shear @ p)


def apply_homography(h: Homography, p: Point2, geometry: ImageGeometry) -> Point2:
    """Apply h to a pixel point using the centered-coordinate convention."""
    cx, cy = geometry.center()
    v = h.m @ np.array([p.x - cx, p.y - cy, 1.0])
    if abs(v[2]) < 1e-12:
        raise ValueError(f"point ({p.x}, {p.y}) maps to infinity")
    return Point2(float(v[0] / v[2] + cx), float(v[1] / v[2] + cy))


def apply_homography_xy(h: Homography, xy: np.ndarray, geometry: ImageGeometry) -> np.ndarray:
    """Vectorized apply_homography over an (n, 2) array."""
    cx, cy = geometry.center()
    pts = np.asarray(xy, dtype=np.float64).reshape(-1, 2)
    hom = np.column_stack([pts[:, 0] - cx, pts[:, 1] - cy, np.ones(len(pts))])
    out = hom @ h.m.T
    if np.any(np.abs(out[:, 2]) < 1e-12):
        raise ValueError("some points map to infinity")
    return np.column_stack([out[:, 0] / out[:, 2] + cx, out[:, 1] / out[:, 2] + cy])


@dataclass(frozen=True)
class CornerSets:
    """Boundary corner lists outside the rectified frame (walls not vertical)."""

    ceiling: tuple[Point2, ...]
    floor: tuple[Point2, ...]


def _rescale(points: Sequence[Point2], src: ImageGeometry, dst: ImageGeometry) -> list[Point2]:
    sx = (dst.width - 1) / (src.width - 1)
    sy = (dst.height - 1) / (src.height - 1)
    return [Point2(p.x * sx, p.y * sy) for p in points]


def backproject_corners(
    layout: LayoutAnnotation,
    h: Homography,
    original: ImageGeometry,
    working: ImageGeometry,
) -> CornerSets:
    """Map working-frame corners back to the original (unrectified) image.

    Corners are first rescaled from the working resolution to the original
    resolution, then pushed through the inverse homography.
    """
    hinv = h.inverse()

    def back(points: Sequence[Point2]) -> tuple[Point2, ...]:
        scaled = _rescale(points, working, original)
        return tuple(apply_homography(hinv, p, original) for p in scaled)

    return CornerSets(ceiling=back(layout.ceiling), floor=back(layout.floor))


def rectify_points(
    points: Sequence[Point2],
    h: Homography,
    original: ImageGeometry,
    working: ImageGeometry,
) -> tuple[Point2, ...]:
    """Original-frame points into the working rectified frame (inverse of backprojection)."""
    mapped = [apply_homography(h, p, original) for p in points]
    return tuple(_rescale(mapped, original, working))


def warp_image(pixels: np.ndarray, h: Homography) -> np.ndarray:
    """Inverse-warp an image through h with bilinear sampling.

    The output canvas matches the input size; destinations with no source
    pixel are black.  Grayscale (h, w) and color (h, w, c) arrays are
    supported and the dtype is preserved.
    """
    img = np.asarray(pixels)
    if img.ndim == 2:
        src = img[:, :, None].astype(np.float64)
    elif img.ndim == 3:
        src = img.astype(np.float64)
    else:
        raise ValueError("expected a (h, w) or (h, w, c) image array")
    hgt, wid = src.shape[:2]
    geometry = ImageGeometry(width=wid, height=hgt)
    cx, cy = geometry.center()

    hinv = h.inverse().m
    xs, ys = np.meshgrid(np.arange(wid, dtype=np.float64), np.arange(hgt, dtype=np.float64))
    ones = np.ones_like(xs)
    hom = np.stack([xs - cx, ys - cy, ones], axis=-1) @ hinv.T
    wcomp = hom[..., 2]
    valid = np.abs(wcomp) >= 1e-12
    safe_w = np.where(valid, wcomp, 1.0)
    sx = hom[..., 0] / safe_w + cx
    sy = hom[..., 1] / safe_w + cy
    valid &= (sx >= 0) & (sx <= wid - 1) & (sy >= 0) & (sy <= hgt - 1)

    sx = np.clip(sx, 0, wid - 1)
    sy = np.clip(sy, 0, hgt - 1)
    x0 = np.floor(sx).astype(np.int64)
    y0 = np.floor(sy).astype(np.int64)
    x1 = np.minimum(x0 + 1, wid - 1)
    y1 = np.minimum(y0 + 1, hgt - 1)
    fx = (sx - x0)[..., None]
    fy = (sy - y0)[..., None]

    out = (
        src[y0, x0] * (1 - fx) * (1 - fy)
        + src[y0, x1] * fx * (1 - fy)
        + src[y1, x0] * (1 - fx) * fy
        + src[y1, x1] * fx * fy
    )
    out[~valid] = 0.0
    if np.issubdtype(img.dtype, np.integer):
        info = np.iinfo(img.dtype)
        out = np.clip(np.rint(out), info.min, info.max)
    out = out.astype(img.dtype)
    return out[:, :, 0] if img.ndim == 2 else out
