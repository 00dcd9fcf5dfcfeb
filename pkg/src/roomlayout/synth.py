"""Synthetic room sampling: exact ground truth for the decoding pipeline.

Rooms are staircase-shaped plans with perpendicular adjacent walls (the whole
plan rotated by a random angle), built directly on the viewing rays of chosen
integer wall columns so the projected wall positions are exact.  The camera
sits halfway up a two meter room, so floor and ceiling planes are exactly one
meter away, matching the 3D lifting convention.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .decode import smoothing_window
from .flat import SENTINEL_CEILING, SENTINEL_FLOOR, FlatRepr, encode
from .layout import ImageGeometry, LayoutAnnotation, Point2
from .reconstruct import CameraModel

MAX_ATTEMPTS = 64


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 0
    geometry: ImageGeometry = ImageGeometry(256, 256)
    n_walls_range: tuple[int, int] = (0, 6)
    focal_range: tuple[float, float] = (200.0, 800.0)
    noise_sigma_y: float = 0.0
    noise_sigma_p: float = 0.0
    dropout_frac: float = 0.0

    def __post_init__(self) -> None:
        lo, hi = self.n_walls_range
        if lo < 0 or hi < lo:
            raise ValueError(f"invalid wall-count range {self.n_walls_range}")
        flo, fhi = self.focal_range
        if flo <= 0 or fhi < flo:
            raise ValueError(f"invalid focal range {self.focal_range}")
        if self.noise_sigma_y < 0 or self.noise_sigma_p < 0:
            raise ValueError("noise sigmas must be non-negative")
        if not 0.0 <= self.dropout_frac < 1.0:
            raise ValueError("dropout_frac must lie in [0, 1)")


@dataclass(frozen=True)
class SynthSample:
    annotation: LayoutAnnotation
    flat_clean: FlatRepr
    flat_noisy: FlatRepr
    camera: CameraModel
    room_plan: np.ndarray = field(repr=False)  # (k, 2) plan polygon, camera at origin


def wall_column_limits(geometry: ImageGeometry) -> tuple[int, int]:
    """Border margin and pairwise separation that keep encoded peaks exact.

    The peak finder smooths with an edge-replicated window; a wall closer to
    the border than the window (or two walls sharing a window) can shift the
    smoothed maximum off the true column, so generated walls keep clear.
    """
    window = smoothing_window(geometry.width, 0.05)
    return window + 3, 2 * window + 4


def _draw_wall_columns(
    rng: np.random.Generator, n: int, geometry: ImageGeometry
) -> list[int]:
    margin, separation = wall_column_limits(geometry)
    if n == 0:
        return []
    lo, hi = margin, geometry.width - 1 - margin
    slack = (hi - lo) - (n - 1) * separation
    if slack < 0:
        raise ValueError(f"{n} walls do not fit a width-{geometry.width} image")
    extra = np.sort(rng.integers(0, slack + 1, size=n))
    return [int(lo + extra[i] + i * separation) for i in range(n)]


def _intersect_ray(
    origin: np.ndarray, direction: np.ndarray, ray_slope: float
) -> Optional[tuple[np.ndarray, float]]:
    """Intersect origin + t*direction with the view ray (x, y) = (slope*s, s)."""
    denom = direction[0] - ray_slope * direction[1]
    if abs(denom) < 1e-9:
        return None
    t = (ray_slope * origin[1] - origin[0]) / denom
    point = origin + t * direction
    return point, float(point[1])


def _build_chain(
    rng: np.random.Generator,
    columns: list[int],
    f: float,
    geometry: ImageGeometry,
) -> Optional[tuple[np.ndarray, np.ndarray]]:
    """Wall-plan vertices on the view rays of the border and wall columns.

    Returns (vertices, depths) or None when a draw violates the depth bounds.
    Adjacent edges alternate between two perpendicular plan directions, so
    every interior corner is a true right angle in 3D.
    """
    cx, cy = geometry.center()
    y_min_img = max(4.0, 0.05 * cy)
    y_max_img = 0.95 * cy
    depth_lo = f / y_max_img
    depth_hi = f / y_min_img

    # 36..54 degrees keeps both plan directions well away from every view ray
    theta = math.radians(rng.uniform(36.0, 54.0)) * (1 if rng.random() < 0.5 else -1)
    u = np.array([math.cos(theta), math.sin(theta)])
    v = np.array([-math.sin(theta), math.cos(theta)])
    phase = int(rng.integers(2))

    ray_slopes = [(-cx) / f] + [(c - cx) / f for c in columns] + [cx / f]
    depth0 = rng.uniform(depth_lo * 1.05, depth_hi * 0.95)
    vertices = [np.array([ray_slopes[0] * depth0, depth0])]
    depths = [depth0]
    for i, slope in enumerate(ray_slopes[1:]):
        direction = u if (i + phase) % 2 == 0 else v
        hit = _intersect_ray(vertices[-1], direction, slope)
        if hit is None:
            return None
        point, depth = hit
        if not depth_lo <= depth <= depth_hi:
            return None
        vertices.append(point)
        depths.append(depth)
    return np.array(vertices), np.array(depths)


def _close_plan(vertices: np.ndarray) -> np.ndarray:
    """Close the visible wall chain into a simple polygon around the camera."""
    radius = 3.0 * float(np.hypot(vertices[:, 0], vertices[:, 1]).max())
    ang_first = math.atan2(vertices[0, 0], vertices[0, 1])
    ang_last = math.atan2(vertices[-1, 0], vertices[-1, 1])
    sweep = 2.0 * math.pi - (ang_last - ang_first)
    steps = max(4, math.ceil(sweep / math.radians(60.0)))
    arc = [
        np.array([radius * math.sin(a), radius * math.cos(a)])
        for a in np.linspace(ang_last, ang_first + 2.0 * math.pi, steps + 1)
    ]
    return np.vstack([vertices, arc])


def sample_room(cfg: SynthConfig) -> SynthSample:
    """Draw one room, its exact encoding, and a noisy copy; deterministic per seed."""
    rng = np.random.default_rng(cfg.seed)
    geom = cfg.geometry
    cx, cy = geom.center()
    last_error: Optional[Exception] = None
    for _ in range(MAX_ATTEMPTS):
        n = int(rng.integers(cfg.n_walls_range[0], cfg.n_walls_range[1] + 1))
        f = float(rng.uniform(*cfg.focal_range))
        columns = _draw_wall_columns(rng, n, geom)
        chain = _build_chain(rng, columns, f, geom)
        if chain is None:
            last_error = RuntimeError("chain violated depth bounds")
            continue
        vertices, depths = chain

        xs = [0.0] + [float(c) for c in columns] + [float(geom.width - 1)]
        offsets = f / depths
        ceiling = tuple(Point2(x, cy - o) for x, o in zip(xs, offsets))
        floor = tuple(Point2(x, cy + o) for x, o in zip(xs, offsets))
        annotation = LayoutAnnotation(
            geometry=geom,
            ceiling=ceiling,
            floor=floor,
            walls=tuple(float(c) for c in columns),
            has_ceiling=True,
            has_floor=True,
        )
        flat_clean = encode(annotation)
        flat_noisy = perturb(flat_clean, cfg, rng=rng)
        return SynthSample(
            annotation=annotation,
            flat_clean=flat_clean,
            flat_noisy=flat_noisy,
            camera=CameraModel(f=f, geometry=geom),
            room_plan=_close_plan(vertices),
        )
    raise RuntimeError(f"room sampling failed after {MAX_ATTEMPTS} attempts: {last_error}")


def perturb(
    flat: FlatRepr, cfg: SynthConfig, rng: Optional[np.random.Generator] = None
) -> FlatRepr:
    """Noisy copy of a flat representation; deterministic for a given seed.

    Gaussian noise lands on non-sentinel boundary entries, the wall row is
    clamped back into (0, 1] after its additive noise, and a dropout fraction
    of columns is flipped to the absence sentinel.
    """
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    width = flat.width
    y_ceil = flat.y_ceil.copy()
    y_floor = flat.y_floor.copy()
    p_wall = flat.p_wall.copy()

    for arr, sentinel in ((y_ceil, SENTINEL_CEILING), (y_floor, SENTINEL_FLOOR)):
        noise = rng.standard_normal(width) * cfg.noise_sigma_y
        keep = arr != sentinel
        arr[keep] += noise[keep]
    p_wall = np.clip(p_wall + rng.standard_normal(width) * cfg.noise_sigma_p, 1e-9, 1.0)
    n_drop = round(cfg.dropout_frac * width)
    for arr, sentinel in ((y_ceil, SENTINEL_CEILING), (y_floor, SENTINEL_FLOOR)):
        cols = rng.choice(width, size=n_drop, replace=False)
        arr[cols] = sentinel
    return FlatRepr(
        width=width,
        y_ceil=y_ceil,
        y_floor=y_floor,
        p_wall=p_wall,
        p_ceil=flat.p_ceil,
        p_floor=flat.p_floor,
    )
