"""Minimal line-segment detector for running the pipeline on raw images.

Deliberately small: Sobel gradients, orientation-constrained region growing
from strong-gradient seeds, and a least-squares (principal axis) line fit per
region.  Precomputed segments from file are the first-class input; this
detector just keeps the pipeline runnable end to end without an external
detector.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .layout import ImageGeometry, Point2
from .rectify import LineSegment


@dataclass(frozen=True)
class DetectorConfig:
    min_length_frac: float = 0.02
    magnitude_frac: float = 0.2  # threshold as a fraction of the max gradient
    angle_tol_deg: float = 11.25  # admission tolerance against the region mean
    max_thickness: float = 2.0  # RMS extent across the fitted line, pixels
    min_region_pixels: int = 10


def _to_gray(image: np.ndarray) -> np.ndarray:
    img = np.asarray(image, dtype=np.float64)
    if img.ndim == 3:
        img = img[..., :3] @ np.array([0.299, 0.587, 0.114])
    return img


def _grow_region(seed, orient, candidate, used, tol):
    """Collect 8-connected pixels whose orientation tracks the region mean.

    Orientations are axial (mod pi), so the running mean is kept as a summed
    double-angle unit vector.
    """
    h, w = orient.shape
    queue = deque([seed])
    used[seed] = True
    pixels = [seed]
    mean_vec = np.array([math.cos(2 * orient[seed]), math.sin(2 * orient[seed])])
    while queue:
        y, x = queue.popleft()
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                ny, nx = y + dy, x + dx
                if ny < 0 or nx < 0 or ny >= h or nx >= w:
                    continue
                if used[ny, nx] or not candidate[ny, nx]:
                    continue
                mean_angle = 0.5 * math.atan2(mean_vec[1], mean_vec[0])
                diff = (orient[ny, nx] - mean_angle) % math.pi
                diff = min(diff, math.pi - diff)
                if diff > tol:
                    continue
                used[ny, nx] = True
                pixels.append((ny, nx))
                queue.append((ny, nx))
                a = orient[ny, nx]
                mean_vec += (math.cos(2 * a), math.sin(2 * a))
    return pixels


def detect_segments(image: np.ndarray, cfg: DetectorConfig = DetectorConfig()) -> list[LineSegment]:
    """Fit one segment per orientation-coherent gradient region."""
    gray = _to_gray(image)
    h, w = gray.shape
    geometry = ImageGeometry(width=w, height=h)
    min_length = cfg.min_length_frac * geometry.diagonal()

    gx = ndimage.sobel(gray, axis=1)
    gy = ndimage.sobel(gray, axis=0)
    mag = np.hypot(gx, gy)
    if mag.max() <= 0:
        return []
    candidate = mag >= cfg.magnitude_frac * mag.max()

    # line orientation is perpendicular to the gradient, folded into [0, pi)
    orient = np.mod(np.arctan2(gy, gx) + math.pi / 2.0, math.pi)
    tol = math.radians(cfg.angle_tol_deg)
    used = ~candidate

    ys, xs = np.nonzero(candidate)
    order = np.argsort(mag[ys, xs])[::-1]
    segments: list[LineSegment] = []
    for idx in order:
        seed = (int(ys[idx]), int(xs[idx]))
        if used[seed]:
            continue
        pixels = _grow_region(seed, orient, candidate, used, tol)
        if len(pixels) < cfg.min_region_pixels:
            continue
        pts = np.array(pixels, dtype=np.float64)[:, ::-1]  # (x, y)
        centroid = pts.mean(axis=0)
        centered = pts - centroid
        cov = centered.T @ centered / len(pts)
        eigvals, eigvecs = np.linalg.eigh(cov)
        axis = eigvecs[:, np.argmax(eigvals)]
        proj = centered @ axis
        lo, hi = proj.min(), proj.max()
        if hi - lo < min_length:
            continue
        across = centered @ eigvecs[:, np.argmin(eigvals)]
        if math.sqrt(float(np.mean(across**2))) > cfg.max_thickness:
            continue  # blob or junction, not a line
        p0 = centroid + lo * axis
        p1 = centroid + hi * axis
        segments.append(
            LineSegment(a=Point2(float(p0[0]), float(p0[1])), b=Point2(float(p1[0]), float(p1[1])))
        )
    return segments
