"""Decode a (possibly noisy) flat representation into layout corners.

The decoder first locates wall columns by smoothing the wall-existence row
and finding windowed peaks, then routes each boundary through one of four
paths: gated off by the presence classifier, pinned to the top/bottom border
when almost every column is out of the image plane, a straight-line fit when
no wall column was found, or an exact dynamic program that picks one corner
per candidate set minimizing the summed point-to-line distance of the raw
per-column boundary estimates.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .flat import SENTINEL_CEILING, SENTINEL_FLOOR, FlatRepr
from .layout import Boundary, ImageGeometry, LayoutAnnotation, Point2


@dataclass(frozen=True)
class DecoderConfig:
    """Tunables for peak finding and boundary routing."""

    smooth_frac: float = 0.05
    peak_threshold: float = 0.5
    oob_frac: float = 0.99
    presence_threshold: float = 0.5
    raw_margin: float = 0.05
    segment_clamp: bool = False

    def __post_init__(self) -> None:
        if not 0.0 < self.smooth_frac < 0.5:
            raise ValueError("smooth_frac must lie in (0, 0.5)")
        if not 0.0 < self.peak_threshold < 1.0:
            raise ValueError("peak_threshold must lie in (0, 1)")
        if not 0.5 < self.oob_frac <= 1.0:
            raise ValueError("oob_frac must lie in (0.5, 1]")
        if self.raw_margin < 0.0:
            raise ValueError("raw_margin must be non-negative")


@dataclass(frozen=True)
class WallPeaks:
    """Detected wall-wall boundary columns, strictly increasing."""

    xs: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "xs", tuple(int(x) for x in self.xs))
        if any(b <= a for a, b in zip(self.xs, self.xs[1:])):
            raise ValueError(f"peak columns must be strictly increasing: {self.xs}")

    @property
    def n(self) -> int:
        return len(self.xs)


@dataclass(frozen=True)
class CandidateSets:
    """Corner candidate sets and the raw boundary points between them.

    sets[0] / sets[-1] are border sets (dropped when a peak already sits on
    the corresponding image edge); the interior sets hold a full column of
    integer-y candidates at each peak.  raw_points[i] holds the raw boundary
    samples strictly between the x positions of sets[i] and sets[i+1].
    """

    sets: tuple[np.ndarray, ...]
    raw_points: tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        if len(self.sets) < 2:
            raise ValueError("need at least two candidate sets")
        if len(self.raw_points) != len(self.sets) - 1:
            raise ValueError("need exactly one raw-point set per transition")
        for s in self.sets:
            if len(s) == 0:
                raise ValueError("candidate set is empty")


@dataclass(frozen=True)
class DpTable:
    """Accumulated losses per candidate set plus backpointers."""

    values: tuple[np.ndarray, ...]
    parents: tuple[np.ndarray, ...]


@dataclass(frozen=True)
class DpResult:
    corners: tuple[Point2, ...]
    loss: float  # total distance divided by the raw point count
    total: float  # plain summed distance (what the DP minimizes)
    table: DpTable


@dataclass(frozen=True)
class BoundaryResult:
    """Decoded corners for one boundary plus the routing path taken.

    corners is None when the boundary is absent; paths are "gated",
    "out-of-plane", "line-fit" and "dp".
    """

    corners: Optional[tuple[Point2, ...]]
    path: str
    loss: Optional[float] = None


@dataclass(frozen=True)
class DecodeResult:
    annotation: LayoutAnnotation
    peaks: WallPeaks
    ceiling: BoundaryResult
    floor: BoundaryResult


def smooth(p: Sequence[float], window: int) -> np.ndarray:
    """Centered moving average with edge replication; length-preserving."""
    arr = np.asarray(p, dtype=np.float64)
    if window < 1 or window % 2 == 0:
        raise ValueError(f"window must be a positive odd integer, got {window}")
    if window > arr.size:
        raise ValueError(f"window {window} larger than input length {arr.size}")
    if window == 1:
        return arr.copy()
    half = window // 2
    padded = np.pad(arr, half, mode="edge")
    kernel = np.full(window, 1.0 / window)
    return np.convolve(padded, kernel, mode="valid")


def smoothing_window(width: int, smooth_frac: float) -> int:
    """Largest odd window <= max(3, round(smooth_frac * width)), clamped to width."""
    w = max(3, round(smooth_frac * width))
    if w > width:
        w = width
    if w % 2 == 0:
        w -= 1
    return max(w, 1)


def find_wall_peaks(p_wall: Sequence[float], cfg: DecoderConfig = DecoderConfig()) -> WallPeaks:
    """Wall columns: windowed strict maxima of the smoothed existence row.

    A column qualifies when its smoothed value is the maximum over the
    centered window (ties go to the smallest index) and reaches the peak
    threshold.
    """
    arr = np.asarray(p_wall, dtype=np.float64)
    window = smoothing_window(arr.size, cfg.smooth_frac)
    s = smooth(arr, window)
    half = window // 2
    xs = []
    for i in range(s.size):
        if s[i] < cfg.peak_threshold:
            continue
        lo = max(0, i - half)
        hi = min(s.size, i + half + 1)
        win = s[lo:hi]
        if s[i] == win.max() and lo + int(np.argmax(win)) == i:
            xs.append(i)
    return WallPeaks(xs=tuple(xs))


def _point_distance_sum(a: np.ndarray, p: np.ndarray) -> np.ndarray:
    # a: (k, 1, 1) pairs collapsed; returns sum of |p - a| per row
    return np.hypot(p[None, :, 0] - a[:, 0:1], p[None, :, 1] - a[:, 1:2]).sum(axis=1)


def _loss_matrix_direct(
    a_pts: np.ndarray, b_pts: np.ndarray, p_pts: np.ndarray, segment_clamp: bool, chunk: int = 4_000_000
) -> np.ndarray:
    """Summed raw-point distance for every (a, b) candidate pair, by brute broadcast."""
    k_n, j_n, r_n = len(a_pts), len(b_pts), len(p_pts)
    out = np.zeros((k_n, j_n))
    rows = max(1, chunk // max(1, j_n * r_n))
    bx = b_pts[None, :, None, 0]
    by = b_pts[None, :, None, 1]
    px = p_pts[None, None, :, 0]
    py = p_pts[None, None, :, 1]
    for k0 in range(0, k_n, rows):
        a = a_pts[k0 : k0 + rows]
        ax = a[:, None, None, 0]
        ay = a[:, None, None, 1]
        ux = bx - ax
        uy = by - ay
        if segment_clamp:
            wx = px - ax
            wy = py - ay
            l2 = ux * ux + uy * uy
            t = np.clip((wx * ux + wy * uy) / np.where(l2 > 0, l2, 1.0), 0.0, 1.0)
            out[k0 : k0 + rows] = np.hypot(wx - t * ux, wy - t * uy).sum(axis=2)
        else:
            length = np.hypot(ux, uy)[:, :, 0]
            sums = np.abs(ux * (py - ay) - uy * (px - ax)).sum(axis=2)
            d = sums / np.where(length > 0, length, 1.0)
            degenerate = length == 0
            if degenerate.any():
                # a == b: the limit is the distance to the point itself
                point = _point_distance_sum(a, p_pts)
                d = np.where(degenerate, point[:, None], d)
            out[k0 : k0 + rows] = d
    return out


def _loss_matrix_bcol(a_pts: np.ndarray, b_pts: np.ndarray, p_pts: np.ndarray) -> np.ndarray:
    """Same sums as the direct product when every b shares one x position.

    With b = (xb, y), the unnormalized distance of raw point r to the line
    through a_k and b is |C[k,r] - y * G[k,r]|, piecewise linear in y, so each
    row reduces to sorted weighted prefix sums over the breakpoints C/G.
    """
    xb = float(b_pts[0, 0])
    by = b_pts[:, 1]
    ax = a_pts[:, 0:1]
    ay = a_pts[:, 1:2]
    px = p_pts[None, :, 0]
    py = p_pts[None, :, 1]

    c = (xb - ax) * (py - ay) + ay * (px - ax)
    g = px - ax
    absg = np.abs(g)
    zero = absg == 0.0
    const = np.where(zero, np.abs(c), 0.0).sum(axis=1)
    t = np.where(zero, 0.0, c / np.where(zero, 1.0, g))
    wgt = np.where(zero, 0.0, absg)

    order = np.argsort(t, axis=1)
    t_s = np.take_along_axis(t, order, axis=1)
    w_s = np.take_along_axis(wgt, order, axis=1)
    k_n = len(a_pts)
    w_cum = np.concatenate([np.zeros((k_n, 1)), np.cumsum(w_s, axis=1)], axis=1)
    tw_cum = np.concatenate([np.zeros((k_n, 1)), np.cumsum(t_s * w_s, axis=1)], axis=1)

    sums = np.empty((k_n, len(b_pts)))
    for k in range(k_n):
        idx = np.searchsorted(t_s[k], by, side="right")
        w_le = w_cum[k][idx]
        tw_le = tw_cum[k][idx]
        sums[k] = by * (2.0 * w_le - w_cum[k, -1]) + (tw_cum[k, -1] - 2.0 * tw_le) + const[k]

    length = np.hypot(xb - ax, by[None, :] - ay)
    d = sums / np.where(length > 0, length, 1.0)
    degenerate = length == 0
    if degenerate.any():
        point = _point_distance_sum(a_pts, p_pts)
        d = np.where(degenerate, point[:, None], d)
    return d


def _segment_loss_matrix(
    a_pts: np.ndarray, b_pts: np.ndarray, p_pts: np.ndarray, segment_clamp: bool
) -> np.ndarray:
    if len(p_pts) == 0:
        return np.zeros((len(a_pts), len(b_pts)))
    if segment_clamp:
        return _loss_matrix_direct(a_pts, b_pts, p_pts, segment_clamp=True)
    if np.ptp(b_pts[:, 0]) == 0.0:
        return _loss_matrix_bcol(a_pts, b_pts, p_pts)
    if np.ptp(a_pts[:, 0]) == 0.0:
        return _loss_matrix_bcol(b_pts, a_pts, p_pts).T
    return _loss_matrix_direct(a_pts, b_pts, p_pts, segment_clamp=False)


def dp_fit(
    raw_points: Sequence[np.ndarray],
    candidate_sets: Sequence[np.ndarray],
    segment_clamp: bool = False,
) -> DpResult:
    """Select one point per candidate set minimizing the summed raw-point distance.

    Each raw point in raw_points[i] is charged its perpendicular distance to
    the infinite line through the selected points of candidate_sets[i] and
    candidate_sets[i+1] (distance to the clamped segment with segment_clamp).
    The recursion accumulates the best reachable loss per candidate and the
    chain is recovered through backpointers, so the result is exactly the
    global minimum over all selections.
    """
    sets = [np.asarray(s, dtype=np.float64).reshape(-1, 2) for s in candidate_sets]
    raws = [np.asarray(p, dtype=np.float64).reshape(-1, 2) for p in raw_points]
    if len(sets) < 2:
        raise ValueError("need at least two candidate sets")
    if len(raws) != len(sets) - 1:
        raise ValueError(f"expected {len(sets) - 1} raw-point sets, got {len(raws)}")
    for s in sets:
        if len(s) == 0:
            raise ValueError("candidate set is empty")

    values = np.zeros(len(sets[0]))
    stage_values = [values]
    parents: list[np.ndarray] = []
    for i in range(len(sets) - 1):
        dmat = _segment_loss_matrix(sets[i], sets[i + 1], raws[i], segment_clamp)
        totals = values[:, None] + dmat
        best = np.argmin(totals, axis=0)
        values = np.take_along_axis(totals, best[None, :], axis=0)[0]
        parents.append(best)
        stage_values.append(values)

    end = int(np.argmin(values))
    total = float(values[end])
    chain = [end]
    for back in reversed(parents):
        chain.append(int(back[chain[-1]]))
    chain.reverse()
    corners = tuple(Point2(float(sets[i][c, 0]), float(sets[i][c, 1])) for i, c in enumerate(chain))
    count = sum(len(p) for p in raws)
    loss = total / count if count else 0.0
    table = DpTable(values=tuple(stage_values), parents=tuple(parents))
    return DpResult(corners=corners, loss=loss, total=total, table=table)


def build_candidate_sets(
    raw_xy: np.ndarray, peaks: WallPeaks, geometry: ImageGeometry
) -> CandidateSets:
    """Candidate sets at the peak columns plus border sets, raw points split between.

    The left border set holds the full first image column plus the top and
    bottom border pixels left of the first peak (mirrored on the right).  A
    peak sitting directly on an image edge leaves no room for that border
    set; it is dropped together with its raw-point segment and the corner
    chain starts (ends) at the peak column itself.
    """
    if peaks.n == 0:
        raise ValueError("candidate sets need at least one peak column")
    w, h = geometry.width, geometry.height
    cols = peaks.xs
    if cols[0] < 0 or cols[-1] > w - 1:
        raise ValueError(f"peak columns {cols} outside image of width {w}")
    col_ys = np.arange(h, dtype=np.float64)

    def border_set(edge_x: int, top_lo: int, top_hi: int) -> np.ndarray:
        edge = np.column_stack([np.full(h, float(edge_x)), col_ys])
        span = np.arange(top_lo, top_hi, dtype=np.float64)
        top = np.column_stack([span, np.zeros_like(span)])
        bottom = np.column_stack([span, np.full_like(span, float(h - 1))])
        return np.concatenate([edge, top, bottom], axis=0)

    sets: list[np.ndarray] = []
    has_left = cols[0] > 0
    has_right = cols[-1] < w - 1
    if has_left:
        sets.append(border_set(0, 1, cols[0]))
    for c in cols:
        sets.append(np.column_stack([np.full(h, float(c)), col_ys]))
    if has_right:
        sets.append(border_set(w - 1, cols[-1] + 1, w - 1))

    pts = np.asarray(raw_xy, dtype=np.float64).reshape(-1, 2)
    edges = [-np.inf, *cols, np.inf]
    segments: list[np.ndarray] = []
    for lo, hi in zip(edges, edges[1:]):
        keep = (pts[:, 0] > lo) & (pts[:, 0] < hi)
        segments.append(pts[keep])
    if not has_left:
        segments = segments[1:]
    if not has_right:
        segments = segments[:-1]
    return CandidateSets(sets=tuple(sets), raw_points=tuple(segments))


def _usable_raw(y_raw: np.ndarray, which: Boundary, geometry: ImageGeometry, cfg: DecoderConfig):
    """Columns carrying real boundary evidence, as (x, y) image points.

    Exact sentinel columns are absence markers, not samples; everything else
    is kept within a small margin beyond the image so near-edge evidence
    still guides the fit.
    """
    h1 = geometry.height - 1
    y_img = y_raw * h1
    sentinel = SENTINEL_CEILING if which == "ceiling" else SENTINEL_FLOOR
    usable = (y_raw != sentinel) & (y_img >= -cfg.raw_margin * h1) & (y_img <= (1.0 + cfg.raw_margin) * h1)
    xs = np.nonzero(usable)[0]
    return np.column_stack([xs.astype(np.float64), y_img[usable]])


def decode_boundary(
    y_raw: Sequence[float],
    peaks: WallPeaks,
    presence: float,
    which: Boundary,
    geometry: ImageGeometry,
    cfg: DecoderConfig = DecoderConfig(),
) -> BoundaryResult:
    """Decode one boundary row into its corner polyline.

    Routing order: the presence gate, the out-of-plane case (corners pinned
    to the top or bottom border at the peak columns), the no-peak case (a
    least-squares line over the usable columns), then the dynamic program.
    """
    arr = np.asarray(y_raw, dtype=np.float64)
    w, h = geometry.width, geometry.height
    if arr.size != w:
        raise ValueError(f"boundary row length {arr.size} does not match width {w}")

    if presence < cfg.presence_threshold:
        return BoundaryResult(corners=None, path="gated")

    y_img = arr * (h - 1)
    oob = (y_img < 0.0) | (y_img > h - 1)
    if oob.mean() > cfg.oob_frac:
        pinned = 0.0 if which == "ceiling" else float(h - 1)
        corners = tuple(Point2(float(x), pinned) for x in peaks.xs)
        return BoundaryResult(corners=corners, path="out-of-plane")

    raw = _usable_raw(arr, which, geometry, cfg)
    if peaks.n == 0:
        if len(raw) < 2:
            return BoundaryResult(corners=None, path="line-fit")
        slope, intercept = np.polyfit(raw[:, 0], raw[:, 1], 1)
        y0 = float(np.clip(intercept, 0.0, h - 1))
        y1 = float(np.clip(slope * (w - 1) + intercept, 0.0, h - 1))
        corners = (Point2(0.0, y0), Point2(float(w - 1), y1))
        return BoundaryResult(corners=corners, path="line-fit")

    candidate_sets = build_candidate_sets(raw, peaks, geometry)
    fit = dp_fit(candidate_sets.raw_points, candidate_sets.sets, cfg.segment_clamp)
    return BoundaryResult(corners=fit.corners, path="dp", loss=fit.loss)


def decode(
    flat: FlatRepr, geometry: ImageGeometry, cfg: DecoderConfig = DecoderConfig()
) -> DecodeResult:
    """Decode a full flat representation into a layout annotation."""
    if geometry.width != flat.width:
        raise ValueError(f"geometry width {geometry.width} != flat width {flat.width}")
    peaks = find_wall_peaks(flat.p_wall, cfg)
    ceiling = decode_boundary(flat.y_ceil, peaks, flat.p_ceil, "ceiling", geometry, cfg)
    floor = decode_boundary(flat.y_floor, peaks, flat.p_floor, "floor", geometry, cfg)
    ceil_corners = ceiling.corners or ()
    floor_corners = floor.corners or ()
    annotation = LayoutAnnotation(
        geometry=geometry,
        ceiling=ceil_corners,
        floor=floor_corners,
        walls=tuple(float(x) for x in peaks.xs),
        has_ceiling=bool(ceil_corners),
        has_floor=bool(floor_corners),
    )
    return DecodeResult(annotation=annotation, peaks=peaks, ceiling=ceiling, floor=floor)
