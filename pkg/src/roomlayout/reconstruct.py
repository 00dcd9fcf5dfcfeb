"""Single-view 3D lifting: focal recovery, corner lifting, mesh export.

World convention: camera at the origin, X right, Y forward (into the scene),
Z up, floor plane Z = -1 and ceiling plane Z = +1 (camera halfway up a two
meter room).  Image pixels use centered coordinates with y pointing DOWN, so
projection reads x = f*X/Y, y = -f*Z/Y; a floor point therefore lands in the
lower half image (y > 0) and a ceiling point in the upper half.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .decode import WallPeaks
from .layout import ImageGeometry, LayoutAnnotation, Point2, WALL_MATCH_TOL

FOCAL_DENOMINATOR_TOL = 1e-8
DEFAULT_FOV_DEG = 60.0


@dataclass(frozen=True)
class CameraModel:
    """Pinhole camera: focal length in pixels plus the image it belongs to."""

    f: float
    geometry: ImageGeometry

    def __post_init__(self) -> None:
        if not (math.isfinite(self.f) and self.f > 0):
            raise ValueError(f"focal length must be positive and finite, got {self.f}")


@dataclass(frozen=True)
class WorldPoint:
    x: float  # right, meters
    y: float  # forward, meters
    z: float  # up, meters


@dataclass(frozen=True)
class RoomMesh:
    """Piecewise-planar room: floor and ceiling polylines plus wall quads."""

    floor_polygon: tuple[WorldPoint, ...] = ()
    ceiling_polygon: tuple[WorldPoint, ...] = ()
    wall_quads: tuple[tuple[WorldPoint, WorldPoint, WorldPoint, WorldPoint], ...] = ()

    def __post_init__(self) -> None:
        if any(p.z != -1.0 for p in self.floor_polygon):
            raise ValueError("floor vertices must have z = -1 exactly")
        if any(p.z != 1.0 for p in self.ceiling_polygon):
            raise ValueError("ceiling vertices must have z = +1 exactly")


def default_focal(geometry: ImageGeometry, fov_deg: float = DEFAULT_FOV_DEG) -> float:
    """Fallback focal length for a given horizontal field of view."""
    return (geometry.width / 2.0) / math.tan(math.radians(fov_deg) / 2.0)


def solve_focal(p0: Point2, p1: Point2, p2: Point2) -> float:
    """Focal length from three centered floor pixels whose 3D angle at p0 is 90 deg.

    Solves the closed-form ratio

        f^2 = (x1*x2*y0^2 + x0^2*y1*y2 - x0*x1*y0*y2 - x0*x2*y0*y1)
              / (y0*y1 + y0*y2 - y0^2 - y1*y2)

    The denominator factors as -(y0-y1)(y0-y2): a leg at the same image depth
    as the vertex (fronto-parallel) is degenerate and raises, as does a triple
    whose squared focal comes out non-positive.
    """
    x0, y0 = p0.x, p0.y
    x1, y1 = p1.x, p1.y
    x2, y2 = p2.x, p2.y
    denominator = y0 * y1 + y0 * y2 - y0 * y0 - y1 * y2
    if abs(denominator) < FOCAL_DENOMINATOR_TOL:
        raise ValueError("degenerate corner triple: a leg is fronto-parallel (y0 ~ y1 or y0 ~ y2)")
    numerator = x1 * x2 * y0 * y0 + x0 * x0 * y1 * y2 - x0 * x1 * y0 * y2 - x0 * x2 * y0 * y1
    f2 = numerator / denominator
    if f2 <= 0.0:
        raise ValueError(f"inconsistent corner triple: squared focal {f2} is not positive")
    return math.sqrt(f2)


def pick_right_angle_triple(
    floor_corners: Sequence[Point2], walls: WallPeaks, geometry: ImageGeometry
) -> tuple[Point2, Point2, Point2]:
    """The most central wall-column floor corner with its two polyline neighbors.

    Returns (vertex, left neighbor, right neighbor) converted to centered
    coordinates, ready for solve_focal.  Corners on a wall column are the
    true wall-wall intersections; the one nearest the image center tends to
    have the best-conditioned geometry.
    """
    corners = list(floor_corners)
    if len(corners) < 3:
        raise ValueError(f"need at least three floor corners, got {len(corners)}")
    cx, cy = geometry.center()
    wall_xs = [float(x) for x in walls.xs]
    best = None
    for i in range(1, len(corners) - 1):
        p = corners[i]
        if p.x <= 0.0 or p.x >= geometry.width - 1:
            continue
        if not any(abs(p.x - wx) <= WALL_MATCH_TOL for wx in wall_xs):
            continue
        score = abs(p.x - cx)
        if best is None or score < best[0]:
            best = (score, i)
    if best is None:
        raise ValueError("no interior floor corner on a wall column")
    i = best[1]

    def center(p: Point2) -> Point2:
        return Point2(p.x - cx, p.y - cy)

    return center(corners[i]), center(corners[i - 1]), center(corners[i + 1])


def _lift(p: Point2, f: float, z: float) -> WorldPoint:
    # y = -f*z/Y  =>  Y = -f*z/y;  x = f*X/Y  =>  X = x*Y/f
    depth = -f * z / p.y
    return WorldPoint(x=p.x * depth / f, y=depth, z=z)


def project(point: WorldPoint, cam: CameraModel) -> Point2:
    """World point back to centered pixel coordinates."""
    if point.y <= 0:
        raise ValueError(f"point {point} is not in front of the camera")
    return Point2(cam.f * point.x / point.y, -cam.f * point.z / point.y)


def lift_layout(
    layout: LayoutAnnotation, cam: CameraModel, wall_depths: str = "floor"
) -> RoomMesh:
    """Lift layout corners onto the fixed-height floor and ceiling planes.

    Wall quads take their depths from one boundary's corners (the floor by
    default, wall_depths="ceiling" to flip the preference; an absent boundary
    always yields to the present one); the opposite plane's quad vertices
    reuse the same (X, Y) so every wall stays exactly vertical.
    """
    if wall_depths not in ("floor", "ceiling"):
        raise ValueError(f"wall_depths must be 'floor' or 'ceiling', got {wall_depths!r}")
    cx, cy = cam.geometry.center()

    def centered(p: Point2) -> Point2:
        return Point2(p.x - cx, p.y - cy)

    floor_pts = [centered(p) for p in layout.floor]
    ceil_pts = [centered(p) for p in layout.ceiling]
    for p in floor_pts:
        if p.y <= 0:
            raise ValueError(f"floor corner with centered y={p.y} would lift behind the camera")
    for p in ceil_pts:
        if p.y >= 0:
            raise ValueError(f"ceiling corner with centered y={p.y} would lift behind the camera")

    floor_world = tuple(_lift(p, cam.f, -1.0) for p in floor_pts)
    ceiling_world = tuple(_lift(p, cam.f, 1.0) for p in ceil_pts)

    prefer_floor = wall_depths == "floor" or not ceiling_world
    if prefer_floor and floor_world:
        quad_base = floor_world
    else:
        quad_base = tuple(WorldPoint(p.x, p.y, -1.0) for p in ceiling_world)
    quads = []
    for a, b in zip(quad_base, quad_base[1:]):
        quads.append(
            (
                WorldPoint(a.x, a.y, -1.0),
                WorldPoint(b.x, b.y, -1.0),
                WorldPoint(b.x, b.y, 1.0),
                WorldPoint(a.x, a.y, 1.0),
            )
        )
    return RoomMesh(
        floor_polygon=floor_world,
        ceiling_polygon=ceiling_world,
        wall_quads=tuple(quads),
    )


def _oriented(face: Sequence[WorldPoint]) -> list[WorldPoint]:
    """Order face vertices counter-clockwise as seen from the camera origin."""
    pts = np.array([(p.x, p.y, p.z) for p in face])
    if len(pts) < 3:
        return list(face)
    normal = np.zeros(3)
    for i in range(len(pts)):  # Newell's method
        a, b = pts[i], pts[(i + 1) % len(pts)]
        normal += np.cross(a, b)
    centroid = pts.mean(axis=0)
    # right-hand normal toward the origin <=> CCW from inside
    if normal @ centroid > 0:
        return list(reversed(face))
    return list(face)


def export_obj(mesh: RoomMesh) -> bytes:
    """Serialize a room mesh as Wavefront OBJ text.

    Vertices are written with six decimals and deduplicated by exact
    coordinate equality; faces are the floor polygon, the ceiling polygon,
    then the wall quads, all counter-clockwise seen from inside the room.
    """
    vertex_index: dict[tuple[float, float, float], int] = {}
    faces: list[list[int]] = []

    def add_face(points: Sequence[WorldPoint]) -> None:
        if len(points) < 3:
            return
        ids = []
        for p in _oriented(points):
            key = (p.x, p.y, p.z)
            if key not in vertex_index:
                vertex_index[key] = len(vertex_index) + 1
            ids.append(vertex_index[key])
        faces.append(ids)

    add_face(mesh.floor_polygon)
    add_face(mesh.ceiling_polygon)
    for quad in mesh.wall_quads:
        add_face(quad)

    lines = []
    for (x, y, z) in vertex_index:
        lines.append(f"v {x:.6f} {y:.6f} {z:.6f}")
    for ids in faces:
        lines.append("f " + " ".join(str(i) for i in ids))
    return ("\n".join(lines) + ("\n" if lines else "")).encode("ascii")


def parse_obj_vertices(data: bytes) -> np.ndarray:
    """Vertex coordinates from OBJ text, as an (n, 3) array."""
    rows = []
    for line in data.decode("ascii").splitlines():
        parts = line.split()
        if parts and parts[0] == "v":
            rows.append([float(v) for v in parts[1:4]])
    return np.array(rows, dtype=np.float64).reshape(-1, 3)
