import math

import numpy as np
import pytest

from roomlayout import (
    CameraModel,
    ImageGeometry,
    LayoutAnnotation,
    Point2,
    RoomMesh,
    WallPeaks,
    WorldPoint,
    default_focal,
    export_obj,
    lift_layout,
    parse_obj_vertices,
    pick_right_angle_triple,
    project,
    solve_focal,
)


def project_floor(f, X, Y):
    """Forward pinhole projection of a floor point (Z = -1), centered pixels."""
    return Point2(f * X / Y, f / Y)


def right_angle_triple(f, vertex, theta, l1, l2):
    """Project a floor right angle: legs of lengths l1, l2 rotated by theta."""
    u = np.array([math.cos(theta), math.sin(theta)])
    v = np.array([-math.sin(theta), math.cos(theta)])
    p0 = np.asarray(vertex, dtype=float)
    p1 = p0 + l1 * u
    p2 = p0 + l2 * v
    return tuple(project_floor(f, *p) for p in (p0, p1, p2))


class TestSolveFocal:
    def test_known_triple_rounded_values(self):
        # rounded pixel coordinates recover the focal within 1e-3 relative
        p0 = Point2(100.0, 200.0)
        p1 = Point2(261.678, 145.4545)
        p2 = Point2(-30.3119, 121.2475)
        assert solve_focal(p0, p1, p2) == pytest.approx(400.0, rel=1e-3)

    def test_known_triple_exact_projection(self):
        p0, p1, p2 = right_angle_triple(400.0, (0.5, 2.0), math.radians(30), 1.5, 1.5)
        assert (p0.x, p0.y) == (100.0, 200.0)
        assert solve_focal(p0, p1, p2) == pytest.approx(400.0, rel=1e-12)

    def test_y_negation_invariance(self):
        triple = right_angle_triple(333.0, (0.2, 3.0), 0.4, 1.0, 2.0)
        flipped = [Point2(p.x, -p.y) for p in triple]
        a = solve_focal(*triple)
        b = solve_focal(*flipped)
        assert abs(a - b) <= 1e-12 * a

    def test_scale_equivariance(self):
        triple = right_angle_triple(500.0, (-0.3, 2.5), -0.7, 1.2, 0.8)
        f1 = solve_focal(*triple)
        s = 2.75
        scaled = [Point2(p.x * s, p.y * s) for p in triple]
        assert solve_focal(*scaled) == pytest.approx(s * f1, rel=1e-12)

    def test_fronto_parallel_leg_degenerate(self):
        # y0 == y1 makes the denominator exactly zero
        with pytest.raises(ValueError, match="fronto-parallel"):
            solve_focal(Point2(100, 200), Point2(400, 200), Point2(-30, 120))
        with pytest.raises(ValueError, match="fronto-parallel"):
            solve_focal(Point2(100, 200), Point2(-30, 120), Point2(400, 200))

    def test_inconsistent_triple_raises(self):
        with pytest.raises(ValueError, match="not positive"):
            solve_focal(Point2(0, 10), Point2(5, 20), Point2(5, 30))


class TestPickRightAngleTriple:
    geom = ImageGeometry(256, 256)

    def corners(self, xs, y=200.0):
        return tuple(Point2(float(x), y + 0.01 * i) for i, x in enumerate(xs))

    def test_three_corners_picks_middle(self):
        corners = self.corners([0, 100, 255])
        p0, p1, p2 = pick_right_angle_triple(corners, WallPeaks(xs=(100,)), self.geom)
        cx, cy = self.geom.center()
        assert p0.x == 100 - cx
        assert p1.x == 0 - cx
        assert p2.x == 255 - cx

    def test_five_corners_nearest_center(self):
        corners = self.corners([0, 60, 128, 200, 255])
        p0, _, _ = pick_right_angle_triple(corners, WallPeaks(xs=(60, 128, 200)), self.geom)
        assert p0.x == 128 - self.geom.center()[0]

    def test_two_corners_error(self):
        with pytest.raises(ValueError, match="three"):
            pick_right_angle_triple(self.corners([0, 255]), WallPeaks(xs=()), self.geom)

    def test_no_interior_corner_error(self):
        corners = self.corners([0, 100, 255])
        with pytest.raises(ValueError, match="interior"):
            pick_right_angle_triple(corners, WallPeaks(xs=(90,)), self.geom)


class TestLiftLayout:
    geom = ImageGeometry(256, 256)
    cam = CameraModel(f=400.0, geometry=geom)

    def centered_annotation(self):
        cx, cy = self.geom.center()
        return LayoutAnnotation(
            geometry=self.geom,
            ceiling=(Point2(0, cy - 100), Point2(100, cy - 80), Point2(255, cy - 90)),
            floor=(Point2(0, cy + 100), Point2(100, cy + 80), Point2(255, cy + 90)),
            walls=(100.0,),
        )

    def test_floor_corner_formula(self):
        geom = ImageGeometry(512, 512)
        cx, cy = geom.center()
        ann = LayoutAnnotation(
            geometry=geom,
            floor=(Point2(cx + 0.0, cy + 200.0), Point2(cx + 100.0, cy + 200.0)),
            walls=(),
            has_ceiling=False,
        )
        mesh = lift_layout(ann, CameraModel(f=400.0, geometry=geom))
        p = mesh.floor_polygon[1]  # centered (100, 200): Y = 2, X = 0.5
        assert (p.x, p.y, p.z) == (0.5, 2.0, -1.0)

    def test_ceiling_corner_formula(self):
        cx, cy = self.geom.center()
        ann = LayoutAnnotation(
            geometry=self.geom,
            ceiling=(Point2(cx + 0.0, cy - 100.0), Point2(cx + 50.0, cy - 100.0)),
            walls=(),
            has_floor=False,
        )
        mesh = lift_layout(ann, self.cam)
        p = mesh.ceiling_polygon[0]  # centered (0, -100): Y = 4, X = 0
        assert (p.x, p.y, p.z) == (0.0, 4.0, 1.0)

    def test_reprojection_round_trip(self):
        ann = self.centered_annotation()
        mesh = lift_layout(ann, self.cam)
        cx, cy = self.geom.center()
        for world, src in zip(mesh.floor_polygon, ann.floor):
            pix = project(world, self.cam)
            assert abs(pix.x - (src.x - cx)) <= 1e-9
            assert abs(pix.y - (src.y - cy)) <= 1e-9
        for world, src in zip(mesh.ceiling_polygon, ann.ceiling):
            pix = project(world, self.cam)
            assert abs(pix.x - (src.x - cx)) <= 1e-9
            assert abs(pix.y - (src.y - cy)) <= 1e-9

    def test_wall_quads_vertical_from_floor_depths(self):
        mesh = lift_layout(self.centered_annotation(), self.cam)
        assert len(mesh.wall_quads) == 2
        for quad, a, b in zip(mesh.wall_quads, mesh.floor_polygon, mesh.floor_polygon[1:]):
            assert {p.z for p in quad} == {-1.0, 1.0}
            assert (quad[0].x, quad[0].y) == (a.x, a.y)
            assert (quad[3].x, quad[3].y) == (a.x, a.y)  # ceiling vertex shares X, Y

    def test_wall_depth_preference_flips_to_ceiling(self):
        ann = self.centered_annotation()
        mesh = lift_layout(ann, self.cam, wall_depths="ceiling")
        for quad, c in zip(mesh.wall_quads, mesh.ceiling_polygon):
            assert (quad[0].x, quad[0].y) == (c.x, c.y)
        with pytest.raises(ValueError, match="wall_depths"):
            lift_layout(ann, self.cam, wall_depths="walls")

    def test_ceiling_only_mirror_rule(self):
        cx, cy = self.geom.center()
        ann = LayoutAnnotation(
            geometry=self.geom,
            ceiling=(Point2(0, cy - 90), Point2(128, cy - 70), Point2(255, cy - 80)),
            walls=(128.0,),
            has_floor=False,
        )
        mesh = lift_layout(ann, self.cam)
        assert mesh.floor_polygon == ()
        assert len(mesh.wall_quads) == 2
        for quad, c in zip(mesh.wall_quads, mesh.ceiling_polygon):
            assert (quad[0].x, quad[0].y, quad[0].z) == (c.x, c.y, -1.0)

    def test_wrong_sign_corner_raises(self):
        cx, cy = self.geom.center()
        ann = LayoutAnnotation(
            geometry=self.geom,
            floor=(Point2(0, cy - 10), Point2(255, cy - 5)),
            has_ceiling=False,
        )
        with pytest.raises(ValueError, match="behind"):
            lift_layout(ann, self.cam)

    def test_fixed_plane_heights(self):
        mesh = lift_layout(self.centered_annotation(), self.cam)
        assert all(p.z == -1.0 for p in mesh.floor_polygon)
        assert all(p.z == 1.0 for p in mesh.ceiling_polygon)


class TestExportObj:
    def box_mesh(self):
        lo, hi = -1.5, 1.5
        floor = [
            WorldPoint(lo, 1.0, -1.0),
            WorldPoint(hi, 1.0, -1.0),
            WorldPoint(hi, 4.0, -1.0),
            WorldPoint(lo, 4.0, -1.0),
        ]
        ceiling = [WorldPoint(p.x, p.y, 1.0) for p in floor]
        quads = []
        for i in range(4):
            a, b = floor[i], floor[(i + 1) % 4]
            quads.append(
                (
                    WorldPoint(a.x, a.y, -1.0),
                    WorldPoint(b.x, b.y, -1.0),
                    WorldPoint(b.x, b.y, 1.0),
                    WorldPoint(a.x, a.y, 1.0),
                )
            )
        return RoomMesh(
            floor_polygon=tuple(floor), ceiling_polygon=tuple(ceiling), wall_quads=tuple(quads)
        )

    def test_empty_mesh_is_valid_empty_file(self):
        data = export_obj(RoomMesh())
        assert data == b""
        assert parse_obj_vertices(data).shape == (0, 3)

    def test_single_quad(self):
        quad = (
            WorldPoint(0, 1, -1.0),
            WorldPoint(1, 1, -1.0),
            WorldPoint(1, 1, 1.0),
            WorldPoint(0, 1, 1.0),
        )
        text = export_obj(RoomMesh(wall_quads=(quad,))).decode()
        lines = text.strip().splitlines()
        assert sum(1 for l in lines if l.startswith("v ")) == 4
        face_lines = [l for l in lines if l.startswith("f ")]
        assert len(face_lines) == 1
        assert sorted(face_lines[0].split()[1:]) == ["1", "2", "3", "4"]

    def test_box_room_dedup(self):
        text = export_obj(self.box_mesh()).decode()
        lines = text.strip().splitlines()
        assert sum(1 for l in lines if l.startswith("v ")) == 8
        assert sum(1 for l in lines if l.startswith("f ")) == 6

    def test_faces_ccw_from_inside(self):
        data = export_obj(self.box_mesh())
        verts = parse_obj_vertices(data)
        for line in data.decode().splitlines():
            if not line.startswith("f "):
                continue
            ids = [int(v) - 1 for v in line.split()[1:]]
            pts = verts[ids]
            normal = np.zeros(3)
            for i in range(len(pts)):
                normal += np.cross(pts[i], pts[(i + 1) % len(pts)])
            centroid = pts.mean(axis=0)
            assert normal @ centroid < 0  # right-hand normal points at the origin

    def test_reparse_matches_vertices(self):
        mesh = self.box_mesh()
        verts = parse_obj_vertices(export_obj(mesh))
        want = {(p.x, p.y, p.z) for p in mesh.floor_polygon + mesh.ceiling_polygon}
        got = {tuple(v) for v in verts}
        assert len(got) == len(want)
        for g in got:
            assert min(max(abs(a - b) for a, b in zip(g, w)) for w in want) <= 1e-5


def test_default_focal_60_deg():
    geom = ImageGeometry(256, 256)
    assert default_focal(geom) == pytest.approx(128.0 / math.tan(math.radians(30.0)))
