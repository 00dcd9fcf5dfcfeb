import math

import numpy as np
import pytest

from roomlayout import (
    Homography,
    ImageGeometry,
    LayoutAnnotation,
    LineSegment,
    Point2,
    RansacConfig,
    VanishingPoint,
    apply_homography,
    backproject_corners,
    build_rectifying_homography,
    detect_segments,
    filter_vertical,
    ransac_vpz,
    rectify_points,
    warp_image,
)

GEOM = ImageGeometry(256, 256)


def seg(ax, ay, bx, by):
    return LineSegment(a=Point2(ax, ay), b=Point2(bx, by))


def segments_through(vp_xy, n, rng, length=(15, 40), box=(20, 235)):
    """Exact inlier segments whose supporting lines pass through vp_xy."""
    out = []
    vp = np.asarray(vp_xy, dtype=float)
    for _ in range(n):
        mid = rng.uniform(box[0], box[1], 2)
        d = vp - mid
        d = d / np.hypot(*d)
        half = rng.uniform(*length) / 2
        out.append(seg(*(mid - d * half), *(mid + d * half)))
    return out


def angular_error_deg(est: VanishingPoint, true_xy, geometry) -> float:
    """Angle between the center->vp directions of estimate and truth."""
    cx, cy = geometry.center()
    x, y, w = est.homogeneous
    if abs(w) < 1e-9:
        ex, ey = x, y
    else:
        ex, ey = x / w - cx, y / w - cy
    tx, ty = true_xy[0] - cx, true_xy[1] - cy
    cross = ex * ty - ey * tx
    dot = ex * tx + ey * ty
    ang = abs(math.atan2(cross, dot))
    return math.degrees(min(ang, math.pi - ang))


class TestFilterVertical:
    def test_examples(self):
        vertical = seg(0, 0, 0, 10)
        horizontal = seg(0, 0, 10, 0)
        diagonal = seg(0, 0, 10, 10)
        assert filter_vertical([vertical, horizontal, diagonal]) == [vertical]

    def test_idempotent(self):
        rng = np.random.default_rng(1)
        segs = [seg(*rng.uniform(0, 100, 4)) for _ in range(50)]
        once = filter_vertical(segs)
        assert filter_vertical(once) == once


class TestRansacVpz:
    def test_exact_two_segment_intersection(self):
        # lines x = 40 + y/200 and x = 60 - y/200 meet at (50, 2000)
        segs = [seg(40, 0, 40.5, 100), seg(60, 0, 59.5, 100)]
        vp = ransac_vpz(segs, RansacConfig(seed=1))
        x, y, w = vp.homogeneous
        assert x / w == pytest.approx(50.0, abs=1e-6)
        assert y / w == pytest.approx(2000.0, abs=1e-3)

    def test_recovery_with_outliers(self):
        rng = np.random.default_rng(8)
        true_vp = (128.0, 5127.5)
        segs = segments_through(true_vp, 20, rng)
        for _ in range(2):
            mid = rng.uniform(40, 200, 2)
            ang = rng.uniform(1.0, 1.4)
            d = np.array([math.cos(ang), math.sin(ang)]) * 15
            segs.append(seg(*(mid - d), *(mid + d)))
        vp = ransac_vpz(filter_vertical(segs), RansacConfig(seed=3))
        assert angular_error_deg(vp, true_vp, GEOM) <= 0.5

    def test_parallel_vertical_gives_point_at_infinity(self):
        segs = [seg(x, 0, x, 50) for x in (10.0, 60.0, 110.0)]
        vp = ransac_vpz(segs, RansacConfig(seed=0))
        x, y, w = vp.homogeneous
        assert abs(w) <= 1e-9
        assert abs(x) <= 1e-9
        assert abs(y) == 1.0

    def test_too_few_segments(self):
        with pytest.raises(ValueError, match="two segments"):
            ransac_vpz([seg(0, 0, 0, 1)])

    def test_all_pairs_parallel_non_vertical_direction_is_error_free(self):
        # identical parallel lines: candidates are all-zero crosses -> error
        segs = [seg(5, 0, 5, 10), seg(5, 20, 5, 30)]
        with pytest.raises(ValueError, match="parallel"):
            ransac_vpz(segs, RansacConfig(iterations=10, seed=0))

    def test_bit_identical_across_runs(self):
        rng = np.random.default_rng(12)
        segs = segments_through((100.0, -4000.0), 15, rng)
        cfg = RansacConfig(seed=99)
        a = ransac_vpz(segs, cfg).homogeneous
        b = ransac_vpz(list(segs), cfg).homogeneous
        assert a == b


class TestBuildRectifyingHomography:
    def test_y_infinity_gives_identity(self):
        vp = VanishingPoint(homogeneous=(0.0, 1.0, 0.0))
        h = build_rectifying_homography(vp, GEOM)
        assert np.allclose(h.m, np.eye(3))

    def test_finite_vp_maps_to_y_infinity(self):
        cx, cy = GEOM.center()
        vp = VanishingPoint(homogeneous=(cx + 0.0, cy + 10000.0, 1.0))
        h = build_rectifying_homography(vp, GEOM)
        image = h.m @ np.array([0.0, 10000.0, 1.0])
        image = image / image[1]
        assert abs(image[2]) <= 1e-9
        assert abs(image[0]) <= 1e-9

    def test_property_over_random_finite_vps(self):
        rng = np.random.default_rng(4)
        for _ in range(25):
            vx = rng.uniform(-500, 500)
            vy = rng.uniform(1e-6, 3e4) * (1 if rng.random() < 0.5 else -1)
            if abs(vy) < 1e-6:
                continue
            cx, cy = GEOM.center()
            vp = VanishingPoint(homogeneous=(cx + vx, cy + vy, 1.0))
            h = build_rectifying_homography(vp, GEOM)
            assert abs(np.linalg.det(h.m)) > 1e-12
            image = h.m @ np.array([vx, vy, 1.0])
            image = image / image[1]
            assert abs(image[2]) <= 1e-9
            assert abs(image[0]) <= 1e-9

    def test_segment_through_vp_becomes_vertical(self):
        cx, cy = GEOM.center()
        vp_centered = np.array([50.0, 2000.0])
        vp = VanishingPoint(homogeneous=(cx + 50.0, cy + 2000.0, 1.0))
        h = build_rectifying_homography(vp, GEOM)
        rng = np.random.default_rng(2)
        for _ in range(10):
            a = rng.uniform(30, 220, 2)
            d = vp_centered + np.array(GEOM.center()) - a
            d /= np.hypot(*d)
            b = a + d * 30
            pa = apply_homography(h, Point2(*a), GEOM)
            pb = apply_homography(h, Point2(*b), GEOM)
            angle = abs(math.atan2(pb.x - pa.x, pb.y - pa.y))
            angle = min(angle, math.pi - angle)
            assert angle <= 1e-6

    def test_horizon_vp_raises(self):
        cx, cy = GEOM.center()
        vp = VanishingPoint(homogeneous=(cx + 4000.0, cy + 0.0, 1.0))
        with pytest.raises(ValueError, match="horizon"):
            build_rectifying_homography(vp, GEOM)

    def test_tilted_infinite_vp_uses_pure_shear(self):
        vp = VanishingPoint(homogeneous=(1.0, 10.0, 0.0))
        h = build_rectifying_homography(vp, GEOM)
        image = h.m @ np.array([1.0, 10.0, 0.0])
        assert abs(image[0] / image[1]) <= 1e-12


class TestApplyHomography:
    def test_identity(self):
        p = Point2(12.5, 200.0)
        q = apply_homography(Homography.identity(), p, GEOM)
        assert (q.x, q.y) == (p.x, p.y)

    def test_inverse_round_trip(self):
        rng = np.random.default_rng(6)
        h = Homography(np.array([[1.0, 0.1, 3.0], [0.05, 1.1, -2.0], [1e-4, -2e-4, 1.0]]))
        for _ in range(20):
            p = Point2(*rng.uniform(10, 240, 2))
            q = apply_homography(h, p, GEOM)
            back = apply_homography(h.inverse(), q, GEOM)
            assert math.hypot(back.x - p.x, back.y - p.y) <= 1e-9

    def test_projective_division_example(self):
        # third row [0, -1/2000, 1] halves w for centered (0, 1000)
        cx, cy = GEOM.center()
        h = Homography(np.array([[1.0, 0, 0], [0, 1.0, 0], [0, -1.0 / 2000.0, 1.0]]))
        q = apply_homography(h, Point2(cx + 0.0, cy + 1000.0), GEOM)
        assert q.x - cx == pytest.approx(0.0, abs=1e-12)
        assert q.y - cy == pytest.approx(2000.0, abs=1e-9)

    def test_point_mapping_to_infinity_raises(self):
        cx, cy = GEOM.center()
        h = Homography(np.array([[1.0, 0, 0], [0, 1.0, 0], [0, -1.0 / 2000.0, 1.0]]))
        with pytest.raises(ValueError, match="infinity"):
            apply_homography(h, Point2(cx, cy + 2000.0), GEOM)


class TestBackprojectCorners:
    def make_layout(self, geom):
        return LayoutAnnotation(
            geometry=geom,
            ceiling=(Point2(0, 20), Point2(100, 30), Point2(geom.width - 1, 25)),
            floor=(Point2(0, 200), Point2(100, 190), Point2(geom.width - 1, 195)),
            walls=(100.0,),
        )

    def test_identity_same_size(self):
        layout = self.make_layout(GEOM)
        out = backproject_corners(layout, Homography.identity(), GEOM, GEOM)
        assert [(p.x, p.y) for p in out.ceiling] == [(p.x, p.y) for p in layout.ceiling]

    def test_pure_rescale_doubles_coordinates(self):
        layout = self.make_layout(GEOM)
        original = ImageGeometry(512, 512)
        out = backproject_corners(layout, Homography.identity(), original, GEOM)
        scale = 511 / 255
        for got, src in zip(out.floor, layout.floor):
            assert got.x == pytest.approx(src.x * scale, abs=1e-9)
            assert got.y == pytest.approx(src.y * scale, abs=1e-9)

    def test_round_trip_with_homography(self):
        rng = np.random.default_rng(10)
        original = ImageGeometry(640, 480)
        working = GEOM
        h = Homography(np.array([[1.0, -0.02, 0.0], [0.0, 1.0, 0.0], [0.0, -1e-4, 1.0]]))
        pts = [Point2(*rng.uniform(50, 400, 2)) for _ in range(10)]
        forward = sorted(rectify_points(pts, h, original, working), key=lambda p: p.x)
        layout = LayoutAnnotation(
            geometry=working,
            ceiling=tuple(forward),
            walls=tuple(p.x for p in forward[1:-1]),
            has_floor=False,
        )
        back = backproject_corners(layout, h, original, working)
        want = sorted(pts, key=lambda p: rectify_points([p], h, original, working)[0].x)
        for got, src in zip(back.ceiling, want):
            assert math.hypot(got.x - src.x, got.y - src.y) <= 1e-6


class TestWarpImage:
    def test_identity_bitwise(self):
        rng = np.random.default_rng(0)
        img = rng.integers(0, 255, size=(32, 40), dtype=np.uint8)
        out = warp_image(img, Homography.identity())
        assert (out == img).all()

    def test_integer_translation(self):
        img = np.zeros((16, 16), dtype=np.uint8)
        img[5, 7] = 200
        shift = Homography(np.array([[1.0, 0, 3.0], [0, 1.0, 2.0], [0, 0, 1.0]]))
        out = warp_image(img, shift)
        assert out[7, 10] == 200
        assert out[:2].sum() == 0  # rows pulled from outside are black

    def test_warp_then_inverse_warp_gradient(self):
        xs, ys = np.meshgrid(np.arange(64), np.arange(64))
        img = ((xs + ys) * 2).astype(np.uint8)
        h = Homography(np.array([[1.0, -0.05, 0.0], [0.0, 1.0, 0.0], [0.0, -5e-4, 1.0]]))
        round_trip = warp_image(warp_image(img, h), h.inverse())
        inner = (slice(12, 52), slice(12, 52))
        diff = np.abs(round_trip[inner].astype(int) - img[inner].astype(int))
        assert diff.max() <= 2

    def test_rgb_supported(self):
        rng = np.random.default_rng(5)
        img = rng.integers(0, 255, size=(24, 24, 3), dtype=np.uint8)
        out = warp_image(img, Homography.identity())
        assert (out == img).all()


class TestDetector:
    def draw_line_image(self, lines, size=128):
        from PIL import Image, ImageDraw

        img = Image.new("L", (size, size), 0)
        draw = ImageDraw.Draw(img)
        for a, b in lines:
            draw.line([tuple(a), tuple(b)], fill=255, width=3)
        return np.asarray(img)

    def test_finds_vertical_lines(self):
        lines = [((30, 10), (34, 118)), ((80, 8), (76, 120)), ((10, 60), (118, 64))]
        img = self.draw_line_image(lines)
        segments = detect_segments(img)
        assert len(segments) >= 3
        vertical = filter_vertical(segments)
        assert len(vertical) >= 2
        for s in vertical:
            assert s.angle_deg() > 80.0

    def test_end_to_end_vp_from_image(self):
        # lines converging to a vanishing point far below the image
        vp = (64.0, 1500.0)
        lines = []
        for x in (20, 45, 70, 95, 110):
            a = np.array([x, 10.0])
            d = np.array(vp) - a
            d /= np.hypot(*d)
            b = a + d * 105
            lines.append((tuple(a), tuple(b)))
        img = self.draw_line_image(lines)
        vertical = filter_vertical(detect_segments(img))
        assert len(vertical) >= 3
        est = ransac_vpz(vertical, RansacConfig(seed=2))
        geom = ImageGeometry(128, 128)
        assert angular_error_deg(est, vp, geom) <= 2.0
