import math

import numpy as np
import pytest

from pillarguard.defenses import carlo_fsd, carlo_lpd, sor, srs
from pillarguard.errors import GeometryError, SizeError
from pillarguard.geometry import Box3D
from pillarguard.pcio import Detection, PointCloud


def random_cloud(n, seed=0):
    rng = np.random.default_rng(seed)
    arr = np.column_stack([rng.uniform(-20, 20, (n, 3)), rng.uniform(0, 1, n)])
    return PointCloud(arr=arr)


class TestSrs:
    def test_sample_size(self):
        pc = random_cloud(10_000)
        out = srs(pc, 500, np.random.default_rng(0))
        assert len(out) == 500

    def test_output_points_from_input(self):
        pc = random_cloud(200)
        out = srs(pc, 50, np.random.default_rng(1))
        source = {tuple(r) for r in pc.arr}
        assert all(tuple(r) in source for r in out.arr)

    def test_m_at_least_n_is_identity(self):
        pc = random_cloud(100)
        assert srs(pc, 100, np.random.default_rng(2)) == pc
        assert srs(pc, 1000, np.random.default_rng(2)) == pc

    def test_m_zero_empty(self):
        assert len(srs(random_cloud(10), 0, np.random.default_rng(3))) == 0

    def test_relative_order_preserved(self):
        pc = PointCloud([(float(i), 0.0, 0.0, 0.5) for i in range(100)])
        out = srs(pc, 30, np.random.default_rng(4))
        xs = out.arr[:, 0]
        assert np.all(np.diff(xs) > 0)


class TestSor:
    def test_regular_polygon_keeps_everything(self):
        # Square with exact coordinates: all mean-kNN distances are bit-equal,
        # so sigma = 0 and the degenerate band [mu, mu] keeps every point.
        pts = [(1.0, 0.0, 0.0, 0.5), (0.0, 1.0, 0.0, 0.5),
               (-1.0, 0.0, 0.0, 0.5), (0.0, -1.0, 0.0, 0.5)]
        pc = PointCloud(pts)
        assert len(sor(pc, k=2, alpha=1.1)) == 4

    def test_far_outlier_removed(self):
        rng = np.random.default_rng(5)
        cluster = np.column_stack([rng.normal(0, 0.3, (100, 3)), rng.uniform(0, 1, 100)])
        outlier = np.array([[50.0, 0.0, 0.0, 0.5]])
        pc = PointCloud(arr=np.vstack([cluster, outlier]))
        out = sor(pc, k=2, alpha=1.1)
        assert len(out) < len(pc)
        assert not np.any(out.arr[:, 0] == 50.0)

    def test_exact_size_boundary(self):
        pc = random_cloud(3)
        with pytest.raises(SizeError):
            sor(pc, k=3)

    def test_output_subset_and_rerun_subset(self):
        pc = random_cloud(500, seed=6)
        once = sor(pc, k=2, alpha=1.1)
        assert len(once) <= len(pc)
        twice = sor(once, k=2, alpha=1.1)
        kept = {tuple(r) for r in once.arr}
        assert all(tuple(r) in kept for r in twice.arr)

    def test_brute_force_distances(self):
        rng = np.random.default_rng(7)
        arr = np.column_stack([rng.normal(size=(30, 3)), rng.uniform(0, 1, 30)])
        pc = PointCloud(arr=arr)
        k, alpha = 2, 1.1
        xyz = arr[:, :3]
        mean_knn = []
        for i in range(len(xyz)):
            d = np.sort(np.linalg.norm(xyz - xyz[i], axis=1))
            mean_knn.append(d[1 : k + 1].mean())
        mean_knn = np.array(mean_knn)
        mu, sigma = mean_knn.mean(), mean_knn.std()
        expected = ((mean_knn >= mu - alpha * sigma) & (mean_knn <= mu + alpha * sigma))
        out = sor(pc, k=k, alpha=alpha)
        np.testing.assert_array_equal(out.arr, arr[expected])


def car_det(cx=6.0, cy=0.0, l=4.0, w=2.0, h=2.0, yaw=0.0, cz=0.0):
    return Detection("car", Box3D(cx, cy, cz, l, w, h, yaw), 0.9)


class TestCarloFsd:
    def test_every_cell_occupied(self):
        det = car_det(l=2.0, w=2.0, h=2.0)
        centers = np.arange(-0.5, 1.0, 1.0)
        pts = [(det.box.cx + x, det.box.cy + y, det.box.cz + z, 0.5)
               for x in centers for y in centers for z in centers]
        verdict = carlo_fsd(det, PointCloud(pts), cell=1.0, r_thresh=0.5)
        assert verdict.ratio == 0.0 and not verdict.flagged

    def test_empty_box_fully_free(self):
        verdict = carlo_fsd(car_det(), PointCloud(), cell=0.25, r_thresh=0.8)
        assert verdict.ratio == 1.0 and verdict.flagged

    def test_hand_counted_cells(self):
        # 2x2x2 cells; occupy 2 of 8 -> r = 0.75 > 0.7.
        det = car_det(l=2.0, w=2.0, h=2.0)
        pts = [
            (det.box.cx - 0.5, det.box.cy - 0.5, det.box.cz - 0.5, 0.5),
            (det.box.cx + 0.5, det.box.cy + 0.5, det.box.cz + 0.5, 0.5),
        ]
        verdict = carlo_fsd(det, PointCloud(pts), cell=1.0, r_thresh=0.7)
        assert verdict.ratio == pytest.approx(0.75)
        assert verdict.flagged

    def test_ratio_in_unit_interval_and_monotone_flag(self):
        rng = np.random.default_rng(8)
        det = car_det(yaw=0.7)
        pc = random_cloud(300, seed=9)
        v = carlo_fsd(det, pc, cell=0.5, r_thresh=0.5)
        assert 0.0 <= v.ratio <= 1.0
        for r_lo, r_hi in [(0.2, 0.8)]:
            flag_lo = carlo_fsd(det, pc, 0.5, r_lo).flagged
            flag_hi = carlo_fsd(det, pc, 0.5, r_hi).flagged
            assert flag_lo or not flag_hi


class TestCarloLpd:
    def test_all_points_inside(self):
        det = car_det(cx=8.0)
        pts = [(8.0 + dx, dy, 0.0, 0.5) for dx in (-1.0, 0.0, 1.0) for dy in (-0.5, 0.5)]
        verdict = carlo_lpd(det, PointCloud(pts), r_thresh=0.7)
        assert verdict.ratio == 0.0 and not verdict.flagged

    def test_all_points_behind(self):
        det = car_det(cx=8.0)
        pts = [(20.0, 0.0, 0.0, 0.5), (25.0, 0.1, 0.0, 0.5)]
        verdict = carlo_lpd(det, PointCloud(pts), r_thresh=0.7)
        assert verdict.ratio == 1.0 and verdict.flagged

    def test_hand_counted_ratio(self):
        # 3 behind, 1 inside, 0 in front -> r = 0.75 > 0.7.
        det = car_det(cx=8.0)
        pts = [
            (8.0, 0.0, 0.0, 0.5),
            (30.0, 0.0, 0.0, 0.5), (31.0, 0.2, 0.0, 0.5), (32.0, -0.2, 0.0, 0.5),
        ]
        verdict = carlo_lpd(det, PointCloud(pts), r_thresh=0.7)
        assert verdict.ratio == pytest.approx(0.75)
        assert verdict.flagged

    def test_empty_sets_give_zero(self):
        det = car_det(cx=8.0)
        pts = [(0.0, 15.0, 0.0, 0.5)]  # outside the sector
        verdict = carlo_lpd(det, PointCloud(pts), r_thresh=0.5)
        assert verdict.ratio == 0.0

    def test_origin_inside_footprint_rejected(self):
        det = car_det(cx=0.0, cy=0.0)
        with pytest.raises(GeometryError):
            carlo_lpd(det, PointCloud(), r_thresh=0.5)

    def test_points_in_front_counted(self):
        det = car_det(cx=10.0)
        pts = [(3.0, 0.0, 0.0, 0.5), (30.0, 0.0, 0.0, 0.5)]
        verdict = carlo_lpd(det, PointCloud(pts), r_thresh=0.4)
        assert verdict.ratio == pytest.approx(0.5)
