import numpy as np
import pytest

from pillarguard.geometry import Box3D, footprint, iou_2d
from pillarguard.grid import (
    GridSpec,
    PillarIndex,
    intersecting_pillars,
    partition,
    pillar_footprint,
)
from pillarguard.pcio import PointCloud

SMALL = GridSpec(0.0, 10.0, 0.0, 10.0, 1.0)


class TestPartition:
    def test_cell_assignment(self):
        pc = PointCloud([(0.5, 0.5, 0.0, 0.5)])
        part = partition(pc, SMALL)
        assert set(part.pillars) == {PillarIndex(0, 0)}

    def test_half_open_boundary(self):
        pc = PointCloud([(1.0, 0.0, 0.0, 0.5)])
        part = partition(pc, SMALL)
        assert set(part.pillars) == {PillarIndex(1, 0)}

    def test_out_of_region_dropped_and_counted(self):
        pc = PointCloud([(-0.1, 5.0, 0.0, 0.5), (5.0, 5.0, 0.0, 0.5)])
        part = partition(pc, SMALL)
        assert part.dropped == 1
        assert set(part.pillars) == {PillarIndex(5, 5)}

    def test_every_in_bounds_point_in_exactly_one_pillar(self):
        rng = np.random.default_rng(0)
        arr = np.column_stack([rng.uniform(-2, 12, (500, 2)), np.zeros(500), np.full(500, 0.5)])
        pc = PointCloud(arr=arr)
        part = partition(pc, SMALL)
        total = sum(len(v) for v in part.pillars.values())
        assert total + part.dropped == len(pc)
        seen = np.concatenate(list(part.pillars.values())) if part.pillars else []
        assert len(seen) == len(set(seen.tolist()))

    def test_indices_ascending_within_pillar(self):
        pc = PointCloud([(0.5, 0.5, 0, 0.5), (3.0, 3.0, 0, 0.5), (0.6, 0.6, 0, 0.5)])
        part = partition(pc, SMALL)
        assert part.pillars[PillarIndex(0, 0)].tolist() == [0, 2]


class TestPillarFootprint:
    def test_origin_cell(self):
        fp = pillar_footprint(PillarIndex(0, 0), SMALL)
        assert {(x, y) for x, y in fp.corners} == {(0, 0), (1, 0), (0, 1), (1, 1)}

    def test_offset_cell(self):
        fp = pillar_footprint(PillarIndex(2, 3), SMALL)
        assert {(x, y) for x, y in fp.corners} == {(2, 3), (3, 3), (2, 4), (3, 4)}

    def test_outside_grid_raises(self):
        with pytest.raises(IndexError):
            pillar_footprint(PillarIndex(10**6, 0), SMALL)


class TestIntersectingPillars:
    def test_axis_aligned_box_on_grid_vertex(self):
        box = Box3D(5.0, 5.0, 0.0, 2.0, 2.0, 1.0, 0.0)
        hits = intersecting_pillars(box, SMALL, beta=1e-3)
        assert set(hits) == {
            PillarIndex(4, 4), PillarIndex(4, 5), PillarIndex(5, 4), PillarIndex(5, 5),
        }

    def test_box_outside_grid(self):
        box = Box3D(50.0, 50.0, 0.0, 2.0, 2.0, 1.0, 0.0)
        assert intersecting_pillars(box, SMALL, beta=1e-3) == []

    def test_beta_one_empty(self):
        box = Box3D(5.0, 5.0, 0.0, 4.2, 1.7, 1.0, 0.3)
        assert intersecting_pillars(box, SMALL, beta=1.0) == []

    def test_matches_full_grid_scan(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            box = Box3D(
                rng.uniform(0, 10), rng.uniform(0, 10), 0.0,
                rng.uniform(0.5, 5.0), rng.uniform(0.5, 3.0), 1.0,
                rng.uniform(-np.pi, np.pi),
            )
            beta = rng.choice([1e-6, 1e-3, 0.05])
            fast = set(intersecting_pillars(box, SMALL, beta))
            fp = footprint(box)
            brute = {
                PillarIndex(i, j)
                for i in range(SMALL.nx)
                for j in range(SMALL.ny)
                if iou_2d(pillar_footprint(PillarIndex(i, j), SMALL), fp) > beta
            }
            assert fast == brute

    def test_monotone_in_beta(self):
        box = Box3D(5.0, 5.0, 0.0, 4.2, 1.7, 1.0, 0.77)
        lo = set(intersecting_pillars(box, SMALL, 1e-4))
        hi = set(intersecting_pillars(box, SMALL, 1e-2))
        assert hi <= lo
