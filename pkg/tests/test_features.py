import numpy as np
import pytest

from pillarguard.errors import DomainError
from pillarguard.features import PillarFeatures, augment, pillar_rng
from pillarguard.geometry import depth
from pillarguard.grid import GridSpec, PillarIndex, pillar_footprint

SPEC = GridSpec(0.0, 10.0, 0.0, 10.0, 1.0)
PILLAR = pillar_footprint(PillarIndex(3, 4), SPEC)  # covers [3,4) x [4,5)


def rng():
    return np.random.default_rng(42)


class TestAugment:
    def test_single_point_at_center(self):
        feats = augment([(3.5, 4.5, 0.0, 0.2)], PILLAR, 1024, rng())
        assert feats.valid_count == 1
        assert feats.rows.shape == (1024, 7)
        assert feats.rows[0][0] == 0.0 and feats.rows[0][1] == 0.0
        assert np.all(feats.rows[1:] == 0.0)

    def test_hand_computed_row(self):
        pillar = pillar_footprint(PillarIndex(3, 4), GridSpec(0, 10, 0, 10, 1.0))
        # Pillar [3,4)x[4,5) centered (3.5, 4.5); classic 3-4-5 depth.
        feats = augment([(3.0, 4.0, 0.0, 1.0)], pillar, 8, rng())
        np.testing.assert_allclose(
            feats.valid[0], [-0.5, -0.5, 3.0, 4.0, 0.0, 1.0, 5.0], atol=1e-15
        )

    def test_overfull_pillar_subsamples_distinct_points(self):
        pts = np.column_stack([
            np.random.default_rng(0).uniform(3.0, 4.0, 2000),
            np.random.default_rng(1).uniform(4.0, 5.0, 2000),
            np.zeros(2000),
            np.full(2000, 0.5),
        ])
        feats = augment(pts, PILLAR, 1024, rng())
        assert feats.valid_count == 1024
        rows = {tuple(r) for r in feats.valid}
        assert len(rows) == 1024
        source = {tuple(r) for r in augment(pts, PILLAR, 2000, rng()).valid}
        assert rows <= source

    def test_point_outside_pillar_rejected(self):
        with pytest.raises(DomainError):
            augment([(2.9, 4.5, 0.0, 0.5)], PILLAR, 16, rng())

    def test_deterministic_under_seed(self):
        pts = np.column_stack([
            np.random.default_rng(3).uniform(3.0, 4.0, 100),
            np.random.default_rng(4).uniform(4.0, 5.0, 100),
            np.zeros(100),
            np.full(100, 0.5),
        ])
        a = augment(pts, PILLAR, 32, np.random.default_rng(9))
        b = augment(pts, PILLAR, 32, np.random.default_rng(9))
        assert a == b

    def test_depth_column_matches_geometry(self):
        g = np.random.default_rng(5)
        pts = np.column_stack([
            g.uniform(3.0, 4.0, 50), g.uniform(4.0, 5.0, 50),
            g.normal(size=50), g.uniform(0, 1, 50),
        ])
        feats = augment(pts, PILLAR, 64, rng())
        for row in feats.valid:
            assert abs(row[6] - depth(row[2:5])) <= 1e-12

    def test_m_pc_must_be_positive(self):
        with pytest.raises(ValueError):
            augment([], PILLAR, 0, rng())


class TestPillarFeatures:
    def test_padding_rows_exactly_zero(self):
        feats = PillarFeatures(np.ones((3, 7)), 10)
        assert np.all(feats.rows[3:] == 0.0)
        assert feats.valid_count == 3

    def test_too_many_rows_rejected(self):
        with pytest.raises(ValueError):
            PillarFeatures(np.ones((11, 7)), 10)


class TestPillarRng:
    def test_streams_differ_across_pillars(self):
        a = pillar_rng(0, 0, 1, 2).integers(0, 2**31)
        b = pillar_rng(0, 0, 2, 1).integers(0, 2**31)
        assert a != b

    def test_stream_reproducible(self):
        assert (
            pillar_rng(7, 3, 1, 2).integers(0, 2**31)
            == pillar_rng(7, 3, 1, 2).integers(0, 2**31)
        )
