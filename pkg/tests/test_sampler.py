import json

import numpy as np
import pytest

from cropprompt.errors import AbsentClass, NoCoverage
from cropprompt.prelabel import PreLabel
from cropprompt.raster import CrsId, GeoTransform, GridSpec
from cropprompt.sampler import (NEGATIVE, POSITIVE, PromptPoint, SamplerConfig,
                                flip_labels, jitter_points, partition_batches,
                                plan_from_geojson, plan_to_geojson, sample_prompts)


def prelabel_from_mask(mask, valid=None):
    mask = np.asarray(mask, np.uint8)
    valid = np.ones_like(mask) if valid is None else np.asarray(valid, np.uint8)
    p_crop = float(mask[valid.astype(bool)].mean()) if valid.any() else None
    return PreLabel(mask=mask, valid=valid, p_crop=p_crop,
                    p_noncrop=None if p_crop is None else 1 - p_crop,
                    coverage=float(valid.mean()))


def half_plane(h=40, w=40):
    mask = np.zeros((h, w), np.uint8)
    mask[:, :w // 2] = 1
    return prelabel_from_mask(mask)


class TestSamplePrompts:
    def test_defaults_three_batches_of_ten_plus_ten(self):
        plan = sample_prompts(half_plane(), SamplerConfig(seed=7))
        assert len(plan.batches) == 3
        for batch in plan.batches:
            assert sum(1 for p in batch if p.label == POSITIVE) == 10
            assert sum(1 for p in batch if p.label == NEGATIVE) == 10
        assert plan.count(POSITIVE) == 30 and plan.count(NEGATIVE) == 30

    def test_membership(self):
        pl = half_plane()
        plan = sample_prompts(pl, SamplerConfig(seed=3))
        for p in plan.points:
            if p.label == POSITIVE:
                assert pl.mask[p.row, p.col] == 1
            else:
                assert pl.mask[p.row, p.col] == 0
                assert pl.valid[p.row, p.col] == 1

    def test_checkerboard_membership(self):
        mask = np.indices((16, 16)).sum(axis=0) % 2
        pl = prelabel_from_mask(mask)
        plan = sample_prompts(pl, SamplerConfig(n_pos=2, n_neg=2, seed=99))
        for p in plan.points:
            assert mask[p.row, p.col] == (1 if p.label == POSITIVE else 0)

    def test_no_duplicate_points(self):
        plan = sample_prompts(half_plane(), SamplerConfig(seed=5))
        triples = [(p.col, p.row, p.label) for p in plan.points]
        assert len(set(triples)) == len(triples)

    def test_single_class_skip_policy(self):
        pl = prelabel_from_mask(np.ones((8, 8), np.uint8))
        plan = sample_prompts(pl, SamplerConfig(n_pos=4, n_neg=4, n_batches=1, seed=1))
        assert plan.count(POSITIVE) == 4
        assert plan.count(NEGATIVE) == 0
        assert plan.warnings

    def test_single_class_error_policy(self):
        pl = prelabel_from_mask(np.ones((8, 8), np.uint8))
        with pytest.raises(AbsentClass):
            sample_prompts(pl, SamplerConfig(n_pos=4, n_neg=4, seed=1,
                                             absent_class_policy="error"))

    def test_no_coverage_raises(self):
        pl = prelabel_from_mask(np.zeros((4, 4), np.uint8), valid=np.zeros((4, 4)))
        with pytest.raises(NoCoverage):
            sample_prompts(pl, SamplerConfig(seed=1))

    def test_determinism_byte_identical(self):
        grid = GridSpec(40, 40, GeoTransform(0, 1, 0, 0, 0, -1), CrsId(32650))
        for seed in (0, 1, 12345, 2**63 - 1):
            a = sample_prompts(half_plane(), SamplerConfig(seed=seed))
            b = sample_prompts(half_plane(), SamplerConfig(seed=seed))
            assert json.dumps(plan_to_geojson(a, grid)) == \
                   json.dumps(plan_to_geojson(b, grid))

    def test_seeds_differ(self):
        a = sample_prompts(half_plane(), SamplerConfig(seed=1))
        b = sample_prompts(half_plane(), SamplerConfig(seed=2))
        assert [(p.col, p.row) for p in a.points] != [(p.col, p.row) for p in b.points]

    def test_class_smaller_than_request_comes_up_short(self):
        mask = np.zeros((10, 10), np.uint8)
        mask[0, :3] = 1
        plan = sample_prompts(prelabel_from_mask(mask),
                              SamplerConfig(n_pos=5, n_neg=5, seed=4))
        assert plan.count(POSITIVE) == 3
        assert any("exhausted" in w for w in plan.warnings)

    def test_edge_margin_avoids_boundary(self):
        mask = np.zeros((30, 30), np.uint8)
        mask[5:25, 5:25] = 1
        plan = sample_prompts(prelabel_from_mask(mask),
                              SamplerConfig(n_pos=10, n_neg=10, seed=8, edge_margin=3))
        for p in plan.points:
            if p.label == POSITIVE:
                assert 8 <= p.row <= 21 and 8 <= p.col <= 21

    def test_edge_margin_falls_back_when_erosion_empties(self):
        mask = np.zeros((10, 10), np.uint8)
        mask[4, 4] = 1
        plan = sample_prompts(prelabel_from_mask(mask),
                              SamplerConfig(n_pos=1, n_neg=1, seed=8, edge_margin=3))
        assert plan.count(POSITIVE) == 1

    def test_balance_for_all_n_to_100(self):
        pl = half_plane(64, 64)
        for n in range(1, 101):
            plan = sample_prompts(pl, SamplerConfig(n_pos=n, n_neg=n,
                                                    n_batches=3, seed=n))
            assert plan.count(POSITIVE) == n and plan.count(NEGATIVE) == n
            sizes = [len(b) for b in plan.batches]
            assert max(sizes) - min(sizes) <= 2  # +-1 per class
            for batch in plan.batches:
                pos = sum(1 for p in batch if p.label == POSITIVE)
                neg = len(batch) - pos
                assert abs(pos - neg) <= 1


class TestPartition:
    def mk(self, n_pos, n_neg):
        pts = [PromptPoint(i, 0, POSITIVE, i) for i in range(n_pos)]
        pts += [PromptPoint(i, 1, NEGATIVE, n_pos + i) for i in range(n_neg)]
        return pts

    def test_30_30_into_3(self):
        batches = partition_batches(self.mk(30, 30), 3)
        assert [len(b) for b in batches] == [20, 20, 20]
        for b in batches:
            assert sum(1 for p in b if p.label == POSITIVE) == 10

    def test_single_batch_identity(self):
        pts = self.mk(4, 3)
        batches = partition_batches(pts, 1)
        assert list(batches[0]) == pts

    def test_5_5_into_2(self):
        batches = partition_batches(self.mk(5, 5), 2)
        counts = [(sum(1 for p in b if p.label == POSITIVE),
                   sum(1 for p in b if p.label == NEGATIVE)) for b in batches]
        assert counts == [(3, 3), (2, 2)]

    def test_concatenation_is_permutation(self):
        pts = self.mk(7, 4)
        batches = partition_batches(pts, 3)
        flat = [p for b in batches for p in b]
        assert sorted(p.index for p in flat) == list(range(11))

    def test_intra_class_order_preserved(self):
        batches = partition_batches(self.mk(6, 6), 2)
        for b in batches:
            pos_idx = [p.index for p in b if p.label == POSITIVE]
            assert pos_idx == sorted(pos_idx)


class TestNoiseOps:
    def plan(self, seed=11):
        return sample_prompts(half_plane(), SamplerConfig(seed=seed))

    def test_flip_zero_is_identity(self):
        plan = self.plan()
        assert flip_labels(plan, 0.0, 5) is plan

    def test_flip_all(self):
        plan = self.plan()
        flipped = flip_labels(plan, 1.0, 5)
        for a, b in zip(plan.points, flipped.points):
            assert a.label != b.label and (a.col, a.row) == (b.col, b.row)

    def test_flip_half_exact_count(self):
        plan = self.plan()
        flipped = flip_labels(plan, 0.5, 5)
        changed = sum(1 for a, b in zip(plan.points, flipped.points)
                      if a.label != b.label)
        assert changed == 30

    def test_flip_involution_same_seed(self):
        plan = self.plan()
        twice = flip_labels(flip_labels(plan, 0.3, 17), 0.3, 17)
        assert twice == plan

    def test_jitter_zero_identity(self):
        plan = self.plan()
        assert jitter_points(plan, 0, 3) is plan

    def test_jitter_radius_bound(self):
        plan = self.plan()
        moved = jitter_points(plan, 1, 3)
        for a, b in zip(plan.points, moved.points):
            assert abs(a.col - b.col) <= 1 and abs(a.row - b.row) <= 1
            assert a.label == b.label

    def test_jitter_clamps_to_grid(self):
        mask = np.zeros((6, 6), np.uint8)
        mask[0, 0] = 1
        mask[5, 5] = 1
        plan = sample_prompts(prelabel_from_mask(mask),
                              SamplerConfig(n_pos=2, n_neg=2, n_batches=1, seed=2))
        moved = jitter_points(plan, 5, 9)
        for p in moved.points:
            assert 0 <= p.col < 6 and 0 <= p.row < 6


class TestGeoJson:
    def test_roundtrip(self):
        grid = GridSpec(40, 40, GeoTransform(500000, 0.5, 0, 3100000, 0, -0.5),
                        CrsId(32650))
        plan = sample_prompts(half_plane(), SamplerConfig(seed=21))
        obj = json.loads(json.dumps(plan_to_geojson(plan, grid)))
        back = plan_from_geojson(obj, grid)
        assert back == plan

    def test_coordinates_are_pixel_centers(self):
        grid = GridSpec(8, 8, GeoTransform(100, 2, 0, 50, 0, -2), CrsId(32650))
        mask = np.zeros((8, 8), np.uint8)
        mask[3, 5] = 1
        plan = sample_prompts(prelabel_from_mask(mask),
                              SamplerConfig(n_pos=1, n_neg=0, n_batches=1, seed=0))
        feature = plan_to_geojson(plan, grid)["features"][0]
        assert feature["geometry"]["coordinates"] == [100 + 5.5 * 2, 50 - 3.5 * 2]

    def test_roundtrip_without_pixel_properties(self):
        grid = GridSpec(40, 40, GeoTransform(500000, 0.5, 0, 3100000, 0, -0.5),
                        CrsId(32650))
        plan = sample_prompts(half_plane(), SamplerConfig(seed=21))
        obj = plan_to_geojson(plan, grid)
        for f in obj["features"]:
            del f["properties"]["col"], f["properties"]["row"]
        back = plan_from_geojson(json.loads(json.dumps(obj)), grid)
        assert back == plan
