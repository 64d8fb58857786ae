import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from n2i.datasplit import (DatasetPair, MaskPartition, SplitScheme,
                           build_pairs, load_manifest, mask_partition_pairs,
                           save_manifest, split_sinogram, _neighbor_mean)


class TestSplitScheme:
    def test_x1_sections_are_singletons(self):
        scheme = SplitScheme(K=4, strategy="X1")
        assert scheme.sections == tuple(frozenset({j}) for j in range(1, 5))

    def test_1x_sections_are_complements(self):
        scheme = SplitScheme(K=4, strategy="1X")
        full = frozenset({1, 2, 3, 4})
        assert scheme.sections == tuple(full - frozenset({j})
                                        for j in range(1, 5))

    def test_each_index_coverage_rate(self):
        for strategy, rate in (("X1", 1), ("1X", 3)):
            scheme = SplitScheme(K=4, strategy=strategy)
            for j in range(1, 5):
                count = sum(j in s for s in scheme.sections)
                assert count == rate

    def test_validation(self):
        with pytest.raises(ValueError):
            SplitScheme(K=1, strategy="X1")
        with pytest.raises(ValueError):
            SplitScheme(K=4, strategy="XY")


class TestSplitSinogram:
    def test_k_equals_n_angles(self, rng):
        sino = rng.standard_normal((8, 6))
        subs = split_sinogram(sino, 8)
        assert len(subs) == 8
        for j, sub in enumerate(subs):
            assert sub.shape == (1, 6)
            assert np.array_equal(sub[0], sino[j])

    def test_k2_on_eight_angles(self, rng):
        sino = rng.standard_normal((8, 6))
        subs = split_sinogram(sino, 2)
        assert np.array_equal(subs[0], sino[[0, 2, 4, 6]])
        assert np.array_equal(subs[1], sino[[1, 3, 5, 7]])

    def test_interleave_reassembles_exactly(self, rng):
        sino = rng.standard_normal((12, 5))
        subs = split_sinogram(sino, 4)
        rebuilt = np.empty_like(sino)
        for j, sub in enumerate(subs):
            rebuilt[j::4] = sub
        assert np.array_equal(rebuilt, sino)

    def test_divisibility_enforced(self, rng):
        with pytest.raises(ValueError):
            split_sinogram(rng.standard_normal((10, 4)), 3)


def _pair_key(pair):
    return (pair.input.tobytes(), pair.target.tobytes())


class TestBuildPairs:
    def test_k2_strategies_same_pair_set(self, rng):
        subs = [rng.standard_normal((6, 6)) for _ in range(2)]
        x1 = build_pairs(subs, SplitScheme(K=2, strategy="X1"))
        ox = build_pairs(subs, SplitScheme(K=2, strategy="1X"))
        assert {_pair_key(p) for p in x1} == {_pair_key(p) for p in ox}

    def test_k4_x1_input_is_mean_of_others(self, rng):
        subs = [rng.standard_normal((6, 6)) for _ in range(4)]
        pairs = build_pairs(subs, SplitScheme(K=4, strategy="X1"))
        assert len(pairs) == 4
        first = next(p for p in pairs if p.section == frozenset({1}))
        assert np.allclose(first.input, (subs[1] + subs[2] + subs[3]) / 3)
        assert np.array_equal(first.target, subs[0])

    def test_k4_1x_input_is_single_sub(self, rng):
        subs = [rng.standard_normal((6, 6)) for _ in range(4)]
        pairs = build_pairs(subs, SplitScheme(K=4, strategy="1X"))
        pair = next(p for p in pairs if p.section == frozenset({2, 3, 4}))
        assert np.array_equal(pair.input, subs[0])
        assert np.allclose(pair.target, (subs[1] + subs[2] + subs[3]) / 3)

    def test_identical_subs_input_equals_target(self, rng):
        sub = rng.standard_normal((5, 5))
        pairs = build_pairs([sub] * 4, SplitScheme(K=4, strategy="X1"))
        for p in pairs:
            assert np.allclose(p.input, p.target)

    def test_wrong_count_rejected(self, rng):
        with pytest.raises(ValueError):
            build_pairs([rng.standard_normal((4, 4))] * 3,
                        SplitScheme(K=4, strategy="X1"))

    def test_pair_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            DatasetPair(input=np.zeros((4, 4)), target=np.zeros((5, 5)),
                        slice_id=0, section=frozenset({1}))

    def test_loss_mask_shape_checked(self):
        with pytest.raises(ValueError):
            DatasetPair(input=np.zeros((4, 4)), target=np.zeros((4, 4)),
                        slice_id=0, section=frozenset({1}),
                        loss_mask=np.ones((5, 5), dtype=bool))


class TestMaskPartition:
    def test_stride4_on_8x8_classes_have_four_pixels(self):
        part = MaskPartition(stride=4)
        for phase in range(part.n_phases):
            assert part.phase_mask((8, 8), phase).sum() == 4

    def test_phases_partition_the_grid(self):
        part = MaskPartition(stride=3)
        total = np.zeros((9, 12), dtype=int)
        for phase in range(part.n_phases):
            total += part.phase_mask((9, 12), phase)
        assert np.array_equal(total, np.ones((9, 12), dtype=int))

    def test_no_adjacent_pixels_share_class(self):
        part = MaskPartition(stride=2)
        for phase in range(part.n_phases):
            mask = part.phase_mask((8, 8), phase).astype(int)
            for dy, dx in ((0, 1), (1, 0), (1, 1), (1, -1)):
                shifted = np.roll(np.roll(mask, dy, 0), dx, 1)
                # interior only (roll wraps around)
                assert not np.any((mask & shifted)[1:-1, 1:-1])

    def test_invalid_phase(self):
        with pytest.raises(ValueError):
            MaskPartition(stride=2).phase_mask((4, 4), 4)

    def test_invalid_stride(self):
        with pytest.raises(ValueError):
            MaskPartition(stride=0)


class TestMaskPartitionPairs:
    def test_constant_image_unchanged(self):
        img = np.full((8, 8), 3.25)
        masked, mask = mask_partition_pairs(img, MaskPartition(4), phase=5)
        assert np.array_equal(masked, img)
        assert mask.sum() == 4

    def test_only_class_pixels_replaced(self, rng):
        img = rng.standard_normal((8, 8))
        masked, mask = mask_partition_pairs(img, MaskPartition(4), phase=0)
        assert np.array_equal(masked[~mask], img[~mask])
        assert np.allclose(masked[mask], _neighbor_mean(img)[mask])

    def test_neighbor_mean_interior_value(self):
        img = np.arange(25, dtype=float).reshape(5, 5)
        nm = _neighbor_mean(img)
        window = img[1:4, 1:4]
        assert nm[2, 2] == pytest.approx((window.sum() - img[2, 2]) / 8)


class TestManifest:
    def test_round_trip(self, tmp_path, rng):
        subs = [rng.standard_normal((4, 4)) for _ in range(2)]
        pairs = build_pairs(subs, SplitScheme(K=2, strategy="X1"), slice_id=3)
        paths = [(f"in_{i}.raw", f"tgt_{i}.raw") for i in range(len(pairs))]
        manifest = tmp_path / "manifest.tsv"
        save_manifest(pairs, paths, manifest)
        rows = load_manifest(manifest)
        assert rows == [
            (3, frozenset({1}), "in_0.raw", "tgt_0.raw"),
            (3, frozenset({2}), "in_1.raw", "tgt_1.raw"),
        ]

    def test_length_mismatch(self, tmp_path, rng):
        subs = [rng.standard_normal((4, 4)) for _ in range(2)]
        pairs = build_pairs(subs, SplitScheme(K=2, strategy="X1"))
        with pytest.raises(ValueError):
            save_manifest(pairs, [("a", "b")], tmp_path / "m.tsv")


@settings(max_examples=20, deadline=None)
@given(k=st.sampled_from([2, 3, 4, 6]), seed=st.integers(0, 100))
def test_split_then_mean_preserves_column_sums(k, seed):
    rng = np.random.default_rng(seed)
    sino = rng.standard_normal((12, 7))
    subs = split_sinogram(sino, k)
    stacked = np.concatenate(subs, axis=0)
    assert np.allclose(np.sort(stacked, axis=0), np.sort(sino, axis=0))
