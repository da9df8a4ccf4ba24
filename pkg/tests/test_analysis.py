"""Mask-stability Pearson curves and dense/sparse FLOPs accounting.

Pearson values are cross-checked against a float64 textbook implementation in
oracles.py; FLOPs examples are hand arithmetic.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from featherprune.analysis import (
    FlopsReport,
    LayerFlops,
    MaskSnapshot,
    curve_to_csv,
    flops_count,
    mask_pearson,
    stability_curve,
)
from featherprune.models import build_cnn, build_mlp
from featherprune.seeding import init_rng

from oracles import pearson as pearson_oracle


def bools(*values):
    return np.array(values, dtype=bool)


class TestMaskPearson:
    def test_identical_nonconstant_is_one(self):
        a = bools(1, 0, 1, 1, 0)
        r = mask_pearson(a, a.copy())
        assert r == 1.0
        assert not r.degenerate

    def test_complement_is_minus_one(self):
        a = bools(1, 1, 0, 0)
        assert mask_pearson(a, ~a) == -1.0

    def test_orthogonal_pattern_is_zero(self):
        assert mask_pearson(bools(1, 1, 0, 0), bools(1, 0, 1, 0)) == 0.0

    def test_symmetry(self):
        a = bools(1, 0, 0, 1, 1, 0)
        b = bools(0, 0, 1, 1, 0, 1)
        assert mask_pearson(a, b) == mask_pearson(b, a)

    def test_degenerate_identical_constant(self):
        a = bools(1, 1, 1)
        r = mask_pearson(a, a.copy())
        assert r == 1.0
        assert r.degenerate

    def test_degenerate_constant_vs_mixed(self):
        r = mask_pearson(bools(0, 0, 0), bools(1, 0, 0))
        assert r == 0.0
        assert r.degenerate

    def test_degenerate_two_different_constants(self):
        r = mask_pearson(bools(1, 1), bools(0, 0))
        assert r == 0.0
        assert r.degenerate

    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="length"):
            mask_pearson(bools(1, 0), bools(1, 0, 1))

    def test_too_short(self):
        with pytest.raises(ValueError, match="at least 2"):
            mask_pearson(bools(1), bools(0))

    @given(
        pair=st.lists(
            st.tuples(st.booleans(), st.booleans()), min_size=2, max_size=200
        )
    )
    @settings(max_examples=200, deadline=None)
    def test_matches_textbook_formula(self, pair):
        a = np.array([p[0] for p in pair], dtype=bool)
        b = np.array([p[1] for p in pair], dtype=bool)
        r = mask_pearson(a, b)
        assert -1.0 <= r <= 1.0
        if a.std() > 0 and b.std() > 0:
            assert not r.degenerate
            assert r == pytest.approx(pearson_oracle(a, b), abs=1e-9)
        else:
            assert r.degenerate
            assert r == (1.0 if np.array_equal(a, b) else 0.0)


class TestStabilityCurve:
    def test_final_point_is_exactly_one(self):
        rng = np.random.default_rng(0)
        snaps = [
            MaskSnapshot(e, {"fc0": rng.random(50) > 0.5}) for e in range(4)
        ]
        curve = stability_curve(snaps)
        assert curve[-1] == (3, 1.0)

    def test_constant_masks_give_flat_ones(self):
        mask = bools(1, 0, 1, 0, 1, 1)
        snaps = [MaskSnapshot(e, {"fc0": mask.copy()}) for e in range(5)]
        assert [r for _, r in stability_curve(snaps)] == [1.0] * 5

    def test_progressive_flips_increase_monotonically(self):
        # start from the final mask and flip a disjoint 10% chunk per step back
        rng = np.random.default_rng(7)
        final = rng.random(400) > 0.5
        snaps = []
        epochs = 6
        for e in range(epochs):
            mask = final.copy()
            flips = (epochs - 1 - e) * 40  # 10% per remaining epoch, disjoint
            mask[:flips] = ~mask[:flips]
            snaps.append(MaskSnapshot(e, {"fc0": mask}))
        values = [r for _, r in stability_curve(snaps)]
        assert all(a < b for a, b in zip(values, values[1:]))
        assert values[-1] == 1.0

    def test_concatenates_across_layers(self):
        # each layer is constant (degenerate alone) but the pooled vector is not
        a = {"fc0": bools(1, 1), "fc1": bools(0, 0)}
        b = {"fc0": bools(1, 0), "fc1": bools(1, 0)}
        curve = stability_curve([MaskSnapshot(0, a), MaskSnapshot(1, b)])
        pooled_a = bools(1, 1, 0, 0)
        pooled_b = bools(1, 0, 1, 0)
        assert curve[0][1] == pytest.approx(pearson_oracle(pooled_a, pooled_b), abs=1e-12)

    def test_empty_list_rejected(self):
        with pytest.raises(ValueError, match="snapshots"):
            stability_curve([])

    def test_csv_shape(self):
        text = curve_to_csv([(0, 0.25), (1, 1.0)])
        lines = text.splitlines()
        assert lines[0] == "epoch,r"
        assert lines[1] == "0,0.25"
        assert lines[2] == "1,1.0"


def half_mask(shape):
    mask = np.zeros(shape, dtype=bool)
    mask.ravel()[: mask.size // 2] = True
    return mask


class TestFlopsCount:
    def test_fc_half_mask_example(self):
        model = build_mlp(100, [], 10, init_rng(0))
        report = flops_count(model, {"fc0": half_mask((100, 10))})
        assert report.layers[0].dense_flops == 2000
        assert report.layers[0].sparse_flops == 1000

    def test_all_true_equals_dense(self):
        model = build_mlp(20, [15], 5, init_rng(0))
        masks = {l.name: np.ones(l.weight.shape, dtype=bool) for l in model.layers}
        report = flops_count(model, masks)
        for row in report.layers:
            assert row.sparse_flops == row.dense_flops

    def test_all_false_is_zero(self):
        model = build_mlp(20, [15], 5, init_rng(0))
        masks = {l.name: np.zeros(l.weight.shape, dtype=bool) for l in model.layers}
        report = flops_count(model, masks)
        assert report.total_sparse == 0
        assert report.total_dense == 2 * (20 * 15 + 15 * 5)

    def test_conv_hand_computed(self):
        # 1x8x8 input, stride-2 3x3 convs with padding 1 -> 4x4 then 2x2 maps
        model = build_cnn((1, 8, 8), 3, init_rng(0))
        masks = {l.name: np.ones(l.weight.shape, dtype=bool) for l in model.layers}
        report = flops_count(model, masks)
        by_name = {row.layer: row for row in report.layers}
        assert by_name["conv1"].dense_flops == 2 * (8 * 1 * 3 * 3) * (4 * 4)
        assert by_name["conv2"].dense_flops == 2 * (16 * 8 * 3 * 3) * (2 * 2)
        assert by_name["fc0"].dense_flops == 2 * (16 * 2 * 2) * 3

    def test_conv_sparse_scales_with_kernel_nnz(self):
        model = build_cnn((1, 8, 8), 3, init_rng(0))
        masks = {l.name: np.ones(l.weight.shape, dtype=bool) for l in model.layers}
        masks["conv1"] = half_mask(model.layers[0].weight.shape)
        report = flops_count(model, masks)
        row = report.layers[0]
        assert row.sparse_flops == row.dense_flops // 2

    def test_totals_are_sums(self):
        report = FlopsReport([
            LayerFlops("a", 100, 40),
            LayerFlops("b", 50, 10),
        ])
        assert report.total_dense == 150
        assert report.total_sparse == 50

    def test_nested_masks_monotone(self):
        rng = np.random.default_rng(1)
        model = build_mlp(30, [20], 4, init_rng(0))
        order = {l.name: rng.permutation(l.weight.data.size) for l in model.layers}
        previous = None
        for keep in (1.0, 0.7, 0.4, 0.1, 0.0):
            masks = {}
            for layer in model.layers:
                flat = np.zeros(layer.weight.data.size, dtype=bool)
                flat[order[layer.name][: int(keep * flat.size)]] = True
                masks[layer.name] = flat.reshape(layer.weight.shape)
            total = flops_count(model, masks).total_sparse
            if previous is not None:
                assert total <= previous
            previous = total

    def test_missing_mask_rejected(self):
        model = build_mlp(10, [], 2, init_rng(0))
        with pytest.raises(ValueError, match="no mask"):
            flops_count(model, {})

    def test_shape_mismatch_rejected(self):
        model = build_mlp(10, [], 2, init_rng(0))
        with pytest.raises(ValueError, match="shape"):
            flops_count(model, {"fc0": np.ones((2, 10), dtype=bool)})

    def test_csv_has_total_row(self):
        model = build_mlp(100, [], 10, init_rng(0))
        report = flops_count(model, {"fc0": half_mask((100, 10))})
        lines = report.to_csv().splitlines()
        assert lines[0] == "layer,dense_flops,sparse_flops"
        assert lines[1] == "fc0,2000,1000"
        assert lines[-1] == "total,2000,1000"
