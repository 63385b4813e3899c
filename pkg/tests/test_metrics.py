import math

import numpy as np
import pytest

from bimaff import metrics
from bimaff.masks import BinaryMask, DimensionMismatchError
from bimaff.metrics import Heatmap, MetricReport

from dense_oracles import (
    array_to_set,
    directed_hausdorff_oracle,
    hausdorff_oracle,
    iou_oracle,
    mask_to_set,
    precision_oracle,
    random_mask_array,
)


def mask(rows):
    return BinaryMask.from_array(np.array(rows, dtype=bool))


# 4x4 fixture: P and G both have area 4 and overlap on 2 pixels
PRED_4 = mask([[1, 1, 0, 0], [1, 1, 0, 0], [0, 0, 0, 0], [0, 0, 0, 0]])
GT_4 = mask([[0, 1, 1, 0], [0, 1, 1, 0], [0, 0, 0, 0], [0, 0, 0, 0]])


class TestIoUPrecision:
    def test_identical_nonempty(self):
        assert metrics.iou(PRED_4, PRED_4) == 1.0

    def test_disjoint(self):
        a = mask([[1, 0], [0, 0]])
        b = mask([[0, 0], [0, 1]])
        assert metrics.iou(a, b) == 0.0

    def test_partial_overlap_fixture(self):
        assert metrics.iou(PRED_4, GT_4) == pytest.approx(2 / 6)
        assert metrics.precision(PRED_4, GT_4) == pytest.approx(0.5)

    def test_subset_precision_is_one(self):
        sub = mask([[0, 1, 0, 0], [0, 1, 0, 0], [0, 0, 0, 0], [0, 0, 0, 0]])
        assert metrics.precision(sub, GT_4) == 1.0

    def test_empty_prediction(self):
        empty = BinaryMask.empty(4, 4)
        assert metrics.precision(empty, GT_4) == 0.0
        report = metrics.evaluate_masks(empty, GT_4)
        assert report.degenerate

    def test_both_empty_scores_zero_flagged(self):
        empty = BinaryMask.empty(3, 3)
        report = metrics.evaluate_masks(empty, empty)
        assert report.iou == 0.0 and report.degenerate

    def test_matches_counting_oracle(self, rng):
        for _ in range(50):
            a = random_mask_array(rng, 16, 16)
            b = random_mask_array(rng, 16, 16)
            ma, mb = BinaryMask.from_array(a), BinaryMask.from_array(b)
            assert metrics.iou(ma, mb) == iou_oracle(array_to_set(a), array_to_set(b))
            assert metrics.precision(ma, mb) == precision_oracle(array_to_set(a), array_to_set(b))


class TestHausdorff:
    def test_identical_is_zero(self):
        assert metrics.hausdorff(PRED_4, PRED_4) == 0.0
        assert metrics.directed_hausdorff(PRED_4, PRED_4) == 0.0

    def test_three_four_five(self):
        a = np.zeros((5, 5), dtype=bool)
        b = np.zeros((5, 5), dtype=bool)
        a[0, 0] = True
        b[4, 3] = True  # (x=3, y=4): distance 5 from (0, 0)
        ma, mb = BinaryMask.from_array(a), BinaryMask.from_array(b)
        assert metrics.directed_hausdorff(ma, mb) == 5.0
        assert metrics.hausdorff(ma, mb) == 5.0

    def test_strict_subset_asymmetry(self):
        sub = mask([[0, 1, 0, 0], [0, 1, 0, 0], [0, 0, 0, 0], [0, 0, 0, 0]])
        assert metrics.directed_hausdorff(sub, GT_4) == 0.0
        assert metrics.hausdorff(sub, GT_4) > 0.0

    def test_empty_side_costs_diagonal(self):
        empty = BinaryMask.empty(3, 4)
        nonempty = BinaryMask(3, 4, (0, 1, 11))
        assert metrics.hausdorff(empty, nonempty) == 5.0
        assert metrics.hausdorff(empty, empty) == 5.0
        assert metrics.directed_hausdorff(nonempty, empty) == 5.0

    def test_symmetry_and_dominance(self, kernel_backend, rng):
        for _ in range(25):
            a = BinaryMask.from_array(random_mask_array(rng, 12, 9))
            b = BinaryMask.from_array(random_mask_array(rng, 12, 9))
            hd = metrics.hausdorff(a, b)
            assert hd == metrics.hausdorff(b, a)
            assert metrics.directed_hausdorff(a, b) <= hd

    def test_matches_all_pairs_oracle(self, kernel_backend, rng):
        for _ in range(30):
            w, h = int(rng.integers(1, 24)), int(rng.integers(1, 24))
            a_arr = random_mask_array(rng, w, h)
            b_arr = random_mask_array(rng, w, h)
            a, b = BinaryMask.from_array(a_arr), BinaryMask.from_array(b_arr)
            a_set, b_set = array_to_set(a_arr), array_to_set(b_arr)
            assert metrics.directed_hausdorff(a, b) == pytest.approx(
                directed_hausdorff_oracle(a_set, b_set, w, h), rel=1e-12)
            assert metrics.hausdorff(a, b) == pytest.approx(
                hausdorff_oracle(a_set, b_set, w, h), rel=1e-12)

    def test_translation_invariance(self, rng):
        base_a = random_mask_array(rng, 8, 8)
        base_b = random_mask_array(rng, 8, 8)
        canvas_a = np.zeros((20, 20), dtype=bool)
        canvas_b = np.zeros((20, 20), dtype=bool)
        canvas_a[2:10, 3:11] = base_a
        canvas_b[2:10, 3:11] = base_b
        shifted_a = np.zeros((20, 20), dtype=bool)
        shifted_b = np.zeros((20, 20), dtype=bool)
        shifted_a[9:17, 7:15] = base_a
        shifted_b[9:17, 7:15] = base_b
        for fn in (metrics.iou, metrics.precision, metrics.hausdorff, metrics.directed_hausdorff):
            assert fn(BinaryMask.from_array(canvas_a), BinaryMask.from_array(canvas_b)) == pytest.approx(
                fn(BinaryMask.from_array(shifted_a), BinaryMask.from_array(shifted_b)))


class TestThreshold:
    HEAT = Heatmap(2, 2, np.array([[0.2, 0.5], [0.5, 0.9]]))

    def test_zero_threshold_full(self):
        assert metrics.threshold(self.HEAT, 0.0) == BinaryMask.full(2, 2)

    def test_above_max_empty(self):
        assert metrics.threshold(self.HEAT, 0.95).is_empty()

    def test_point_five(self):
        assert metrics.threshold(self.HEAT, 0.5).area == 3

    def test_monotone(self, rng):
        values = rng.random((6, 7))
        h = Heatmap(7, 6, values)
        prev = metrics.threshold(h, 0.0)
        for t in (0.2, 0.4, 0.6, 0.8, 1.0):
            cur = metrics.threshold(h, t)
            assert prev.contains(cur)
            prev = cur

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            metrics.threshold(self.HEAT, 1.5)

    def test_value_range_validated(self):
        with pytest.raises(ValueError):
            Heatmap(2, 1, np.array([[0.5, 1.2]]))

    def test_png_round_trip(self, tmp_path, rng):
        h = Heatmap(9, 4, np.round(rng.random((4, 9)) * 65535) / 65535)
        path = tmp_path / "h.png"
        h.to_png(path)
        again = Heatmap.from_png(path)
        assert np.allclose(again.values, h.values, atol=1e-9)

    def test_json_round_trip(self, rng):
        h = Heatmap(3, 2, rng.random((2, 3)))
        assert np.array_equal(Heatmap.from_json_obj(h.to_json_obj()).values, h.values)


class TestSweep:
    def test_perfect_binary_heatmap(self):
        gt = GT_4
        heat = Heatmap.from_mask(gt)
        report = metrics.sweep_evaluate(heat, gt, (0.1, 0.3, 0.5, 0.7, 0.9))
        assert report.map == 1.0
        assert report.iou == 1.0 and report.precision == 1.0
        assert report.hd == 0.0 and report.dir_hd == 0.0
        assert len(report.per_threshold) == 5

    def test_constant_zero_heatmap(self):
        gt = GT_4
        heat = Heatmap(4, 4, np.zeros((4, 4)))
        report = metrics.sweep_evaluate(heat, gt, (0.1, 0.5, 0.9))
        assert report.precision == 0.0
        assert report.hd == metrics.diagonal(4, 4)
        assert report.degenerate

    def test_plateau_heatmap_matches_hand_evaluation(self):
        # three plateaus: 0.8 block (gt), 0.4 halo, 0 elsewhere
        values = np.zeros((8, 8))
        values[2:5, 2:5] = 0.4
        values[3:5, 3:5] = 0.8
        heat = Heatmap(8, 8, values)
        gt_arr = np.zeros((8, 8), dtype=bool)
        gt_arr[3:5, 3:5] = True
        gt = BinaryMask.from_array(gt_arr)
        thresholds = (0.3, 0.5, 0.9)
        report = metrics.sweep_evaluate(heat, gt, thresholds)
        per = {t: r for t, r in report.per_threshold}
        # t=0.3 selects the 3x3 halo block: |P|=9, overlap 4
        assert per[0.3].precision == pytest.approx(4 / 9)
        assert per[0.3].iou == pytest.approx(4 / 9)
        # t=0.5 selects exactly gt
        assert per[0.5].iou == 1.0
        # t=0.9 selects nothing
        assert per[0.9].precision == 0.0
        assert report.map == pytest.approx((4 / 9 + 1.0 + 0.0) / 3)
        assert report.iou == 1.0
        assert report.precision == 1.0
        assert report.hd == 0.0
        assert report.dir_hd == 0.0

    def test_map_metric_iou_option(self):
        gt = GT_4
        heat = Heatmap.from_mask(gt)
        report = metrics.sweep_evaluate(heat, gt, (0.5,), map_metric="iou")
        assert report.map == 1.0

    def test_empty_threshold_list_rejected(self):
        with pytest.raises(ValueError):
            metrics.sweep_evaluate(Heatmap.from_mask(GT_4), GT_4, ())


class TestEvaluatePair:
    def test_unimanual_right_perfect(self):
        report = metrics.evaluate_pair(None, GT_4, None, GT_4, mode="per-hand")
        assert report.iou == 1.0
        union_report = metrics.evaluate_pair(None, GT_4, None, GT_4, mode="union")
        assert union_report.iou == 1.0

    def test_bimanual_half_credit(self):
        left_gt = PRED_4
        right_gt = GT_4
        report = metrics.evaluate_pair(left_gt, None, left_gt, right_gt, mode="per-hand")
        assert report.iou == pytest.approx(0.5)
        assert report.precision == pytest.approx(0.5)

    def test_no_ground_truth_rejected(self):
        with pytest.raises(ValueError):
            metrics.evaluate_pair(PRED_4, None, None, None)

    def test_precision_dominates_iou_nonempty(self, rng):
        for _ in range(30):
            p = BinaryMask.from_array(random_mask_array(rng, 10, 10, density=0.3))
            g = BinaryMask.from_array(random_mask_array(rng, 10, 10, density=0.3))
            if p.is_empty():
                continue
            assert metrics.precision(p, g) >= metrics.iou(p, g)


class TestReportSerialization:
    def test_json_object_shape(self):
        report = MetricReport(iou=0.5, precision=0.75, hd=2.0, dir_hd=1.0, map=0.6)
        obj = report.to_json_obj()
        assert obj["iou"] == 0.5 and obj["map"] == 0.6

    def test_mean_reports(self):
        a = MetricReport(iou=0.2, precision=0.4, hd=2.0, dir_hd=1.0)
        b = MetricReport(iou=0.4, precision=0.6, hd=4.0, dir_hd=3.0)
        mean = metrics.mean_reports([a, b])
        assert mean.iou == pytest.approx(0.3)
        assert mean.hd == pytest.approx(3.0)
        assert mean.map is None
