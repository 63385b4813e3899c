from pathlib import Path

import numpy as np
import pytest

from bimaff import benchmark as bm
from bimaff.benchmark import (
    BenchmarkEntry,
    BenchmarkFormatError,
    EvalConfig,
    MissingObjectMasksError,
    PredictionEntry,
    emit_report,
    evaluate,
    evaluate_entry,
    load_benchmark,
    make_cropped_benchmark,
    make_cropped_variant,
    read_predictions,
    save_benchmark,
    write_predictions,
)
from bimaff.masks import BBox, BinaryMask
from bimaff.metrics import Heatmap

import bench_fixtures as fx

GOLDEN = Path(__file__).parent / "golden"


class TestManifest:
    def test_round_trip(self, tmp_path):
        entries = fx.make_entries()
        path = tmp_path / "bench.json"
        save_benchmark(entries, path)
        loaded = load_benchmark(path)
        assert [e.to_json_obj() for e in loaded] == [e.to_json_obj() for e in entries]

    def test_zero_gt_masks_rejected(self):
        with pytest.raises(BenchmarkFormatError, match="no ground-truth"):
            BenchmarkEntry(
                entry_id="bad", split="ego4d", original_image="a", inpainted_image="b",
                narration="x", gt_left=None, gt_right=None)

    def test_empty_mode_list_rejected(self):
        with pytest.raises(BenchmarkFormatError, match="present but empty"):
            BenchmarkEntry(
                entry_id="bad", split="ego4d", original_image="a", inpainted_image="b",
                narration="x", gt_left=[], gt_right=[fx.B3])

    def test_all_empty_masks_rejected(self):
        with pytest.raises(BenchmarkFormatError, match="all ground-truth"):
            BenchmarkEntry(
                entry_id="bad", split="ego4d", original_image="a", inpainted_image="b",
                narration="x", gt_left=[BinaryMask.empty(4, 4)])

    def test_duplicate_id_rejected(self, tmp_path):
        entries = fx.make_entries()
        entries.append(fx.make_entries()[0])
        path = tmp_path / "bench.json"
        save_benchmark(entries, path)
        with pytest.raises(BenchmarkFormatError, match="duplicate"):
            load_benchmark(path)

    def test_split_partition_counts(self, tmp_path):
        path = tmp_path / "bench.json"
        save_benchmark(fx.make_entries(), path)
        loaded = load_benchmark(path)
        by_split = {"epic_kitchens": 0, "ego4d": 0}
        for entry in loaded:
            by_split[entry.split] += 1
        assert by_split == {"epic_kitchens": 2, "ego4d": 1}
        assert sum(by_split.values()) == len(loaded)


class TestCroppedVariant:
    def test_full_frame_object_is_identity_window(self):
        entry = fx.make_entries()[1]
        entry.target_object_masks = [BinaryMask.full(fx.W, fx.H)]
        cropped = make_cropped_variant(entry, margin=0.1)
        assert cropped.provenance["crop"] == [0, 0, fx.W - 1, fx.H - 1]
        assert cropped.gt_left[0] == entry.gt_left[0]

    def test_corner_object_window_hand_computed(self):
        # object occupies x:0..3 y:0..3; margin 0.1 of a 4-px extent rounds to 0
        entry = BenchmarkEntry(
            entry_id="c", split="ego4d", original_image="a", inpainted_image="b",
            narration="x",
            gt_right=[fx.rect(1, 1, 2, 2)],
            target_object_masks=[fx.rect(0, 0, 3, 3)],
        )
        cropped = make_cropped_variant(entry, margin=0.1)
        assert cropped.provenance["crop"] == [0, 0, 3, 3]
        assert cropped.gt_right[0].width == 4 and cropped.gt_right[0].height == 4
        assert cropped.gt_right[0].area == entry.gt_right[0].area
        assert "clipped" not in cropped.provenance

    def test_gt_outside_object_box_clipped_and_flagged(self):
        entry = BenchmarkEntry(
            entry_id="c", split="ego4d", original_image="a", inpainted_image="b",
            narration="x",
            gt_right=[fx.rect(2, 2, 14, 3)],        # sticks out to the right
            target_object_masks=[fx.rect(0, 0, 7, 7)],
        )
        cropped = make_cropped_variant(entry, margin=0.1)
        assert cropped.provenance["clipped"] == ["gt_right[0]"]
        assert cropped.gt_right[0].area < entry.gt_right[0].area

    def test_missing_object_masks_skipped_with_reason(self):
        entries = fx.make_entries()
        entries[0].target_object_masks = None
        cropped, skipped = make_cropped_benchmark(entries)
        assert len(cropped) == 2
        assert skipped[0][0] == "e1" and "no target object masks" in skipped[0][1]


class TestEvaluate:
    def test_self_evaluation_perfect(self):
        entries = fx.make_entries()
        result = evaluate(fx.self_predictions(entries), entries)
        for entry_id, report in result.per_entry.items():
            assert report.iou == 1.0, entry_id
            assert report.precision == 1.0
            assert report.hd == 0.0 and report.dir_hd == 0.0
            assert report.map == 1.0

    def test_all_empty_predictions_penalized(self):
        entries = fx.make_entries()
        result = evaluate([], entries)
        for report in result.per_entry.values():
            assert report.precision == 0.0
            assert report.hd == fx.DIAGONAL
        combined = result.aggregates["combined"].report
        assert combined.hd == fx.DIAGONAL

    def test_hand_computed_fixture_metrics(self):
        entries = fx.make_entries()
        result = evaluate(fx.partial_predictions(), entries)
        for entry_id, expected in fx.EXPECTED_PARTIAL.items():
            report = result.per_entry[entry_id]
            for name, value in expected.items():
                assert getattr(report, name) == pytest.approx(value, abs=1e-12), (
                    entry_id, name)

    def test_aggregate_is_mean_of_entries(self):
        entries = fx.make_entries()
        result = evaluate(fx.partial_predictions(), entries)
        combined = result.aggregates["combined"]
        assert combined.count == 3
        for name in ("iou", "precision", "hd", "dir_hd"):
            mean = sum(getattr(r, name) for r in result.per_entry.values()) / 3
            assert getattr(combined.report, name) == pytest.approx(mean, abs=1e-12)
        epic = result.aggregates["epic_kitchens"]
        assert epic.count == 2
        assert epic.report.iou == pytest.approx((9 / 13 + 1.0) / 2, abs=1e-12)

    def test_combined_equals_weighted_split_mean(self):
        entries = fx.make_entries()
        result = evaluate(fx.partial_predictions(), entries)
        combined = result.aggregates["combined"]
        for name in ("iou", "precision", "hd", "dir_hd"):
            weighted = 0.0
            for split in ("epic_kitchens", "ego4d"):
                agg = result.aggregates[split]
                weighted += agg.count * getattr(agg.report, name)
            assert getattr(combined.report, name) == pytest.approx(
                weighted / combined.count, abs=1e-12)

    def test_unknown_entry_id_rejected(self):
        entries = fx.make_entries()
        with pytest.raises(KeyError):
            evaluate([PredictionEntry(entry_id="ghost", mask_left=fx.A1)], entries)

    def test_duplicate_prediction_rejected(self):
        entries = fx.make_entries()
        preds = [PredictionEntry(entry_id="e1", mask_left=fx.A1)] * 2
        with pytest.raises(BenchmarkFormatError, match="duplicate"):
            evaluate(preds, entries)

    def test_union_mode_ignores_side_assignment(self):
        entries = fx.make_entries()
        swapped = PredictionEntry(entry_id="e3", mask_left=fx.B3)  # gt is right-handed
        union = evaluate_entry(swapped, entries[2], EvalConfig(mode="union"))
        assert union.iou == 1.0
        per_hand = evaluate_entry(swapped, entries[2], EvalConfig(mode="per-hand"))
        assert per_hand.iou == 0.0

    def test_best_mode_scoring(self):
        entry = fx.make_entries()[0]
        pred = PredictionEntry(entry_id="e1", mask_left=fx.A1)
        best = evaluate_entry(pred, entry, EvalConfig(mode_scoring="best-mode"))
        # A1 matches its own mode exactly under best-mode scoring
        assert best.iou == 1.0 and best.hd == 0.0
        union = evaluate_entry(pred, entry, EvalConfig())
        assert union.iou == pytest.approx(9 / 13)

    def test_single_shared_heatmap_union_mode(self):
        entry = fx.make_entries()[2]
        heat = Heatmap.from_mask(fx.B3)
        pred = PredictionEntry(entry_id="e3", heatmap=heat)
        report = evaluate_entry(pred, entry, EvalConfig(mode="union"))
        assert report.iou == 1.0 and report.map == 1.0

    def test_cropped_coherence_when_nothing_clipped(self):
        entries = fx.make_entries()[:2]          # the two with real predictions
        preds = fx.partial_predictions()
        flat = evaluate(preds, entries)

        cropped_entries, skipped = make_cropped_benchmark(entries, margin=0.1)
        assert not skipped
        cropped_preds = []
        for pred, entry in zip(preds, cropped_entries):
            box = BBox.from_json_obj(entry.provenance["crop"])
            cropped_preds.append(PredictionEntry(
                entry_id=pred.entry_id,
                mask_left=pred.mask_left.crop(box) if pred.mask_left else None,
                mask_right=pred.mask_right.crop(box) if pred.mask_right else None,
            ))
        cropped = evaluate(cropped_preds, cropped_entries)
        for entry_id in flat.per_entry:
            a, b = flat.per_entry[entry_id], cropped.per_entry[entry_id]
            for name in ("iou", "precision", "hd", "dir_hd"):
                assert getattr(a, name) == pytest.approx(getattr(b, name), abs=1e-9), (
                    entry_id, name)

    def test_evaluate_with_crop_flag(self):
        entries = fx.make_entries()
        result = evaluate(fx.self_predictions(entries), entries)
        assert all(r.iou == 1.0 for r in result.per_entry.values())
        # self-predictions are in full-frame coordinates; with crop on, the
        # same heatmaps no longer match entry dimensions
        with pytest.raises(Exception):
            evaluate(fx.self_predictions(entries), entries, EvalConfig(crop=True))


class TestPredictionsIO:
    def test_round_trip(self, tmp_path):
        preds = fx.partial_predictions() + [
            PredictionEntry(entry_id="e3", heatmap=Heatmap.from_mask(fx.B3),
                            taxonomy="right")]
        path = tmp_path / "preds.jsonl"
        write_predictions(preds, path)
        loaded = read_predictions(path)
        assert [p.to_json_obj() for p in loaded] == [p.to_json_obj() for p in preds]

    def test_no_channels_rejected(self):
        with pytest.raises(ValueError, match="no channels"):
            PredictionEntry(entry_id="x")

    def test_heatmap_from_png_reference(self, tmp_path):
        heat = Heatmap.from_mask(fx.B3)
        heat.to_png(tmp_path / "h.png")
        line = '{"entry_id": "e3", "heatmap": {"path": "h.png"}}\n'
        (tmp_path / "preds.jsonl").write_text(line)
        [pred] = read_predictions(tmp_path / "preds.jsonl")
        assert np.allclose(pred.heatmap.values, heat.values)


class TestReport:
    def test_single_method_row(self):
        entries = fx.make_entries()
        result = evaluate(fx.partial_predictions(), entries)
        text = emit_report({"ours": result.aggregates}, fmt="csv")
        lines = text.strip().split("\n")
        assert len(lines) == 2
        assert lines[0].startswith("model,epic_kitchens_iou")
        assert lines[1].startswith("ours,")
        # mask predictions carry no mAP; the cells stay empty
        assert lines[1].split(",")[5 * 3] == ""

    def test_rows_sorted_by_method(self):
        entries = fx.make_entries()
        result = evaluate(fx.partial_predictions(), entries)
        text = emit_report({"zeta": result.aggregates, "alpha": result.aggregates})
        lines = text.strip().split("\n")
        assert lines[1].startswith("alpha,") and lines[2].startswith("zeta,")

    def test_golden_self_eval_csv(self):
        entries = fx.make_entries()
        result = evaluate(fx.self_predictions(entries), entries)
        text = emit_report({"self": result.aggregates}, fmt="csv")
        assert text.encode() == (GOLDEN / "self_eval.csv").read_bytes()

    def test_markdown_has_arrows(self):
        entries = fx.make_entries()
        result = evaluate(fx.self_predictions(entries), entries)
        text = emit_report({"self": result.aggregates}, fmt="markdown")
        assert "iou↑" in text and "hd↓" in text
        assert text.count("\n") == 3

    def test_empty_report_rejected(self):
        with pytest.raises(ValueError):
            emit_report({})
