"""Benchmark loading, cropped-variant generation, and the evaluation
runner that turns predictions into per-entry and aggregate metric tables.

Ground truth is multimodal: each hand carries a list of annotation modes
(every plausible interaction region). By default a hand is scored against
the union of its modes, so a precise prediction landing inside any valid
region scores full precision; best-mode scoring is available as an
alternative. Missing predictions are scored as empty, never skipped.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from . import masks as mask_ops
from .masks import BBox, BinaryMask
from .metrics import (
    DEFAULT_THRESHOLDS,
    Heatmap,
    MetricReport,
    evaluate_masks,
    mean_reports,
    sweep_evaluate,
)

SPLITS = ("epic_kitchens", "ego4d")
REPORT_COLUMNS = ("iou", "precision", "hd", "dir_hd", "map")
# higher-is-better for iou/precision/map, lower-is-better for the distances
COLUMN_ARROWS = {"iou": "↑", "precision": "↑", "hd": "↓", "dir_hd": "↓", "map": "↑"}


class BenchmarkFormatError(ValueError):
    pass


@dataclass
class BenchmarkEntry:
    """One benchmark item: image pair, narration, multimodal gt masks."""

    entry_id: str
    split: str
    original_image: str
    inpainted_image: str
    narration: str
    gt_left: Optional[list[BinaryMask]] = None
    gt_right: Optional[list[BinaryMask]] = None
    target_object_masks: Optional[list[BinaryMask]] = None
    provenance: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.split not in SPLITS:
            raise BenchmarkFormatError(
                f"entry {self.entry_id!r}: unknown split {self.split!r}")
        for name in ("gt_left", "gt_right", "target_object_masks"):
            modes = getattr(self, name)
            if modes is not None and len(modes) == 0:
                raise BenchmarkFormatError(
                    f"entry {self.entry_id!r}: {name} present but empty")
        all_masks = (self.gt_left or []) + (self.gt_right or []) + (self.target_object_masks or [])
        if not (self.gt_left or self.gt_right):
            raise BenchmarkFormatError(
                f"entry {self.entry_id!r}: no ground-truth masks")
        dims = {(m.width, m.height) for m in all_masks}
        if len(dims) > 1:
            raise BenchmarkFormatError(
                f"entry {self.entry_id!r}: inconsistent mask dimensions {sorted(dims)}")
        if not any(not m.is_empty() for m in (self.gt_left or []) + (self.gt_right or [])):
            raise BenchmarkFormatError(
                f"entry {self.entry_id!r}: all ground-truth masks are empty")

    def image_size(self) -> tuple[int, int]:
        m = (self.gt_left or self.gt_right or self.target_object_masks)[0]
        return m.width, m.height

    def gt_union(self, hand: str) -> Optional[BinaryMask]:
        modes = self.gt_left if hand == "left" else self.gt_right
        if not modes:
            return None
        return mask_ops.union_all(modes)

    def to_json_obj(self) -> dict:
        def _modes(modes):
            return [m.to_json_obj() for m in modes] if modes is not None else None

        return {
            "entry_id": self.entry_id,
            "split": self.split,
            "original_image": self.original_image,
            "inpainted_image": self.inpainted_image,
            "narration": self.narration,
            "gt_left": _modes(self.gt_left),
            "gt_right": _modes(self.gt_right),
            "target_object_masks": _modes(self.target_object_masks),
            "provenance": self.provenance,
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "BenchmarkEntry":
        def _modes(value):
            if value is None:
                return None
            return [BinaryMask.from_json_obj(m) for m in value]

        try:
            return cls(
                entry_id=str(obj["entry_id"]),
                split=str(obj["split"]),
                original_image=str(obj.get("original_image", "")),
                inpainted_image=str(obj.get("inpainted_image", "")),
                narration=str(obj.get("narration", "")),
                gt_left=_modes(obj.get("gt_left")),
                gt_right=_modes(obj.get("gt_right")),
                target_object_masks=_modes(obj.get("target_object_masks")),
                provenance=dict(obj.get("provenance", {})),
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, BenchmarkFormatError):
                raise
            raise BenchmarkFormatError(f"malformed entry: {exc}") from exc


def save_benchmark(entries: Sequence[BenchmarkEntry], path: Union[str, Path]) -> None:
    payload = {"entries": [e.to_json_obj() for e in entries]}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, ensure_ascii=False, indent=1)
        fh.write("\n")


def load_benchmark(path: Union[str, Path]) -> list[BenchmarkEntry]:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    entries = [BenchmarkEntry.from_json_obj(obj) for obj in payload.get("entries", [])]
    seen = set()
    for entry in entries:
        if entry.entry_id in seen:
            raise BenchmarkFormatError(f"duplicate entry id {entry.entry_id!r}")
        seen.add(entry.entry_id)
    return entries


# -- cropped variant ---------------------------------------------------------


class MissingObjectMasksError(ValueError):
    pass


def make_cropped_variant(entry: BenchmarkEntry, margin: float = 0.1) -> BenchmarkEntry:
    """Crop the entry to an expanded bounding box of its target objects.

    Ground-truth masks reaching outside the box are clipped and flagged in
    provenance; the crop window itself is recorded for traceability.
    """
    if not entry.target_object_masks:
        raise MissingObjectMasksError(
            f"entry {entry.entry_id!r} has no target object masks")
    w, h = entry.image_size()
    tight = mask_ops.union_all(entry.target_object_masks).tight_bbox()
    if tight is None:
        raise MissingObjectMasksError(
            f"entry {entry.entry_id!r} has empty target object masks")
    box = mask_ops.expand_bbox(tight, margin, w, h)

    clipped = []

    def _crop_modes(modes: Optional[list[BinaryMask]], name: str):
        if modes is None:
            return None
        out = []
        for i, m in enumerate(modes):
            cut = m.crop(box)
            if cut.area != m.area:
                clipped.append(f"{name}[{i}]")
            out.append(cut)
        return out

    gt_left = _crop_modes(entry.gt_left, "gt_left")
    gt_right = _crop_modes(entry.gt_right, "gt_right")
    objects = _crop_modes(entry.target_object_masks, "target_object_masks")
    provenance = dict(entry.provenance)
    provenance["crop"] = box.to_json_obj()
    if clipped:
        provenance["clipped"] = clipped
    return BenchmarkEntry(
        entry_id=entry.entry_id,
        split=entry.split,
        original_image=entry.original_image,
        inpainted_image=entry.inpainted_image,
        narration=entry.narration,
        gt_left=gt_left,
        gt_right=gt_right,
        target_object_masks=objects,
        provenance=provenance,
    )


def make_cropped_benchmark(
    entries: Sequence[BenchmarkEntry], margin: float = 0.1,
) -> tuple[list[BenchmarkEntry], list[tuple[str, str]]]:
    """Crop every entry; returns (cropped, skipped-with-reason)."""
    cropped = []
    skipped = []
    for entry in entries:
        try:
            cropped.append(make_cropped_variant(entry, margin))
        except MissingObjectMasksError as exc:
            skipped.append((entry.entry_id, str(exc)))
    return cropped, skipped


# -- predictions ---------------------------------------------------------------


@dataclass
class PredictionEntry:
    """A method's output for one entry: masks, heatmaps, or one shared heatmap."""

    entry_id: str
    mask_left: Optional[BinaryMask] = None
    mask_right: Optional[BinaryMask] = None
    heatmap_left: Optional[Heatmap] = None
    heatmap_right: Optional[Heatmap] = None
    heatmap: Optional[Heatmap] = None
    taxonomy: Optional[str] = None

    def __post_init__(self) -> None:
        channels = (self.mask_left, self.mask_right, self.heatmap_left,
                    self.heatmap_right, self.heatmap)
        if all(c is None for c in channels):
            raise ValueError(
                f"prediction {self.entry_id!r} has no channels; represent an empty "
                "prediction with an explicit empty mask")

    def is_heatmap(self) -> bool:
        return any(h is not None for h in (self.heatmap_left, self.heatmap_right, self.heatmap))

    def hand_heatmap(self, hand: str) -> Optional[Heatmap]:
        specific = self.heatmap_left if hand == "left" else self.heatmap_right
        return specific if specific is not None else self.heatmap

    def hand_mask(self, hand: str) -> Optional[BinaryMask]:
        return self.mask_left if hand == "left" else self.mask_right

    def to_json_obj(self) -> dict:
        obj: dict = {"entry_id": self.entry_id}
        for name in ("mask_left", "mask_right"):
            value = getattr(self, name)
            obj[name] = value.to_json_obj() if value is not None else None
        for name in ("heatmap_left", "heatmap_right", "heatmap"):
            value = getattr(self, name)
            obj[name] = value.to_json_obj() if value is not None else None
        obj["taxonomy"] = self.taxonomy
        return obj

    @classmethod
    def from_json_obj(cls, obj: dict, root: Optional[Union[str, Path]] = None) -> "PredictionEntry":
        def _mask(value):
            return BinaryMask.from_json_obj(value) if value else None

        def _heat(value):
            if not value:
                return None
            if "path" in value:
                path = Path(value["path"])
                if root is not None:
                    path = Path(root) / path
                return Heatmap.from_png(path)
            return Heatmap.from_json_obj(value)

        return cls(
            entry_id=str(obj["entry_id"]),
            mask_left=_mask(obj.get("mask_left")),
            mask_right=_mask(obj.get("mask_right")),
            heatmap_left=_heat(obj.get("heatmap_left")),
            heatmap_right=_heat(obj.get("heatmap_right")),
            heatmap=_heat(obj.get("heatmap")),
            taxonomy=obj.get("taxonomy"),
        )


def write_predictions(predictions: Sequence[PredictionEntry], path: Union[str, Path]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for pred in predictions:
            fh.write(json.dumps(pred.to_json_obj(), separators=(",", ":")) + "\n")


def read_predictions(path: Union[str, Path]) -> list[PredictionEntry]:
    out = []
    root = Path(path).parent
    with open(path, encoding="utf-8") as fh:
        for line_number, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                out.append(PredictionEntry.from_json_obj(json.loads(line), root=root))
            except (json.JSONDecodeError, KeyError, ValueError) as exc:
                raise BenchmarkFormatError(f"predictions line {line_number}: {exc}") from exc
    return out


# -- evaluation -----------------------------------------------------------------


@dataclass
class EvalConfig:
    mode: str = "per-hand"                   # or "union"
    thresholds: tuple = DEFAULT_THRESHOLDS
    crop: bool = False
    bbox_margin: float = 0.1
    mode_scoring: str = "union-of-modes"     # or "best-mode"
    map_metric: str = "precision"

    def __post_init__(self) -> None:
        if self.mode not in ("per-hand", "union"):
            raise ValueError(f"unknown eval mode {self.mode!r}")
        if self.mode_scoring not in ("union-of-modes", "best-mode"):
            raise ValueError(f"unknown mode_scoring {self.mode_scoring!r}")
        if len(self.thresholds) == 0:
            raise ValueError("thresholds must be nonempty")
        if any(not 0.0 <= t <= 1.0 for t in self.thresholds):
            raise ValueError("thresholds must lie in [0, 1]")


@dataclass
class SplitAggregate:
    count: int
    report: Optional[MetricReport]


@dataclass
class EvaluationResult:
    per_entry: dict[str, MetricReport]
    aggregates: dict[str, SplitAggregate]
    skipped_crops: list[tuple[str, str]] = field(default_factory=list)


def _gt_targets(entry: BenchmarkEntry, hand: str, scoring: str) -> Optional[list[BinaryMask]]:
    """Candidate ground-truth masks for one hand under the scoring rule."""
    modes = entry.gt_left if hand == "left" else entry.gt_right
    if not modes:
        return None
    nonempty = [m for m in modes if not m.is_empty()]
    if not nonempty:
        return None
    if scoring == "union-of-modes":
        return [mask_ops.union_all(nonempty)]
    return nonempty


def _best_report(reports: list[MetricReport]) -> MetricReport:
    return max(reports, key=lambda r: (r.iou, r.precision))


def _score_hand(
    pred: Optional[PredictionEntry],
    entry: BenchmarkEntry,
    hand: str,
    config: EvalConfig,
) -> Optional[MetricReport]:
    targets = _gt_targets(entry, hand, config.mode_scoring)
    if targets is None:
        return None
    w, h = entry.image_size()
    heat = pred.hand_heatmap(hand) if pred is not None else None
    if heat is not None:
        reports = [sweep_evaluate(heat, gt, config.thresholds, config.map_metric)
                   for gt in targets]
    else:
        pred_mask = pred.hand_mask(hand) if pred is not None else None
        pred_mask = pred_mask if pred_mask is not None else BinaryMask.empty(w, h)
        reports = [evaluate_masks(pred_mask, gt) for gt in targets]
    return _best_report(reports)


def _score_union(
    pred: Optional[PredictionEntry],
    entry: BenchmarkEntry,
    config: EvalConfig,
) -> MetricReport:
    w, h = entry.image_size()
    unions = [entry.gt_union(hand) for hand in ("left", "right")]
    unions = [u for u in unions if u is not None and not u.is_empty()]
    gt = mask_ops.union_all(unions)
    if pred is not None and pred.is_heatmap():
        heats = [pred.hand_heatmap("left"), pred.hand_heatmap("right")]
        heats = [x for x in heats if x is not None]
        values = heats[0].values
        for other in heats[1:]:
            if other is not heats[0]:
                values = np.maximum(values, other.values)
        combined = Heatmap(gt.width, gt.height, values)
        return sweep_evaluate(combined, gt, config.thresholds, config.map_metric)
    pred_masks = []
    if pred is not None:
        pred_masks = [m for m in (pred.mask_left, pred.mask_right) if m is not None]
    pred_mask = mask_ops.union_all(pred_masks) if pred_masks else BinaryMask.empty(w, h)
    return evaluate_masks(pred_mask, gt)


def evaluate_entry(
    pred: Optional[PredictionEntry],
    entry: BenchmarkEntry,
    config: EvalConfig = EvalConfig(),
) -> MetricReport:
    """Score one prediction (None = missing, counts as empty) on one entry."""
    if config.mode == "union":
        return _score_union(pred, entry, config)
    reports = []
    for hand in ("left", "right"):
        report = _score_hand(pred, entry, hand, config)
        if report is not None:
            reports.append(report)
    return mean_reports(reports)


def evaluate(
    predictions: Sequence[PredictionEntry],
    entries: Sequence[BenchmarkEntry],
    config: EvalConfig = EvalConfig(),
) -> EvaluationResult:
    """Score a full prediction set; aggregates are unweighted per-entry means
    per split plus a combined row over every entry."""
    by_id = {e.entry_id: e for e in entries}
    preds = {}
    for pred in predictions:
        if pred.entry_id not in by_id:
            raise KeyError(f"prediction references unknown entry {pred.entry_id!r}")
        if pred.entry_id in preds:
            raise BenchmarkFormatError(f"duplicate prediction for entry {pred.entry_id!r}")
        preds[pred.entry_id] = pred

    skipped_crops: list[tuple[str, str]] = []
    if config.crop:
        entries, skipped_crops = make_cropped_benchmark(entries, config.bbox_margin)

    per_entry: dict[str, MetricReport] = {}
    by_split: dict[str, list[MetricReport]] = {split: [] for split in SPLITS}
    for entry in entries:
        report = evaluate_entry(preds.get(entry.entry_id), entry, config)
        per_entry[entry.entry_id] = report
        by_split[entry.split].append(report)

    aggregates: dict[str, SplitAggregate] = {}
    for split in SPLITS:
        reports = by_split[split]
        aggregates[split] = SplitAggregate(
            count=len(reports),
            report=mean_reports(reports) if reports else None,
        )
    all_reports = list(per_entry.values())
    aggregates["combined"] = SplitAggregate(
        count=len(all_reports),
        report=mean_reports(all_reports) if all_reports else None,
    )
    return EvaluationResult(per_entry=per_entry, aggregates=aggregates,
                            skipped_crops=skipped_crops)


# -- report emission --------------------------------------------------------------


def _format_metric(name: str, value: Optional[float]) -> str:
    if value is None:
        return ""
    if name in ("hd", "dir_hd"):
        return f"{value:.2f}"
    return f"{value:.4f}"


def _row_cells(aggregates: dict[str, SplitAggregate]) -> list[str]:
    cells = []
    for split in (*SPLITS, "combined"):
        agg = aggregates.get(split)
        report = agg.report if agg is not None else None
        for name in REPORT_COLUMNS:
            cells.append(_format_metric(name, getattr(report, name)) if report else "")
    return cells


def emit_report(
    method_aggregates: dict[str, dict[str, SplitAggregate]],
    fmt: str = "csv",
) -> str:
    """Aggregate table, one row per method, five metric columns per split.

    Arrows in the markdown header mark direction: ↑ higher is better
    (IoU, Precision, mAP), ↓ lower is better (the Hausdorff distances).
    """
    if not method_aggregates:
        raise ValueError("nothing to report")
    methods = sorted(method_aggregates)
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        header = ["model"]
        for split in (*SPLITS, "combined"):
            header += [f"{split}_{name}" for name in REPORT_COLUMNS]
        writer.writerow(header)
        for method in methods:
            writer.writerow([method] + _row_cells(method_aggregates[method]))
        return buf.getvalue()
    if fmt == "markdown":
        header = ["model"]
        for split in (*SPLITS, "combined"):
            header += [f"{split} {name}{COLUMN_ARROWS[name]}" for name in REPORT_COLUMNS]
        lines = ["| " + " | ".join(header) + " |",
                 "|" + "|".join("---" for _ in header) + "|"]
        for method in methods:
            cells = [c if c else "-" for c in _row_cells(method_aggregates[method])]
            lines.append("| " + " | ".join([method] + cells) + " |")
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown report format {fmt!r}")
