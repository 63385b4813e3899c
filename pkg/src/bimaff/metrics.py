"""Segmentation metric suite: IoU, precision, Hausdorff distances,
heatmap thresholding, and multi-threshold sweep aggregation.

Degenerate cases follow one policy throughout: an empty prediction scores
0 IoU / 0 precision and is flagged, and any Hausdorff comparison against
an empty pixel set costs the full image diagonal, the worst attainable
distance. Trivially-empty predictions therefore never score well.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from PIL import Image

from . import _kernels
from .masks import BinaryMask, DimensionMismatchError, _check_same_size

DEFAULT_THRESHOLDS = (0.1, 0.3, 0.5, 0.7, 0.9)


@dataclass(frozen=True)
class Heatmap:
    """Row-major probability raster with values in [0, 1]."""

    width: int
    height: int
    values: np.ndarray

    def __post_init__(self) -> None:
        arr = np.ascontiguousarray(np.asarray(self.values, dtype=np.float64))
        if arr.ndim == 1:
            arr = arr.reshape(self.height, self.width)
        if arr.shape != (self.height, self.width):
            raise DimensionMismatchError(
                f"heatmap values shape {arr.shape} != {self.height}x{self.width}"
            )
        if self.width < 1 or self.height < 1:
            raise ValueError("heatmap dimensions must be >= 1")
        if not np.isfinite(arr).all() or arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError("heatmap values must lie in [0, 1]")
        object.__setattr__(self, "values", arr)

    @classmethod
    def from_mask(cls, mask: BinaryMask) -> "Heatmap":
        return cls(mask.width, mask.height, mask.to_array().astype(np.float64))

    def to_json_obj(self) -> dict:
        return {"w": self.width, "h": self.height, "values": self.values.ravel().tolist()}

    @classmethod
    def from_json_obj(cls, obj: dict) -> "Heatmap":
        return cls(int(obj["w"]), int(obj["h"]), np.asarray(obj["values"], dtype=np.float64))

    def to_png(self, path) -> None:
        """16-bit single-channel raster, full scale = 1.0."""
        scaled = np.round(self.values * 65535.0).astype(np.uint16)
        Image.fromarray(scaled).save(path)

    @classmethod
    def from_png(cls, path) -> "Heatmap":
        arr = np.asarray(Image.open(path), dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError("heatmap rasters must be single-channel")
        h, w = arr.shape
        return cls(w, h, arr / 65535.0)


@dataclass
class MetricReport:
    """One evaluated comparison; distances are in pixels."""

    iou: float
    precision: float
    hd: float
    dir_hd: float
    map: Optional[float] = None
    degenerate: bool = False
    per_threshold: Optional[list[tuple[float, "MetricReport"]]] = field(default=None)

    def to_json_obj(self) -> dict:
        obj = {
            "iou": self.iou,
            "precision": self.precision,
            "hd": self.hd,
            "dir_hd": self.dir_hd,
            "map": self.map,
            "degenerate": self.degenerate,
        }
        if self.per_threshold is not None:
            obj["per_threshold"] = [
                {"threshold": t, "report": r.to_json_obj()} for t, r in self.per_threshold
            ]
        return obj

    def to_json(self) -> str:
        return json.dumps(self.to_json_obj(), sort_keys=True)


def diagonal(width: int, height: int) -> float:
    """Worst-case pixel distance in a width x height image."""
    return math.sqrt(width * width + height * height)


def iou(pred: BinaryMask, gt: BinaryMask) -> float:
    _check_same_size(pred, gt)
    inter = pred.intersect(gt).area
    uni = pred.area + gt.area - inter
    if uni == 0:
        return 0.0
    return inter / uni


def precision(pred: BinaryMask, gt: BinaryMask) -> float:
    _check_same_size(pred, gt)
    if pred.area == 0:
        return 0.0
    return pred.intersect(gt).area / pred.area


def directed_hausdorff(from_mask: BinaryMask, to_mask: BinaryMask) -> float:
    """Max over `from` pixels of the Euclidean distance to the nearest `to` pixel.

    Either side empty costs the image diagonal.
    """
    _check_same_size(from_mask, to_mask)
    if from_mask.is_empty() or to_mask.is_empty():
        return diagonal(from_mask.width, from_mask.height)
    a = from_mask.pixels()[:, ::-1].copy()  # (y, x) for the kernels
    b = to_mask.pixels()[:, ::-1].copy()
    return math.sqrt(_kernels.directed_hausdorff_sq(a, b))


def hausdorff(a: BinaryMask, b: BinaryMask) -> float:
    _check_same_size(a, b)
    if a.is_empty() or b.is_empty():
        return diagonal(a.width, a.height)
    a_yx = a.pixels()[:, ::-1].copy()
    b_yx = b.pixels()[:, ::-1].copy()
    forward = _kernels.directed_hausdorff_sq(a_yx, b_yx)
    backward = _kernels.directed_hausdorff_sq(b_yx, a_yx)
    return math.sqrt(max(forward, backward))


def threshold(h: Heatmap, t: float) -> BinaryMask:
    """Pixels with value >= t; raising t never adds pixels."""
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"threshold {t} outside [0, 1]")
    return BinaryMask.from_array(h.values >= t)


def evaluate_masks(pred: BinaryMask, gt: BinaryMask) -> MetricReport:
    """All four base metrics for one prediction/ground-truth pair."""
    _check_same_size(pred, gt)
    return MetricReport(
        iou=iou(pred, gt),
        precision=precision(pred, gt),
        hd=hausdorff(pred, gt),
        dir_hd=directed_hausdorff(pred, gt),
        degenerate=pred.is_empty() or gt.is_empty(),
    )


def sweep_evaluate(
    h: Heatmap, gt: BinaryMask, thresholds: Sequence[float] = DEFAULT_THRESHOLDS,
    map_metric: str = "precision",
) -> MetricReport:
    """Threshold sweep: best IoU/precision, best (lowest) distances, and the
    sweep-mean score reported as mAP.

    ``map_metric`` selects which per-threshold score is averaged into the
    mAP column ("precision", the default reading, or "iou").
    """
    if len(thresholds) == 0:
        raise ValueError("at least one threshold is required")
    if h.width != gt.width or h.height != gt.height:
        raise DimensionMismatchError(
            f"heatmap {h.width}x{h.height} vs ground truth {gt.width}x{gt.height}"
        )
    if map_metric not in ("precision", "iou"):
        raise ValueError(f"unknown map_metric {map_metric!r}")
    per = [(float(t), evaluate_masks(threshold(h, t), gt)) for t in thresholds]
    reports = [r for _, r in per]
    map_value = float(np.mean([getattr(r, map_metric) for r in reports]))
    return MetricReport(
        iou=max(r.iou for r in reports),
        precision=max(r.precision for r in reports),
        hd=min(r.hd for r in reports),
        dir_hd=min(r.dir_hd for r in reports),
        map=map_value,
        degenerate=all(r.degenerate for r in reports),
        per_threshold=per,
    )


def mean_reports(reports: Sequence[MetricReport]) -> MetricReport:
    """Plain unweighted mean of every metric; mAP averaged where present."""
    if not reports:
        raise ValueError("cannot average zero reports")
    maps = [r.map for r in reports if r.map is not None]
    return MetricReport(
        iou=float(np.mean([r.iou for r in reports])),
        precision=float(np.mean([r.precision for r in reports])),
        hd=float(np.mean([r.hd for r in reports])),
        dir_hd=float(np.mean([r.dir_hd for r in reports])),
        map=float(np.mean(maps)) if maps else None,
        degenerate=any(r.degenerate for r in reports),
    )


def evaluate_pair(
    pred_left: Optional[BinaryMask],
    pred_right: Optional[BinaryMask],
    gt_left: Optional[BinaryMask],
    gt_right: Optional[BinaryMask],
    mode: str = "per-hand",
) -> MetricReport:
    """Score a two-handed prediction against two-handed ground truth.

    "union" pools both hands into a single comparison; "per-hand" scores
    each hand that has ground truth (a missing prediction counts as empty)
    and averages the per-hand metrics.
    """
    gts = [g for g in (gt_left, gt_right) if g is not None and not g.is_empty()]
    if not gts:
        raise ValueError("at least one nonempty ground-truth mask is required")
    w, h = gts[0].width, gts[0].height

    def _or_empty(m: Optional[BinaryMask]) -> BinaryMask:
        return m if m is not None else BinaryMask.empty(w, h)

    if mode == "union":
        pred = _or_empty(pred_left).union(_or_empty(pred_right))
        gt = _or_empty(gt_left).union(_or_empty(gt_right))
        return evaluate_masks(pred, gt)
    if mode == "per-hand":
        reports = []
        for pred, gt in ((pred_left, gt_left), (pred_right, gt_right)):
            if gt is not None and not gt.is_empty():
                reports.append(evaluate_masks(_or_empty(pred), gt))
        return mean_reports(reports)
    raise ValueError(f"unknown mode {mode!r}; expected 'per-hand' or 'union'")
