"""Post-processing between raw model outputs and benchmark-ready
predictions: prompt templating, taxonomy-gated mask emission, object-mask
stabilization, and point/box-to-heatmap adapters for baseline methods.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .benchmark import PredictionEntry
from .masks import BinaryMask
from .metrics import Heatmap, threshold as threshold_heatmap

PLACEHOLDER = "{action_narration}"

DEFAULT_PROMPT_TEMPLATE = (
    "USER: [IMAGE] Where would you interact with the objects to perform the "
    "action {action_narration} in this image? ANSWER: Use region: [SEG]."
)

# 3-way class order; argmax ties resolve to the earliest class
GATE_CLASSES = ("left", "right", "bimanual")


@dataclass(frozen=True)
class PromptTemplate:
    template: str = DEFAULT_PROMPT_TEMPLATE

    def __post_init__(self) -> None:
        if self.template.count(PLACEHOLDER) != 1:
            raise ValueError(
                f"template must contain {PLACEHOLDER} exactly once")

    def render(self, narration: str) -> str:
        if not narration.strip():
            raise ValueError("narration must be nonempty")
        # plain substring replacement: braces in the narration stay literal
        return self.template.replace(PLACEHOLDER, narration)


def render_prompt(template: Union[str, PromptTemplate], narration: str) -> str:
    if isinstance(template, str):
        template = PromptTemplate(template)
    return template.render(narration)


@dataclass
class ModelOutput:
    """Raw decoder output: two heatmaps plus 3-way taxonomy logits."""

    heatmap_left: Heatmap
    heatmap_right: Heatmap
    taxonomy_logits: np.ndarray
    entry_id: str = ""

    def __post_init__(self) -> None:
        logits = np.asarray(self.taxonomy_logits, dtype=np.float64)
        if logits.shape != (3,):
            raise ValueError(f"expected 3 taxonomy logits, got shape {logits.shape}")
        if not np.isfinite(logits).all():
            raise ValueError("taxonomy logits must be finite")
        if (self.heatmap_left.width, self.heatmap_left.height) != (
                self.heatmap_right.width, self.heatmap_right.height):
            raise ValueError("left/right heatmaps must share dimensions")
        self.taxonomy_logits = logits

    @classmethod
    def from_json_obj(cls, obj: dict) -> "ModelOutput":
        return cls(
            heatmap_left=Heatmap.from_json_obj(obj["heatmap_left"]),
            heatmap_right=Heatmap.from_json_obj(obj["heatmap_right"]),
            taxonomy_logits=np.asarray(obj["taxonomy_logits"], dtype=np.float64),
            entry_id=str(obj.get("entry_id", "")),
        )


@dataclass
class GatedPrediction:
    left: Optional[BinaryMask]
    right: Optional[BinaryMask]
    taxonomy: str


def gate_by_taxonomy(out: ModelOutput, binarize_at: float = 0.5) -> GatedPrediction:
    """Emit only the masks the predicted taxonomy calls for.

    A "left" prediction suppresses the right heatmap entirely and vice
    versa; "bimanual" emits both. Adding a constant to all logits never
    changes the outcome.
    """
    if not 0.0 <= binarize_at <= 1.0:
        raise ValueError(f"threshold {binarize_at} outside [0, 1]")
    taxonomy = GATE_CLASSES[int(np.argmax(out.taxonomy_logits))]
    left = threshold_heatmap(out.heatmap_left, binarize_at) if taxonomy in ("left", "bimanual") else None
    right = threshold_heatmap(out.heatmap_right, binarize_at) if taxonomy in ("right", "bimanual") else None
    return GatedPrediction(left=left, right=right, taxonomy=taxonomy)


def refine_with_object_mask(aff_mask: BinaryMask, object_mask: BinaryMask) -> BinaryMask:
    """Clip an affordance mask to a detected object region.

    Pairs with a lowered binarization threshold: the optimistic, larger
    mask is stabilized by keeping only the part on the object.
    """
    return aff_mask.intersect(object_mask)


# preset for on-robot use: looser threshold, then object intersection
ROBOT_BINARIZE_THRESHOLD = 0.3


def robot_mode_masks(out: ModelOutput, object_mask: BinaryMask) -> GatedPrediction:
    gated = gate_by_taxonomy(out, binarize_at=ROBOT_BINARIZE_THRESHOLD)
    return GatedPrediction(
        left=refine_with_object_mask(gated.left, object_mask) if gated.left else None,
        right=refine_with_object_mask(gated.right, object_mask) if gated.right else None,
        taxonomy=gated.taxonomy,
    )


def heatmap_from_points(
    points: Sequence[tuple[float, float]],
    width: int,
    height: int,
    radii: Optional[Sequence[float]] = None,
) -> Heatmap:
    """Isotropic Gaussian bump per point, max-combined, peak value 1.

    Adapts point-affordance baselines to the heatmap interface. Default
    radius is 5% of the image diagonal; per-point radii take precedence.
    """
    default_sigma = 0.05 * math.hypot(width, height)
    values = np.zeros((height, width), dtype=np.float64)
    ys, xs = np.mgrid[0:height, 0:width]
    for i, (px, py) in enumerate(points):
        if not (0 <= px < width and 0 <= py < height):
            raise ValueError(f"point ({px}, {py}) outside {width}x{height} image")
        sigma = float(radii[i]) if radii is not None else default_sigma
        if sigma <= 0:
            raise ValueError(f"radius must be > 0, got {sigma}")
        d2 = (xs - px) ** 2 + (ys - py) ** 2
        values = np.maximum(values, np.exp(-d2 / (2.0 * sigma * sigma)))
    return Heatmap(width, height, values)


def heatmap_from_bbox(x_min: int, y_min: int, x_max: int, y_max: int,
                      width: int, height: int) -> Heatmap:
    """Uniform value 1 inside the box; adapts box-affordance baselines."""
    if not (0 <= x_min <= x_max < width and 0 <= y_min <= y_max < height):
        raise ValueError("bbox outside image bounds")
    values = np.zeros((height, width), dtype=np.float64)
    values[y_min:y_max + 1, x_min:x_max + 1] = 1.0
    return Heatmap(width, height, values)


def gated_to_prediction(entry_id: str, gated: GatedPrediction) -> PredictionEntry:
    """An explicitly-empty mask stands in for a suppressed hand so the
    prediction stays representable (and scoreable) on its own."""
    reference = gated.left or gated.right
    empty = BinaryMask.empty(reference.width, reference.height)
    return PredictionEntry(
        entry_id=entry_id,
        mask_left=gated.left if gated.left is not None else empty,
        mask_right=gated.right if gated.right is not None else empty,
        taxonomy=gated.taxonomy,
    )


def convert_model_outputs(
    in_path: Union[str, Path],
    out_path: Union[str, Path],
    binarize_at: float = 0.5,
) -> int:
    """Read raw ModelOutput JSONL, gate each line, write PredictionEntry JSONL."""
    count = 0
    with open(in_path, encoding="utf-8") as src, open(out_path, "w", encoding="utf-8") as dst:
        for line_number, line in enumerate(src, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                out = ModelOutput.from_json_obj(json.loads(line))
            except (json.JSONDecodeError, KeyError, ValueError) as exc:
                raise ValueError(f"model outputs line {line_number}: {exc}") from exc
            gated = gate_by_taxonomy(out, binarize_at)
            pred = gated_to_prediction(out.entry_id or f"entry_{line_number}", gated)
            dst.write(json.dumps(pred.to_json_obj(), separators=(",", ":")) + "\n")
            count += 1
    return count
