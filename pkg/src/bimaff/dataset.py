"""Affordance dataset records: JSONL storage, consistency filtering,
flip/jitter/crop augmentation, and summary statistics.

Records are stored one JSON object per line so multi-hundred-thousand
record datasets stream in bounded memory and diff cleanly. Masks are
inline 2HRLE objects; images are referenced by relative path. Unknown
fields round-trip untouched in lenient mode, and field order is fixed so
rewriting a dataset is byte-stable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Optional, Sequence, TextIO, Union

import numpy as np

from .masks import BBox, BinaryMask
from .taxonomy import TaxonomyLabel

DEFAULT_BLACKLIST = ("something", "look at")

_FIELD_ORDER = (
    "record_id", "kitchen_id", "video_id", "inpainted_frame", "left_mask",
    "right_mask", "narration", "verb_class", "object_names", "object_masks",
    "taxonomy", "augmentation_tags", "crop_box",
)


class RecordFormatError(ValueError):
    def __init__(self, message: str, line_number: Optional[int] = None):
        self.line_number = line_number
        prefix = f"line {line_number}: " if line_number is not None else ""
        super().__init__(prefix + message)


@dataclass
class AffordanceRecord:
    """One datapoint: an inpainted frame plus left/right affordance masks.

    A unimanual action leaves the unused hand's mask absent (or empty);
    ``extra`` carries unknown fields read in lenient mode so they survive
    a round-trip.
    """

    record_id: str
    inpainted_frame: str
    narration: str
    taxonomy: TaxonomyLabel
    left_mask: Optional[BinaryMask] = None
    right_mask: Optional[BinaryMask] = None
    kitchen_id: str = ""
    video_id: str = ""
    verb_class: str = ""
    object_names: list[str] = field(default_factory=list)
    object_masks: Optional[dict[str, BinaryMask]] = None
    augmentation_tags: list[str] = field(default_factory=list)
    crop_box: Optional[BBox] = None
    extra: dict = field(default_factory=dict)

    def consistency_error(self) -> Optional[str]:
        """Reason this record violates the taxonomy/mask contract, if any."""
        left = self.left_mask is not None and not self.left_mask.is_empty()
        right = self.right_mask is not None and not self.right_mask.is_empty()
        if not left and not right:
            return "empty-affordance-mask"
        if self.taxonomy in (TaxonomyLabel.BIMANUAL_SYMMETRIC, TaxonomyLabel.BIMANUAL_ASYMMETRIC):
            if not (left and right):
                return "bimanual-with-one-mask"
        elif self.taxonomy is TaxonomyLabel.UNIMANUAL_LEFT:
            if not left or right:
                return "unimanual-mask-mismatch"
        elif self.taxonomy is TaxonomyLabel.UNIMANUAL_RIGHT:
            if not right or left:
                return "unimanual-mask-mismatch"
        masks = [m for m in (self.left_mask, self.right_mask) if m is not None]
        if self.object_masks:
            masks += list(self.object_masks.values())
        dims = {(m.width, m.height) for m in masks}
        if len(dims) > 1:
            return "mask-dimension-mismatch"
        return None

    def to_json_obj(self) -> dict:
        obj = {
            "record_id": self.record_id,
            "kitchen_id": self.kitchen_id,
            "video_id": self.video_id,
            "inpainted_frame": self.inpainted_frame,
            "left_mask": self.left_mask.to_json_obj() if self.left_mask else None,
            "right_mask": self.right_mask.to_json_obj() if self.right_mask else None,
            "narration": self.narration,
            "verb_class": self.verb_class,
            "object_names": list(self.object_names),
            "object_masks": (
                {k: v.to_json_obj() for k, v in sorted(self.object_masks.items())}
                if self.object_masks else None
            ),
            "taxonomy": self.taxonomy.value,
            "augmentation_tags": list(self.augmentation_tags),
            "crop_box": self.crop_box.to_json_obj() if self.crop_box else None,
        }
        for key, value in self.extra.items():
            if key not in obj:
                obj[key] = value
        return obj

    @classmethod
    def from_json_obj(cls, obj: dict) -> "AffordanceRecord":
        def _mask(value):
            return BinaryMask.from_json_obj(value) if value else None

        try:
            record = cls(
                record_id=str(obj["record_id"]),
                kitchen_id=str(obj.get("kitchen_id", "")),
                video_id=str(obj.get("video_id", "")),
                inpainted_frame=str(obj.get("inpainted_frame", "")),
                left_mask=_mask(obj.get("left_mask")),
                right_mask=_mask(obj.get("right_mask")),
                narration=str(obj.get("narration", "")),
                verb_class=str(obj.get("verb_class", "")),
                object_names=[str(n) for n in obj.get("object_names", [])],
                object_masks=(
                    {k: BinaryMask.from_json_obj(v) for k, v in obj["object_masks"].items()}
                    if obj.get("object_masks") else None
                ),
                taxonomy=TaxonomyLabel(obj["taxonomy"]),
                augmentation_tags=[str(t) for t in obj.get("augmentation_tags", [])],
                crop_box=BBox.from_json_obj(obj["crop_box"]) if obj.get("crop_box") else None,
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise RecordFormatError(f"bad record: {exc}") from exc
        record.extra = {k: v for k, v in obj.items() if k not in _FIELD_ORDER}
        return record


def record_to_line(record: AffordanceRecord) -> str:
    return json.dumps(record.to_json_obj(), ensure_ascii=False, separators=(",", ":"))


def write_records(records: Iterable[AffordanceRecord], path: Union[str, Path, TextIO]) -> int:
    """Stream records to JSONL; returns the number written."""
    own = isinstance(path, (str, Path))
    fh = open(path, "w", encoding="utf-8") if own else path
    count = 0
    try:
        for record in records:
            fh.write(record_to_line(record) + "\n")
            count += 1
    finally:
        if own:
            fh.close()
    return count


def read_records(path: Union[str, Path], strict: bool = True,
                 on_skip=None) -> Iterator[AffordanceRecord]:
    """Stream records from JSONL.

    Strict mode raises RecordFormatError with the offending line number;
    lenient mode skips bad lines, reporting each through ``on_skip``.
    """
    with open(path, encoding="utf-8") as fh:
        for line_number, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                record = AffordanceRecord.from_json_obj(obj)
            except (json.JSONDecodeError, RecordFormatError, ValueError) as exc:
                if strict:
                    raise RecordFormatError(str(exc), line_number) from exc
                if on_skip is not None:
                    on_skip(line_number, str(exc))
                continue
            yield record


# -- filtering -----------------------------------------------------------


@dataclass(frozen=True)
class Blacklist:
    """Lowercase narration phrases that mark a record as too vague."""

    phrases: tuple[str, ...] = DEFAULT_BLACKLIST

    def __post_init__(self) -> None:
        cleaned = tuple(p.strip().lower() for p in self.phrases if p.strip())
        if len(cleaned) != len(self.phrases):
            raise ValueError("blacklist phrases must be nonempty")
        object.__setattr__(self, "phrases", cleaned)

    def matches(self, narration: str) -> Optional[str]:
        lowered = narration.lower()
        for phrase in self.phrases:
            if phrase in lowered:
                return phrase
        return None

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "Blacklist":
        with open(path, encoding="utf-8") as fh:
            phrases = [line.strip() for line in fh if line.strip()]
        return cls(tuple(phrases))


@dataclass(frozen=True)
class Rejection:
    record: AffordanceRecord
    reason: str


def filter_records(
    records: Iterable[AffordanceRecord],
    blacklist: Blacklist = Blacklist(),
) -> tuple[list[AffordanceRecord], list[Rejection]]:
    """Drop inconsistent records and blacklisted narrations.

    Returns (kept, rejected); every input lands in exactly one of the two.
    """
    kept: list[AffordanceRecord] = []
    rejected: list[Rejection] = []
    for record in records:
        reason = record.consistency_error()
        if reason is None and blacklist.matches(record.narration) is not None:
            reason = "blacklisted-narration"
        if reason is None:
            kept.append(record)
        else:
            rejected.append(Rejection(record, reason))
    return kept, rejected


# -- augmentation ----------------------------------------------------------


def hflip_augment(record: AffordanceRecord) -> AffordanceRecord:
    """Mirror the action: flip masks, swap hands, swap the taxonomy side.

    The image itself is not touched here; the appended tag tells renderers
    to flip the referenced frame. Applying this twice restores the record
    up to its tag history.
    """
    return AffordanceRecord(
        record_id=record.record_id,
        kitchen_id=record.kitchen_id,
        video_id=record.video_id,
        inpainted_frame=record.inpainted_frame,
        left_mask=record.right_mask.hflip() if record.right_mask else None,
        right_mask=record.left_mask.hflip() if record.left_mask else None,
        narration=record.narration,
        verb_class=record.verb_class,
        object_names=list(record.object_names),
        object_masks=(
            {k: v.hflip() for k, v in record.object_masks.items()}
            if record.object_masks else None
        ),
        taxonomy=record.taxonomy.hflipped(),
        augmentation_tags=record.augmentation_tags + ["hflipped"],
        crop_box=record.crop_box,
        extra=dict(record.extra),
    )


@dataclass(frozen=True)
class JitterRanges:
    """Sampling amplitudes: factor ranges [1-x, 1+x], hue shift [-hue, +hue]."""

    brightness: float = 0.2
    contrast: float = 0.2
    saturation: float = 0.2
    hue: float = 0.05

    def __post_init__(self) -> None:
        for name in ("brightness", "contrast", "saturation"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} amplitude must lie in [0, 1], got {v}")
        if not 0.0 <= self.hue <= 0.5:
            raise ValueError(f"hue amplitude must lie in [0, 0.5], got {self.hue}")


def _rgb_to_hsv(rgb: np.ndarray) -> np.ndarray:
    """Vectorized RGB->HSV on float arrays in [0, 1], shape (..., 3)."""
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    maxc = rgb.max(axis=-1)
    minc = rgb.min(axis=-1)
    v = maxc
    c = maxc - minc
    safe_c = np.where(c == 0.0, 1.0, c)
    s = np.where(maxc == 0.0, 0.0, c / np.where(maxc == 0.0, 1.0, maxc))
    rc = (maxc - r) / safe_c
    gc = (maxc - g) / safe_c
    bc = (maxc - b) / safe_c
    h = np.where(maxc == r, bc - gc, np.where(maxc == g, 2.0 + rc - bc, 4.0 + gc - rc))
    h = np.where(c == 0.0, 0.0, (h / 6.0) % 1.0)
    return np.stack([h, s, v], axis=-1)


def _hsv_to_rgb(hsv: np.ndarray) -> np.ndarray:
    h, s, v = hsv[..., 0], hsv[..., 1], hsv[..., 2]
    i = np.floor(h * 6.0).astype(int) % 6
    f = h * 6.0 - np.floor(h * 6.0)
    p = v * (1.0 - s)
    q = v * (1.0 - s * f)
    t = v * (1.0 - s * (1.0 - f))
    r = np.choose(i, [v, q, p, p, t, v])
    g = np.choose(i, [t, v, v, q, p, p])
    b = np.choose(i, [p, p, t, v, v, q])
    return np.stack([r, g, b], axis=-1)


def apply_jitter(image: np.ndarray, brightness: float = 1.0, contrast: float = 1.0,
                 saturation: float = 1.0, hue: float = 0.0) -> np.ndarray:
    """Deterministic photometric transform with explicit factors.

    Factors of 1.0 (and hue 0.0) are the identity. Works on (h, w) gray or
    (h, w, 3) RGB uint8; output is clamped back to uint8.
    """
    gray_in = image.ndim == 2
    img = image.astype(np.float64)
    if gray_in:
        img = np.stack([img] * 3, axis=2)

    if brightness != 1.0:
        img = img * brightness
    if contrast != 1.0:
        luminance = (0.299 * img[..., 0] + 0.587 * img[..., 1] + 0.114 * img[..., 2]).mean()
        img = img * contrast + (1.0 - contrast) * luminance
    if saturation != 1.0:
        gray = 0.299 * img[..., 0] + 0.587 * img[..., 1] + 0.114 * img[..., 2]
        img = img * saturation + (1.0 - saturation) * gray[..., None]
    if hue != 0.0:
        hsv = _rgb_to_hsv(np.clip(img, 0.0, 255.0) / 255.0)
        hsv[..., 0] = (hsv[..., 0] + hue) % 1.0
        img = _hsv_to_rgb(hsv) * 255.0

    out = np.clip(np.round(img), 0, 255).astype(np.uint8)
    return out[..., 0] if gray_in else out


def color_jitter(image: np.ndarray, seed: int,
                 ranges: JitterRanges = JitterRanges()) -> np.ndarray:
    """Seeded photometric augmentation; masks are never touched."""
    rng = np.random.default_rng(seed)
    brightness = float(rng.uniform(1.0 - ranges.brightness, 1.0 + ranges.brightness))
    contrast = float(rng.uniform(1.0 - ranges.contrast, 1.0 + ranges.contrast))
    saturation = float(rng.uniform(1.0 - ranges.saturation, 1.0 + ranges.saturation))
    hue = float(rng.uniform(-ranges.hue, ranges.hue))
    return apply_jitter(image, brightness, contrast, saturation, hue)


def random_crop(record: AffordanceRecord, seed: int,
                min_scale: float = 0.7) -> Union[AffordanceRecord, Rejection]:
    """Seeded crop that must keep every affordance mask fully inside.

    A window that would cut a nonempty affordance mask yields a Rejection
    value instead of a record. Object masks are clipped, not protected.
    """
    if not 0.0 < min_scale <= 1.0:
        raise ValueError(f"min_scale must lie in (0, 1], got {min_scale}")
    reference = record.left_mask or record.right_mask
    if reference is None:
        return Rejection(record, "crop-without-masks")
    w, h = reference.width, reference.height
    rng = np.random.default_rng(seed)
    scale = float(rng.uniform(min_scale, 1.0))
    crop_w = max(1, int(round(w * scale)))
    crop_h = max(1, int(round(h * scale)))
    x0 = int(rng.integers(0, w - crop_w + 1))
    y0 = int(rng.integers(0, h - crop_h + 1))
    box = BBox(x0, y0, x0 + crop_w - 1, y0 + crop_h - 1)

    for mask in (record.left_mask, record.right_mask):
        if mask is None or mask.is_empty():
            continue
        tight = mask.tight_bbox()
        if (tight.x_min < box.x_min or tight.x_max > box.x_max
                or tight.y_min < box.y_min or tight.y_max > box.y_max):
            return Rejection(record, "crop-cuts-affordance-mask")

    def _crop(mask: Optional[BinaryMask]) -> Optional[BinaryMask]:
        return mask.crop(box) if mask is not None else None

    return AffordanceRecord(
        record_id=record.record_id,
        kitchen_id=record.kitchen_id,
        video_id=record.video_id,
        inpainted_frame=record.inpainted_frame,
        left_mask=_crop(record.left_mask),
        right_mask=_crop(record.right_mask),
        narration=record.narration,
        verb_class=record.verb_class,
        object_names=list(record.object_names),
        object_masks=(
            {k: v.crop(box) for k, v in record.object_masks.items()}
            if record.object_masks else None
        ),
        taxonomy=record.taxonomy,
        augmentation_tags=record.augmentation_tags + ["cropped"],
        crop_box=box,
        extra=dict(record.extra),
    )


# -- statistics ------------------------------------------------------------


@dataclass(frozen=True)
class DatasetStats:
    left_handed: int
    right_handed: int
    symmetric: int
    asymmetric: int
    total: int
    n_kitchens: int
    n_videos: int
    n_object_classes: int
    n_verb_classes: int

    def __post_init__(self) -> None:
        parts = self.left_handed + self.right_handed + self.symmetric + self.asymmetric
        if parts != self.total:
            raise ValueError(
                f"taxonomy counts {parts} do not sum to total {self.total}")

    def to_json_obj(self) -> dict:
        return {
            "left_handed": self.left_handed,
            "right_handed": self.right_handed,
            "symmetric": self.symmetric,
            "asymmetric": self.asymmetric,
            "total": self.total,
            "n_kitchens": self.n_kitchens,
            "n_videos": self.n_videos,
            "n_object_classes": self.n_object_classes,
            "n_verb_classes": self.n_verb_classes,
        }

    def to_table(self) -> str:
        rows = [
            ("Left Handed", self.left_handed),
            ("Right Handed", self.right_handed),
            ("Symmetric", self.symmetric),
            ("Asymmetric", self.asymmetric),
            ("Total", self.total),
            ("No. Kitchen Environments", self.n_kitchens),
            ("No. Videos", self.n_videos),
            ("No. Object Classes", self.n_object_classes),
            ("No. Verb Classes", self.n_verb_classes),
        ]
        width = max(len(name) for name, _ in rows)
        return "\n".join(f"{name:<{width}}  {value:>10,}" for name, value in rows)


def compute_stats(records: Iterable[AffordanceRecord]) -> DatasetStats:
    counts = {label: 0 for label in TaxonomyLabel}
    kitchens: set[str] = set()
    videos: set[str] = set()
    objects: set[str] = set()
    verbs: set[str] = set()
    total = 0
    for record in records:
        total += 1
        counts[record.taxonomy] += 1
        if record.kitchen_id:
            kitchens.add(record.kitchen_id)
        if record.video_id:
            videos.add(record.video_id)
        objects.update(record.object_names)
        if record.verb_class:
            verbs.add(record.verb_class)
    return DatasetStats(
        left_handed=counts[TaxonomyLabel.UNIMANUAL_LEFT],
        right_handed=counts[TaxonomyLabel.UNIMANUAL_RIGHT],
        symmetric=counts[TaxonomyLabel.BIMANUAL_SYMMETRIC],
        asymmetric=counts[TaxonomyLabel.BIMANUAL_ASYMMETRIC],
        total=total,
        n_kitchens=len(kitchens),
        n_videos=len(videos),
        n_object_classes=len(objects),
        n_verb_classes=len(verbs),
    )
