"""Affordance extraction pipeline over interaction video sequences.

Stages: propagate sparse keyframe masks to every frame, inpaint the hands
out of the target frame, complete the contacted objects' masks into the
formerly occluded region, intersect with the hand masks, clean up, and
label the interaction taxonomy. Every neural stage is an external oracle
session; all glue here is deterministic, so fixed inputs plus the
deterministic stand-in workers give bit-identical results.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import json

import numpy as np

from . import images, masks
from .dataset import AffordanceRecord, Blacklist
from .masks import BinaryMask
from .oracles import OracleSession
from .taxonomy import TaxonomyLabel

HAND_LEFT = "hand_left"
HAND_RIGHT = "hand_right"


class NoContactError(ValueError):
    """The sequence never shows a hand in contact: not an interaction."""


class StageError(RuntimeError):
    """A pipeline stage failed; carries the stage and sequence for triage."""

    def __init__(self, stage: str, sequence_id: str, cause: Exception):
        self.stage = stage
        self.sequence_id = sequence_id
        self.cause = cause
        super().__init__(f"stage {stage!r} failed on sequence {sequence_id!r}: {cause}")


@dataclass
class KeyframeMasks:
    hand_left: Optional[BinaryMask] = None
    hand_right: Optional[BinaryMask] = None
    objects: dict[str, BinaryMask] = field(default_factory=dict)


@dataclass
class ContactState:
    left_in_contact: bool = False
    left_object: Optional[str] = None
    right_in_contact: bool = False
    right_object: Optional[str] = None


@dataclass
class SequenceAnnotation:
    """A clip with sparse keyframe masks, contact flags, and a narration."""

    sequence_id: str
    frames: list[np.ndarray]
    keyframes: dict[int, KeyframeMasks]
    contact: dict[int, ContactState]
    narration: str
    verb_class: str = ""
    object_classes: list[str] = field(default_factory=list)
    kitchen_id: str = ""
    video_id: str = ""

    def __post_init__(self) -> None:
        if not self.frames:
            raise ValueError(f"sequence {self.sequence_id!r} has no frames")
        if not self.keyframes:
            raise ValueError(f"sequence {self.sequence_id!r} has no keyframes")
        n = len(self.frames)
        for idx in list(self.keyframes) + list(self.contact):
            if not 0 <= idx < n:
                raise ValueError(
                    f"sequence {self.sequence_id!r}: frame index {idx} out of range (n={n})")
        known_objects = self.object_names()
        for idx, state in self.contact.items():
            for name in (state.left_object, state.right_object):
                if name is not None and name not in known_objects:
                    raise ValueError(
                        f"sequence {self.sequence_id!r}: contact frame {idx} names unknown "
                        f"object {name!r}")

    def object_names(self) -> set[str]:
        names: set[str] = set()
        for kf in self.keyframes.values():
            names.update(kf.objects)
        return names

    def frame_size(self) -> tuple[int, int]:
        h, w = self.frames[0].shape[:2]
        return w, h

    @classmethod
    def from_json_obj(cls, obj: dict, root: Optional[Union[str, Path]] = None) -> "SequenceAnnotation":
        def _mask(value):
            return BinaryMask.from_json_obj(value) if value else None

        keyframes = {}
        for idx, kf in obj.get("keyframes", {}).items():
            keyframes[int(idx)] = KeyframeMasks(
                hand_left=_mask(kf.get("hand_left")),
                hand_right=_mask(kf.get("hand_right")),
                objects={name: BinaryMask.from_json_obj(m)
                         for name, m in kf.get("objects", {}).items()},
            )
        contact = {}
        for idx, state in obj.get("contact", {}).items():
            left = state.get("left", {})
            right = state.get("right", {})
            contact[int(idx)] = ContactState(
                left_in_contact=bool(left.get("in_contact", False)),
                left_object=left.get("object"),
                right_in_contact=bool(right.get("in_contact", False)),
                right_object=right.get("object"),
            )
        return cls(
            sequence_id=str(obj["sequence_id"]),
            frames=[images.decode_payload(f, root=root) for f in obj["frames"]],
            keyframes=keyframes,
            contact=contact,
            narration=str(obj.get("narration", "")),
            verb_class=str(obj.get("verb_class", "")),
            object_classes=[str(c) for c in obj.get("object_classes", [])],
            kitchen_id=str(obj.get("kitchen_id", "")),
            video_id=str(obj.get("video_id", "")),
        )

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "SequenceAnnotation":
        path = Path(path)
        with open(path, encoding="utf-8") as fh:
            return cls.from_json_obj(json.load(fh), root=path.parent)


@dataclass
class PipelineConfig:
    completion_strategy: str = "vs"      # "vs" or "ir"
    erode_iterations: int = 1
    dilate_iterations: int = 1
    inpaint_stride: int = 1
    inpaint_halo: int = 2                # hand-mask dilation before compositing
    target_frame: Optional[int] = None   # default: middle contact frame
    blacklist: Blacklist = field(default_factory=Blacklist)


@dataclass
class OracleSet:
    propagator: OracleSession
    inpainter: OracleSession
    completer: OracleSession

    def close(self) -> None:
        for session in (self.propagator, self.inpainter, self.completer):
            session.close()

    def __enter__(self) -> "OracleSet":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()


@dataclass
class ExtractionResult:
    record: AffordanceRecord
    provenance: dict
    inpainted_image: Optional[np.ndarray] = None

    @property
    def rejected(self) -> Optional[str]:
        return self.provenance.get("rejected")


# -- stage 1: dense mask propagation ---------------------------------------


def _entity_keyframes(seq: SequenceAnnotation, entity: str) -> list[int]:
    out = []
    for idx in sorted(seq.keyframes):
        kf = seq.keyframes[idx]
        if entity == HAND_LEFT and kf.hand_left is not None:
            out.append(idx)
        elif entity == HAND_RIGHT and kf.hand_right is not None:
            out.append(idx)
        elif entity.startswith("object:") and entity[7:] in kf.objects:
            out.append(idx)
    return out


def _entity_mask(seq: SequenceAnnotation, entity: str, idx: int) -> BinaryMask:
    kf = seq.keyframes[idx]
    if entity == HAND_LEFT:
        return kf.hand_left
    if entity == HAND_RIGHT:
        return kf.hand_right
    return kf.objects[entity[7:]]


def propagate_masks(seq: SequenceAnnotation, session: OracleSession) -> dict[int, dict[str, BinaryMask]]:
    """Dense per-frame masks for every entity present in any keyframe.

    Frames are propagated forward from the latest keyframe at or before
    them (backward from the first keyframe for earlier frames), one oracle
    request per keyframe segment. Keyframe frames keep their input masks
    verbatim regardless of what the oracle answers.
    """
    if session.kind != "propagator":
        raise ValueError(f"propagate_masks needs a propagator session, got {session.kind!r}")
    w, h = seq.frame_size()
    n = len(seq.frames)
    entities = [HAND_LEFT, HAND_RIGHT] + [f"object:{name}" for name in sorted(seq.object_names())]
    dense: dict[int, dict[str, BinaryMask]] = {i: {} for i in range(n)}

    for entity in entities:
        keyframes = _entity_keyframes(seq, entity)
        if not keyframes:
            continue
        # segment ownership: latest keyframe <= frame, else the first keyframe
        segments: dict[int, list[int]] = {k: [] for k in keyframes}
        for frame in range(n):
            earlier = [k for k in keyframes if k <= frame]
            source = earlier[-1] if earlier else keyframes[0]
            segments[source].append(frame)
        for source, frame_indices in segments.items():
            if not frame_indices:
                continue
            limit = max(1, session.capabilities.max_frames_per_request)
            for start in range(0, len(frame_indices), limit):
                chunk = frame_indices[start:start + limit]
                out = session.request_masks(
                    expected=len(chunk),
                    expected_size=(w, h),
                    frames=[seq.frames[i] for i in chunk],
                    masks=[_entity_mask(seq, entity, source)],
                    params={"keyframe_index": source, "frame_indices": chunk,
                            "entity": entity, "sequence": seq.sequence_id},
                )
                for frame, mask in zip(chunk, out):
                    dense[frame][entity] = mask
        for idx in keyframes:  # postcondition: keyframes pass through unchanged
            dense[idx][entity] = _entity_mask(seq, entity, idx)
    return dense


# -- stage 2: hand inpainting -----------------------------------------------


def select_inpaint_window(target: int, n_frames: int, size: int = 4, stride: int = 1) -> list[int]:
    """The target frame plus preceding frames at the given stride; near the
    start of the sequence, the earliest frames fill the window instead."""
    if n_frames < 1:
        raise ValueError("need at least one frame")
    idxs = [target - k * stride for k in range(size - 1, 0, -1)] + [target]
    if idxs[0] < 0:
        idxs = list(range(min(size, n_frames)))
        if target not in idxs:
            idxs = list(range(max(0, target - size + 1), target + 1))
    seen = []
    for i in idxs:
        if 0 <= i < n_frames and i not in seen:
            seen.append(i)
    return seen


def inpaint_hands(
    frames: Sequence[np.ndarray],
    hand_masks: Sequence[BinaryMask],
    target: int,
    session: OracleSession,
    stride: int = 1,
    halo: int = 2,
    context: Optional[dict] = None,
) -> np.ndarray:
    """Remove the hands from the target frame.

    The oracle sees a short window of frames plus their hand masks; its
    output is composited back so that pixels outside the (halo-dilated)
    hand region stay bit-identical to the input.
    """
    if session.kind != "inpainter":
        raise ValueError(f"inpaint_hands needs an inpainter session, got {session.kind!r}")
    if len(frames) < 1:
        raise ValueError("need at least one frame")
    target_frame = frames[target]
    region_mask = hand_masks[target]
    if region_mask.is_empty():
        return target_frame.copy()
    window = select_inpaint_window(target, len(frames),
                                   size=session.capabilities.input_window, stride=stride)
    out_image = session.request_image(
        expected_shape=target_frame.shape,
        frames=[frames[i] for i in window],
        masks=[hand_masks[i] for i in window],
        params={"target_index": target, "window_indices": window, **(context or {})},
    )
    region = region_mask.dilate(halo).to_array() if halo > 0 else region_mask.to_array()
    composited = target_frame.copy()
    composited[region] = out_image[region]
    return composited


# -- stage 3: mask completion -------------------------------------------------


def complete_mask_vs(
    original: np.ndarray,
    inpainted: np.ndarray,
    object_mask: BinaryMask,
    session: OracleSession,
) -> BinaryMask:
    """Video-segmentation completion: the oracle re-segments the object on
    the inpainted image seeded by its mask on the original image."""
    if session.kind != "completer_vs":
        raise ValueError(f"complete_mask_vs needs a completer_vs session, got {session.kind!r}")
    if object_mask.is_empty():
        raise ValueError("cannot complete an empty object mask")
    [completed] = session.request_masks(
        expected=1,
        expected_size=(object_mask.width, object_mask.height),
        frames=[original, inpainted],
        masks=[object_mask],
        params={},
    )
    return completed


def complete_mask_ir(
    object_mask: BinaryMask,
    hand_mask: BinaryMask,
    session: OracleSession,
) -> BinaryMask:
    """Image-reconstruction completion: the oracle extends the mask raster
    inside the hand region; everything outside it passes through."""
    if session.kind != "completer_ir":
        raise ValueError(f"complete_mask_ir needs a completer_ir session, got {session.kind!r}")
    if hand_mask.is_empty():
        return object_mask
    [raw] = session.request_masks(
        expected=1,
        expected_size=(object_mask.width, object_mask.height),
        masks=[object_mask, hand_mask],
        params={},
    )
    outside = object_mask.intersect(hand_mask.complement())
    inside = raw.intersect(hand_mask)
    return outside.union(inside)


# -- stage 4: affordance extraction ------------------------------------------


def extract_affordance(
    completed_masks: Sequence[BinaryMask],
    hand_mask: BinaryMask,
    erode_iterations: int = 1,
    dilate_iterations: int = 1,
) -> BinaryMask:
    """Contact region: intersect completed object masks with the hand mask,
    open to drop speckle, and keep the single largest component."""
    if not completed_masks:
        return BinaryMask.empty(hand_mask.width, hand_mask.height)
    overlap = masks.union_all(completed_masks).intersect(hand_mask)
    cleaned = overlap.erode(erode_iterations).dilate(dilate_iterations)
    return masks.largest_component(cleaned)


# -- stage 5: taxonomy --------------------------------------------------------


def classify_taxonomy(contact: dict[int, ContactState]) -> TaxonomyLabel:
    """Hands-in-contact pattern over the action window.

    Both hands touching with any shared object name is symmetric; both
    touching disjoint objects is asymmetric.
    """
    left_objects: set[str] = set()
    right_objects: set[str] = set()
    left_any = right_any = False
    for state in contact.values():
        if state.left_in_contact:
            left_any = True
            if state.left_object:
                left_objects.add(state.left_object)
        if state.right_in_contact:
            right_any = True
            if state.right_object:
                right_objects.add(state.right_object)
    if not left_any and not right_any:
        raise NoContactError("no hand is ever in contact")
    if left_any and not right_any:
        return TaxonomyLabel.UNIMANUAL_LEFT
    if right_any and not left_any:
        return TaxonomyLabel.UNIMANUAL_RIGHT
    if left_objects & right_objects:
        return TaxonomyLabel.BIMANUAL_SYMMETRIC
    return TaxonomyLabel.BIMANUAL_ASYMMETRIC


# -- full pipeline --------------------------------------------------------------


def _contact_frames(seq: SequenceAnnotation) -> list[int]:
    return sorted(idx for idx, state in seq.contact.items()
                  if state.left_in_contact or state.right_in_contact)


def _contacted_objects(seq: SequenceAnnotation, hand: str) -> set[str]:
    names: set[str] = set()
    for state in seq.contact.values():
        if hand == "left" and state.left_in_contact and state.left_object:
            names.add(state.left_object)
        if hand == "right" and state.right_in_contact and state.right_object:
            names.add(state.right_object)
    return names


def run_pipeline(
    seq: SequenceAnnotation,
    oracles: OracleSet,
    config: PipelineConfig = PipelineConfig(),
) -> ExtractionResult:
    """Full extraction for one sequence; rejections are recorded, not raised."""
    w, h = seq.frame_size()

    def _stage(name, fn, *args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except Exception as exc:
            raise StageError(name, seq.sequence_id, exc) from exc

    taxonomy = _stage("taxonomy", classify_taxonomy, seq.contact)
    dense = _stage("propagate", propagate_masks, seq, oracles.propagator)

    contact_frames = _contact_frames(seq)
    if config.target_frame is not None:
        target = config.target_frame
    else:
        target = contact_frames[len(contact_frames) // 2]

    def _hand_mask(frame: int, entity: str) -> BinaryMask:
        return dense[frame].get(entity) or BinaryMask.empty(w, h)

    hands_union = [
        _hand_mask(i, HAND_LEFT).union(_hand_mask(i, HAND_RIGHT))
        for i in range(len(seq.frames))
    ]
    inpainted = _stage(
        "inpaint", inpaint_hands, seq.frames, hands_union, target,
        oracles.inpainter, stride=config.inpaint_stride, halo=config.inpaint_halo,
        context={"sequence": seq.sequence_id})

    contacted = {
        "left": _contacted_objects(seq, "left"),
        "right": _contacted_objects(seq, "right"),
    }
    completed: dict[str, BinaryMask] = {}
    for name in sorted(contacted["left"] | contacted["right"]):
        object_mask = dense[target].get(f"object:{name}")
        if object_mask is None or object_mask.is_empty():
            continue
        if config.completion_strategy == "vs":
            completed[name] = _stage(
                "complete", complete_mask_vs, seq.frames[target], inpainted,
                object_mask, oracles.completer)
        elif config.completion_strategy == "ir":
            completed[name] = _stage(
                "complete", complete_mask_ir, object_mask, hands_union[target],
                oracles.completer)
        else:
            raise StageError("complete", seq.sequence_id,
                             ValueError(f"unknown strategy {config.completion_strategy!r}"))

    def _affordance(hand_entity: str, hand_key: str) -> Optional[BinaryMask]:
        hand = dense[target].get(hand_entity)
        if hand is None or hand.is_empty():
            return None
        completions = [completed[n] for n in sorted(contacted[hand_key]) if n in completed]
        out = _stage("extract", extract_affordance, completions, hand,
                     config.erode_iterations, config.dilate_iterations)
        return out

    left = _affordance(HAND_LEFT, "left") if taxonomy.uses_left else None
    right = _affordance(HAND_RIGHT, "right") if taxonomy.uses_right else None

    record = AffordanceRecord(
        record_id=seq.sequence_id,
        kitchen_id=seq.kitchen_id,
        video_id=seq.video_id,
        inpainted_frame=f"{seq.sequence_id}_frame{target:04d}.png",
        left_mask=left,
        right_mask=right,
        narration=seq.narration,
        verb_class=seq.verb_class,
        object_names=sorted(seq.object_names()),
        object_masks={n: m for n, m in completed.items()} or None,
        taxonomy=taxonomy,
    )
    rejected = record.consistency_error()
    if rejected is None and config.blacklist.matches(record.narration) is not None:
        rejected = "blacklisted-narration"
    provenance = {
        "completion_strategy": config.completion_strategy,
        "cleanup": {"erode": config.erode_iterations, "dilate": config.dilate_iterations},
        "oracles": {
            "propagator": oracles.propagator.identifier,
            "inpainter": oracles.inpainter.identifier,
            "completer": oracles.completer.identifier,
        },
        "target_frame": target,
        "rejected": rejected,
    }
    return ExtractionResult(record=record, provenance=provenance, inpainted_image=inpainted)


def compare_completion_strategies(
    seq: SequenceAnnotation,
    vs_oracles: OracleSet,
    ir_oracles: OracleSet,
    config: PipelineConfig = PipelineConfig(),
) -> dict:
    """Run both completion strategies and report where their masks diverge."""
    import dataclasses

    from . import metrics

    vs_result = run_pipeline(seq, vs_oracles,
                             dataclasses.replace(config, completion_strategy="vs"))
    ir_result = run_pipeline(seq, ir_oracles,
                             dataclasses.replace(config, completion_strategy="ir"))
    report = {"sequence_id": seq.sequence_id, "hands": {}}
    for hand in ("left", "right"):
        vs_mask = getattr(vs_result.record, f"{hand}_mask")
        ir_mask = getattr(ir_result.record, f"{hand}_mask")
        if vs_mask is None and ir_mask is None:
            continue
        w, hgt = seq.frame_size()
        vs_mask = vs_mask or BinaryMask.empty(w, hgt)
        ir_mask = ir_mask or BinaryMask.empty(w, hgt)
        both_empty = vs_mask.is_empty() and ir_mask.is_empty()
        report["hands"][hand] = {
            "vs_area": vs_mask.area,
            "ir_area": ir_mask.area,
            "iou": 1.0 if both_empty else metrics.iou(vs_mask, ir_mask),
            "diverged": vs_mask != ir_mask,
        }
    report["diverged"] = any(h["diverged"] for h in report["hands"].values())
    return report
