"""Annotation persistence for the benchmark-building backend.

Every annotator action appends to an event log (the source of truth,
auditable after the fact); a compacted state file is rewritten after each
accepted write so restarts are cheap. Per-task optimistic versioning:
writes carry the version they were based on and lose with 409 semantics
if the task moved underneath them.
"""

from __future__ import annotations

import json
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

from .benchmark import BenchmarkEntry
from .masks import BinaryMask


class UnknownTaskError(KeyError):
    pass


class VersionConflictError(RuntimeError):
    def __init__(self, task_id: str, current_version: int):
        self.task_id = task_id
        self.current_version = current_version
        super().__init__(
            f"task {task_id!r} is at version {current_version}")


class MalformedMaskError(ValueError):
    pass


@dataclass
class TaskState:
    task_id: str
    split: str
    original_image: str
    inpainted_image: str
    narration: str
    width: Optional[int] = None
    height: Optional[int] = None
    version: int = 0
    left: Optional[BinaryMask] = None
    right: Optional[BinaryMask] = None
    annotator: str = ""
    skips: list[str] = field(default_factory=list)

    def annotated(self) -> bool:
        return any(m is not None and not m.is_empty() for m in (self.left, self.right))

    def summary(self) -> dict:
        return {
            "task_id": self.task_id,
            "split": self.split,
            "narration": self.narration,
            "original_image": self.original_image,
            "inpainted_image": self.inpainted_image,
            "version": self.version,
            "annotated": self.annotated(),
        }

    def view(self) -> dict:
        return {
            **self.summary(),
            "width": self.width,
            "height": self.height,
            "left": self.left.to_json_obj() if self.left else None,
            "right": self.right.to_json_obj() if self.right else None,
            "annotator": self.annotator,
        }


def _decode_mask(value, task: TaskState) -> Optional[BinaryMask]:
    if value is None:
        return None
    try:
        mask = BinaryMask.from_json_obj(value)
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedMaskError(f"bad mask payload: {exc}") from exc
    if task.width is not None and (mask.width, mask.height) != (task.width, task.height):
        raise MalformedMaskError(
            f"mask is {mask.width}x{mask.height}, task expects {task.width}x{task.height}")
    return mask


class AnnotationStore:
    """Task queue + event log + compacted state under one directory."""

    def __init__(self, tasks_path: Union[str, Path], store_dir: Union[str, Path]):
        self._lock = threading.Lock()
        self.store_dir = Path(store_dir)
        self.store_dir.mkdir(parents=True, exist_ok=True)
        self.events_path = self.store_dir / "events.jsonl"
        self.state_path = self.store_dir / "state.json"

        with open(tasks_path, encoding="utf-8") as fh:
            manifest = json.load(fh)
        self.tasks: dict[str, TaskState] = {}
        for obj in manifest.get("tasks", []):
            task = TaskState(
                task_id=str(obj["task_id"]),
                split=str(obj.get("split", "epic_kitchens")),
                original_image=str(obj.get("original_image", "")),
                inpainted_image=str(obj.get("inpainted_image", "")),
                narration=str(obj.get("narration", "")),
                width=obj.get("width"),
                height=obj.get("height"),
            )
            self.tasks[task.task_id] = task
        self._replay_events()

    def _replay_events(self) -> None:
        if not self.events_path.exists():
            return
        with open(self.events_path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                event = json.loads(line)
                task = self.tasks.get(event.get("task_id"))
                if task is None:
                    continue
                if event.get("event") == "annotate":
                    task.left = _decode_mask(event.get("left"), task)
                    task.right = _decode_mask(event.get("right"), task)
                    task.version = int(event["version"])
                    task.annotator = str(event.get("annotator", ""))
                elif event.get("event") == "skip":
                    task.skips.append(str(event.get("annotator", "")))

    def _append_event(self, event: dict) -> None:
        with open(self.events_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(event, separators=(",", ":")) + "\n")
            fh.flush()
            os.fsync(fh.fileno())

    def _compact(self) -> None:
        state = {tid: task.view() for tid, task in self.tasks.items()}
        tmp = self.state_path.with_suffix(".tmp")
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(state, fh)
        tmp.replace(self.state_path)

    # -- queries -----------------------------------------------------------

    def list_tasks(self) -> list[dict]:
        with self._lock:
            return [t.summary() for t in sorted(self.tasks.values(), key=lambda t: t.task_id)]

    def get_task(self, task_id: str) -> dict:
        with self._lock:
            task = self.tasks.get(task_id)
            if task is None:
                raise UnknownTaskError(task_id)
            return task.view()

    # -- writes --------------------------------------------------------------

    def put_annotation(self, task_id: str, left, right, base_version: int,
                       annotator: str = "") -> int:
        """Atomic optimistic write; returns the new version."""
        with self._lock:
            task = self.tasks.get(task_id)
            if task is None:
                raise UnknownTaskError(task_id)
            if base_version != task.version:
                raise VersionConflictError(task_id, task.version)
            left_mask = _decode_mask(left, task)
            right_mask = _decode_mask(right, task)
            if left_mask is not None and right_mask is not None:
                if (left_mask.width, left_mask.height) != (right_mask.width, right_mask.height):
                    raise MalformedMaskError("left/right masks disagree on dimensions")
            new_version = task.version + 1
            self._append_event({
                "ts": time.time(),
                "event": "annotate",
                "task_id": task_id,
                "annotator": annotator,
                "left": left,
                "right": right,
                "version": new_version,
            })
            task.left = left_mask
            task.right = right_mask
            task.version = new_version
            task.annotator = annotator
            self._compact()
            return new_version

    def record_skip(self, task_id: str, annotator: str = "", reason: str = "") -> None:
        with self._lock:
            if task_id not in self.tasks:
                raise UnknownTaskError(task_id)
            self._append_event({
                "ts": time.time(),
                "event": "skip",
                "task_id": task_id,
                "annotator": annotator,
                "reason": reason,
            })
            self.tasks[task_id].skips.append(annotator)

    # -- export ---------------------------------------------------------------

    def export_entries(self) -> list[BenchmarkEntry]:
        """Annotated tasks as loadable benchmark entries."""
        with self._lock:
            entries = []
            for task in sorted(self.tasks.values(), key=lambda t: t.task_id):
                if not task.annotated():
                    continue
                def _modes(mask):
                    return [mask] if mask is not None and not mask.is_empty() else None
                entries.append(BenchmarkEntry(
                    entry_id=task.task_id,
                    split=task.split,
                    original_image=task.original_image,
                    inpainted_image=task.inpainted_image,
                    narration=task.narration,
                    gt_left=_modes(task.left),
                    gt_right=_modes(task.right),
                    provenance={"annotator": task.annotator, "version": task.version},
                ))
            return entries
