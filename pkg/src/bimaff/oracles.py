"""Client side of the external-oracle protocol.

Every neural stage of the extraction pipeline (mask propagation, hand
inpainting, mask completion) runs out-of-process behind the same wire
protocol: newline-delimited JSON over a child process's stdin/stdout,
one request in flight per session.

Request:  {"id": int, "kind": str, "frames": [image payload...],
           "masks": [2HRLE...], "params": {...}}
Response: {"id": int, "masks": [2HRLE...]} and/or {"image": payload},
          or {"id": int, "error": str}

Deterministic stand-in workers speaking this protocol ship in
``bimaff.oracle_workers`` and drive the test suite; production deployments
point the same sessions at wrappers around real models.
"""

from __future__ import annotations

import json
import subprocess
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import images
from .masks import BinaryMask

ORACLE_KINDS = ("propagator", "inpainter", "completer_vs", "completer_ir")


class OracleError(RuntimeError):
    """The oracle reported a failure or the transport broke."""


class OracleProtocolError(OracleError):
    """The oracle answered, but with a malformed or mismatched response."""


@dataclass
class OracleCapabilities:
    max_frames_per_request: int = 64
    input_window: int = 4


@dataclass
class OracleSession:
    """One child process speaking the ndjson oracle protocol.

    Not thread-safe: each worker thread owns its own sessions.
    """

    kind: str
    command: Sequence[str]
    capabilities: OracleCapabilities = field(default_factory=OracleCapabilities)
    identifier: str = ""

    def __post_init__(self) -> None:
        if self.kind not in ORACLE_KINDS:
            raise ValueError(f"unknown oracle kind {self.kind!r}")
        if not self.identifier:
            self.identifier = " ".join(self.command)
        self._proc: Optional[subprocess.Popen] = None
        self._next_id = 0

    def _ensure_started(self) -> subprocess.Popen:
        if self._proc is None or self._proc.poll() is not None:
            try:
                self._proc = subprocess.Popen(
                    list(self.command),
                    stdin=subprocess.PIPE,
                    stdout=subprocess.PIPE,
                    text=True,
                )
            except OSError as exc:
                raise OracleError(f"cannot launch oracle {self.identifier!r}: {exc}") from exc
        return self._proc

    def request(
        self,
        frames: Sequence[np.ndarray] = (),
        masks: Sequence[BinaryMask] = (),
        params: Optional[dict] = None,
    ) -> dict:
        proc = self._ensure_started()
        req_id = self._next_id
        self._next_id += 1
        message = {
            "id": req_id,
            "kind": self.kind,
            "frames": [images.encode_payload(f) for f in frames],
            "masks": [m.to_json_obj() for m in masks],
            "params": params or {},
        }
        try:
            proc.stdin.write(json.dumps(message) + "\n")
            proc.stdin.flush()
            line = proc.stdout.readline()
        except (BrokenPipeError, OSError) as exc:
            raise OracleError(f"oracle {self.identifier!r} transport failed: {exc}") from exc
        if not line:
            raise OracleError(f"oracle {self.identifier!r} closed its stream")
        try:
            response = json.loads(line)
        except json.JSONDecodeError as exc:
            raise OracleProtocolError(
                f"oracle {self.identifier!r} sent invalid JSON: {line[:200]!r}") from exc
        if response.get("id") != req_id:
            raise OracleProtocolError(
                f"oracle {self.identifier!r} answered id {response.get('id')} to request {req_id}")
        if response.get("error"):
            raise OracleError(f"oracle {self.identifier!r} error: {response['error']}")
        return response

    def request_masks(self, expected: int, expected_size: tuple[int, int], **kwargs) -> list[BinaryMask]:
        """Request and decode masks, validating count and dimensions."""
        response = self.request(**kwargs)
        raw = response.get("masks")
        if not isinstance(raw, list) or len(raw) != expected:
            got = len(raw) if isinstance(raw, list) else "none"
            raise OracleProtocolError(
                f"oracle {self.identifier!r} returned {got} masks, expected {expected}")
        out = []
        for obj in raw:
            try:
                mask = BinaryMask.from_json_obj(obj)
            except (KeyError, TypeError, ValueError) as exc:
                raise OracleProtocolError(
                    f"oracle {self.identifier!r} returned a malformed mask: {exc}") from exc
            if (mask.width, mask.height) != expected_size:
                raise OracleProtocolError(
                    f"oracle {self.identifier!r} returned a {mask.width}x{mask.height} mask, "
                    f"expected {expected_size[0]}x{expected_size[1]}")
            out.append(mask)
        return out

    def request_image(self, expected_shape: tuple, **kwargs) -> np.ndarray:
        response = self.request(**kwargs)
        if "image" not in response:
            raise OracleProtocolError(f"oracle {self.identifier!r} returned no image")
        img = images.decode_payload(response["image"])
        if img.shape != tuple(expected_shape):
            raise OracleProtocolError(
                f"oracle {self.identifier!r} returned image shape {img.shape}, "
                f"expected {tuple(expected_shape)}")
        return img

    def close(self) -> None:
        if self._proc is not None:
            if self._proc.stdin:
                try:
                    self._proc.stdin.close()
                except OSError:
                    pass
            try:
                self._proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self._proc.kill()
                self._proc.wait()
            self._proc = None

    def __enter__(self) -> "OracleSession":
        self._ensure_started()
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()
