"""Deterministic stand-in oracles speaking the pipeline wire protocol.

Run as ``python -m bimaff.oracle_workers --kind <name>``. These replace
the neural stages in tests and fixtures:

  identity     echoes inputs back (any kind)
  shift        mask propagator that translates the keyframe mask by a
               fixed per-frame-step offset (--dx/--dy)
  clean_plate  inpainter that returns a pre-rendered hands-free frame
               from a plate file (--plates, JSON {frame_index: payload})
  appearance   video-segmentation completer: grows the object mask to
               every inpainted-image pixel matching the object's modal
               intensity, keeping components connected to the input mask
  convex_fill  image-reconstruction completer: orthogonal span fill of
               the mask raster, writing only inside the hand region
  wrong_size   protocol chaos monkey for error-path tests

Responses are pure functions of the request plus static CLI parameters,
so pipeline runs driven by these workers are bit-reproducible.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

# stand-in workers handle tiny rasters; their subprocesses should not pay
# the JIT import/compile cost on every spawn
os.environ.setdefault("BIMAFF_NO_NUMBA", "1")

import numpy as np

from . import images
from .masks import BinaryMask


def _shift_array(arr: np.ndarray, dx: int, dy: int) -> np.ndarray:
    """Translate, filling vacated pixels with background."""
    out = np.zeros_like(arr)
    h, w = arr.shape
    src_x = slice(max(0, -dx), min(w, w - dx))
    src_y = slice(max(0, -dy), min(h, h - dy))
    dst_x = slice(max(0, dx), min(w, w + dx))
    dst_y = slice(max(0, dy), min(h, h + dy))
    out[dst_y, dst_x] = arr[src_y, src_x]
    return out


def _span_fill(arr: np.ndarray) -> np.ndarray:
    """Orthogonal convex fill: close row and column spans to a fixpoint."""
    out = arr.copy()
    h, w = out.shape
    changed = True
    while changed:
        changed = False
        for y in range(h):
            xs = np.nonzero(out[y])[0]
            if xs.size >= 2:
                lo, hi = xs[0], xs[-1]
                if out[y, lo:hi + 1].sum() != hi - lo + 1:
                    out[y, lo:hi + 1] = True
                    changed = True
        for x in range(w):
            ys = np.nonzero(out[:, x])[0]
            if ys.size >= 2:
                lo, hi = ys[0], ys[-1]
                if out[lo:hi + 1, x].sum() != hi - lo + 1:
                    out[lo:hi + 1, x] = True
                    changed = True
    return out


def _grow_components_touching(seed: np.ndarray, candidate: np.ndarray) -> np.ndarray:
    """Candidate pixels 8-connected (through candidate) to the seed."""
    from . import _kernels

    labels, count = _kernels.label_components(candidate | seed)
    keep = np.zeros_like(candidate)
    seed_labels = set(np.unique(labels[seed])) - {0}
    for lab in seed_labels:
        keep |= labels == lab
    return keep & (candidate | seed)


def _to_gray(img: np.ndarray) -> np.ndarray:
    if img.ndim == 3:
        return img.mean(axis=2).astype(np.uint8)
    return img


class Worker:
    def __init__(self, args: argparse.Namespace) -> None:
        self.mode = args.kind
        self.dx = args.dx
        self.dy = args.dy
        self.plates = {}
        if args.plates:
            with open(args.plates) as fh:
                raw = json.load(fh)
            # keys: "<sequence>/<frame>" or plain "<frame>"
            self.plates = {str(k): images.decode_payload(v) for k, v in raw.items()}
        self.shifts = {}
        if args.shifts:
            with open(args.shifts) as fh:
                self.shifts = {str(k): (int(v[0]), int(v[1]))
                               for k, v in json.load(fh).items()}

    # -- per-kind handlers ------------------------------------------------

    def propagate(self, request: dict) -> dict:
        params = request["params"]
        keyframe = int(params["keyframe_index"])
        frame_indices = [int(i) for i in params["frame_indices"]]
        mask = BinaryMask.from_json_obj(request["masks"][0])
        dx, dy = self.shifts.get(str(params.get("sequence", "")), (self.dx, self.dy))
        out = []
        for idx in frame_indices:
            if self.mode == "shift":
                step = idx - keyframe
                arr = _shift_array(mask.to_array(), dx * step, dy * step)
                out.append(BinaryMask.from_array(arr))
            else:
                out.append(mask)
        return {"masks": [m.to_json_obj() for m in out]}

    def inpaint(self, request: dict) -> dict:
        params = request["params"]
        target = int(params["target_index"])
        window = [int(i) for i in params["window_indices"]]
        frames = [images.decode_payload(f) for f in request["frames"]]
        if self.mode == "clean_plate":
            scoped = f"{params.get('sequence', '')}/{target}"
            img = self.plates.get(scoped, self.plates.get(str(target)))
            if img is None:
                return {"error": f"no clean plate for frame {scoped!r}"}
        else:
            img = frames[window.index(target)]
        return {"image": images.encode_payload(img)}

    def complete_vs(self, request: dict) -> dict:
        original = _to_gray(images.decode_payload(request["frames"][0]))
        inpainted = _to_gray(images.decode_payload(request["frames"][1]))
        mask = BinaryMask.from_json_obj(request["masks"][0]).to_array()
        if self.mode == "identity":
            return {"masks": [request["masks"][0]]}
        values, counts = np.unique(original[mask], return_counts=True)
        modal = values[counts.argmax()]
        candidate = inpainted == modal
        completed = _grow_components_touching(mask & candidate, candidate)
        return {"masks": [BinaryMask.from_array(completed).to_json_obj()]}

    def complete_ir(self, request: dict) -> dict:
        mask = BinaryMask.from_json_obj(request["masks"][0]).to_array()
        hand = BinaryMask.from_json_obj(request["masks"][1]).to_array()
        if self.mode == "identity":
            completed = mask
        else:
            completed = mask | (_span_fill(mask) & hand)
        return {"masks": [BinaryMask.from_array(completed).to_json_obj()]}

    # -- dispatch ----------------------------------------------------------

    def handle(self, request: dict) -> dict:
        if self.mode == "wrong_size":
            return {"masks": [BinaryMask.empty(1, 1).to_json_obj()],
                    "image": images.encode_payload(np.zeros((1, 1), dtype=np.uint8))}
        kind = request.get("kind")
        if kind == "propagator":
            return self.propagate(request)
        if kind == "inpainter":
            return self.inpaint(request)
        if kind == "completer_vs":
            return self.complete_vs(request)
        if kind == "completer_ir":
            return self.complete_ir(request)
        return {"error": f"unsupported request kind {kind!r}"}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--kind", required=True,
                        choices=["identity", "shift", "clean_plate", "appearance",
                                 "convex_fill", "wrong_size"])
    parser.add_argument("--dx", type=int, default=0, help="x shift per frame step")
    parser.add_argument("--dy", type=int, default=0, help="y shift per frame step")
    parser.add_argument("--plates", default=None, help="JSON file of clean-plate payloads")
    parser.add_argument("--shifts", default=None,
                        help="JSON file of per-sequence [dx, dy] overrides")
    args = parser.parse_args(argv)
    worker = Worker(args)

    for line in sys.stdin:
        line = line.strip()
        if not line:
            continue
        req_id = None
        try:
            request = json.loads(line)
            req_id = request.get("id")
            response = worker.handle(request)
        except Exception as exc:  # defensive: a worker must never die mid-protocol
            response = {"error": f"{type(exc).__name__}: {exc}"}
        response["id"] = req_id
        sys.stdout.write(json.dumps(response) + "\n")
        sys.stdout.flush()
    return 0


if __name__ == "__main__":
    sys.exit(main())
