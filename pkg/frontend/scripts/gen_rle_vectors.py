#!/usr/bin/env python3
"""Regenerate the 2HRLE conformance vectors shared by the mask library
and the annotation UI. Deterministic; run from anywhere:

    python frontend/scripts/gen_rle_vectors.py
"""

import json
from pathlib import Path

import numpy as np

from bimaff.masks import BinaryMask

OUT = Path(__file__).parent.parent / "test" / "fixtures" / "rle_vectors.json"


def vector(name, arr):
    arr = np.asarray(arr, dtype=bool)
    mask = BinaryMask.from_array(arr)
    return {
        "name": name,
        "w": mask.width,
        "h": mask.height,
        "bits": "".join("1" if b else "0" for b in arr.ravel()),
        "runs": list(mask.runs),
    }


def main():
    rng = np.random.default_rng(20240915)
    vectors = [
        vector("one-pixel-set", [[True]]),
        vector("one-pixel-clear", [[False]]),
        vector("all-zeros-2x2", np.zeros((2, 2))),
        vector("all-ones-2x2", np.ones((2, 2))),
        vector("alternating-3x1", [[False, True, False]]),
        vector("row-ends", [[True, False, False, True]]),
        vector("column-5x1", np.ones((5, 1))),
        vector("checkerboard-4x4", np.indices((4, 4)).sum(axis=0) % 2 == 0),
        vector("wide-1x9", [[0, 1, 1, 1, 0, 0, 1, 0, 1]]),
        vector("corner-pixels", np.pad(np.zeros((6, 6)), 0) + np.isin(
            np.arange(36).reshape(6, 6), [0, 5, 30, 35])),
    ]
    for i in range(10):
        w = int(rng.integers(1, 24))
        h = int(rng.integers(1, 24))
        vectors.append(vector(f"random-{i}-{w}x{h}", rng.random((h, w)) < rng.uniform(0, 1)))
    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text(json.dumps(vectors, indent=1) + "\n")
    print(f"wrote {len(vectors)} vectors to {OUT}")


if __name__ == "__main__":
    main()
