"""Vectorized fallback implementations of the hot mask kernels.

Same contracts as the numba backend: boolean (h, w) arrays in, boolean
arrays / integer labels out. Erosion treats pixels outside the image as
background, dilation clips at the image border. All kernels use the full
3x3 (8-neighborhood) structuring element.
"""

import numpy as np

_STRUCT8 = np.ones((3, 3), dtype=bool)


def erode(arr: np.ndarray, iterations: int) -> np.ndarray:
    out = arr
    for _ in range(iterations):
        if not out.any():
            break
        padded = np.pad(out, 1, mode="constant", constant_values=False)
        h, w = out.shape
        acc = np.ones_like(out)
        for dy in range(3):
            for dx in range(3):
                acc &= padded[dy:dy + h, dx:dx + w]
        out = acc
    return out if out is not arr else arr.copy()


def dilate(arr: np.ndarray, iterations: int) -> np.ndarray:
    out = arr
    for _ in range(iterations):
        if out.all():
            break
        padded = np.pad(out, 1, mode="constant", constant_values=False)
        h, w = out.shape
        acc = np.zeros_like(out)
        for dy in range(3):
            for dx in range(3):
                acc |= padded[dy:dy + h, dx:dx + w]
        out = acc
    return out if out is not arr else arr.copy()


def label_components(arr: np.ndarray) -> tuple[np.ndarray, int]:
    from scipy import ndimage  # deferred: keeps worker subprocess startup lean

    labels, count = ndimage.label(arr, structure=_STRUCT8)
    return labels.astype(np.int32), int(count)


def directed_hausdorff_sq(a_yx: np.ndarray, b_yx: np.ndarray) -> int:
    """Max over points of `a` of the min squared distance to points of `b`.

    Coordinates are int64 (N, 2) arrays; exact integer arithmetic so the
    result is bit-stable across backends. Chunked over `a` to bound memory.
    """
    worst = 0
    by = b_yx[:, 0][None, :]
    bx = b_yx[:, 1][None, :]
    chunk = max(1, 2_000_000 // max(1, b_yx.shape[0]))
    for start in range(0, a_yx.shape[0], chunk):
        block = a_yx[start:start + chunk]
        d2 = (block[:, 0][:, None] - by) ** 2 + (block[:, 1][:, None] - bx) ** 2
        worst = max(worst, int(d2.min(axis=1).max()))
    return worst
