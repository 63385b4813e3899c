"""Numba-compiled mask kernels (the default backend).

Mirrors numpy_impl exactly; see that module for the contracts. Compiled
lazily on first call, cached on disk between runs.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def _erode_once(arr):
    h, w = arr.shape
    out = np.zeros((h, w), dtype=np.bool_)
    for y in range(h):
        for x in range(w):
            if not arr[y, x]:
                continue
            keep = True
            for dy in range(-1, 2):
                for dx in range(-1, 2):
                    ny = y + dy
                    nx = x + dx
                    if ny < 0 or ny >= h or nx < 0 or nx >= w or not arr[ny, nx]:
                        keep = False
                        break
                if not keep:
                    break
            out[y, x] = keep
    return out


@njit(cache=True)
def _dilate_once(arr):
    h, w = arr.shape
    out = np.zeros((h, w), dtype=np.bool_)
    for y in range(h):
        for x in range(w):
            if arr[y, x]:
                out[y, x] = True
                continue
            hit = False
            for dy in range(-1, 2):
                for dx in range(-1, 2):
                    ny = y + dy
                    nx = x + dx
                    if 0 <= ny < h and 0 <= nx < w and arr[ny, nx]:
                        hit = True
                        break
                if hit:
                    break
            out[y, x] = hit
    return out


@njit(cache=True)
def _label_components(arr):
    h, w = arr.shape
    labels = np.zeros((h, w), dtype=np.int32)
    stack = np.empty(h * w, dtype=np.int64)
    count = 0
    for y0 in range(h):
        for x0 in range(w):
            if not arr[y0, x0] or labels[y0, x0] != 0:
                continue
            count += 1
            top = 0
            stack[top] = y0 * w + x0
            top += 1
            labels[y0, x0] = count
            while top > 0:
                top -= 1
                idx = stack[top]
                y = idx // w
                x = idx % w
                for dy in range(-1, 2):
                    for dx in range(-1, 2):
                        ny = y + dy
                        nx = x + dx
                        if 0 <= ny < h and 0 <= nx < w:
                            if arr[ny, nx] and labels[ny, nx] == 0:
                                labels[ny, nx] = count
                                stack[top] = ny * w + nx
                                top += 1
    return labels, count


@njit(cache=True)
def _directed_hausdorff_sq(a_yx, b_yx):
    worst = np.int64(0)
    for i in range(a_yx.shape[0]):
        ay = a_yx[i, 0]
        ax = a_yx[i, 1]
        best = np.int64(2) ** 62
        for j in range(b_yx.shape[0]):
            dy = ay - b_yx[j, 0]
            dx = ax - b_yx[j, 1]
            d2 = dy * dy + dx * dx
            if d2 < best:
                best = d2
                if best <= worst:
                    # cannot raise the running max; stop scanning b
                    break
        if best > worst:
            worst = best
    return worst


def erode(arr: np.ndarray, iterations: int) -> np.ndarray:
    out = arr
    for _ in range(iterations):
        if not out.any():
            break
        out = _erode_once(out)
    return out if out is not arr else arr.copy()


def dilate(arr: np.ndarray, iterations: int) -> np.ndarray:
    out = arr
    for _ in range(iterations):
        if out.all():
            break
        out = _dilate_once(out)
    return out if out is not arr else arr.copy()


def label_components(arr: np.ndarray) -> tuple[np.ndarray, int]:
    labels, count = _label_components(arr)
    return labels, int(count)


def directed_hausdorff_sq(a_yx: np.ndarray, b_yx: np.ndarray) -> int:
    return int(_directed_hausdorff_sq(a_yx, b_yx))


def warmup() -> None:
    """Trigger JIT compilation so timed code paths run warm."""
    tiny = np.zeros((3, 3), dtype=np.bool_)
    tiny[1, 1] = True
    erode(tiny, 1)
    dilate(tiny, 1)
    label_components(tiny)
    pts = np.array([[0, 0], [1, 1]], dtype=np.int64)
    directed_hausdorff_sq(pts, pts)
