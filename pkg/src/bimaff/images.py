"""Image handling: 8-bit rasters as numpy arrays, wire payloads, and disk IO.

Images travel in two forms. Inline payloads carry raw row-major bytes,
base64-encoded, as {"w", "h", "c", "data"}; reference payloads carry
{"path"} relative to a caller-supplied root. Grayscale images are (h, w)
arrays, color images (h, w, 3).
"""

from __future__ import annotations

import base64
from pathlib import Path
from typing import Optional, Union

import numpy as np
from PIL import Image

ImageArray = np.ndarray


def _validate(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    if arr.dtype != np.uint8:
        raise ValueError(f"images must be uint8, got {arr.dtype}")
    if arr.ndim == 2:
        return arr
    if arr.ndim == 3 and arr.shape[2] in (1, 3):
        return arr[:, :, 0] if arr.shape[2] == 1 else arr
    raise ValueError(f"unsupported image shape {arr.shape}")


def encode_payload(arr: ImageArray) -> dict:
    arr = _validate(arr)
    channels = 1 if arr.ndim == 2 else arr.shape[2]
    return {
        "w": arr.shape[1],
        "h": arr.shape[0],
        "c": channels,
        "data": base64.b64encode(arr.tobytes()).decode("ascii"),
    }


def decode_payload(obj: dict, root: Optional[Union[str, Path]] = None) -> ImageArray:
    if "path" in obj:
        path = Path(obj["path"])
        if root is not None:
            path = Path(root) / path
        return load_image(path)
    w, h, c = int(obj["w"]), int(obj["h"]), int(obj.get("c", 1))
    raw = base64.b64decode(obj["data"])
    expected = w * h * c
    if len(raw) != expected:
        raise ValueError(f"image payload carries {len(raw)} bytes, expected {expected}")
    arr = np.frombuffer(raw, dtype=np.uint8)
    shape = (h, w) if c == 1 else (h, w, c)
    return arr.reshape(shape).copy()


def load_image(path: Union[str, Path]) -> ImageArray:
    img = Image.open(path)
    if img.mode not in ("L", "RGB"):
        img = img.convert("RGB")
    return np.asarray(img, dtype=np.uint8)


def save_image(arr: ImageArray, path: Union[str, Path]) -> None:
    arr = _validate(arr)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(arr).save(path)


def hflip_image(arr: ImageArray) -> ImageArray:
    return np.ascontiguousarray(arr[:, ::-1])


def crop_image(arr: ImageArray, x_min: int, y_min: int, x_max: int, y_max: int) -> ImageArray:
    return np.ascontiguousarray(arr[y_min:y_max + 1, x_min:x_max + 1])
