"""Binary mask algebra on a run-length encoded raster type.

The codec ("2HRLE v1") stores row-major run lengths alternating between
background and foreground, always starting with a background run that may
be zero. It is the exchange format of the whole toolkit: every mask that
crosses a module boundary, a file, or the wire is one of these.

Coordinates: origin top-left, x rightward, y downward. Morphology uses the
full 3x3 structuring element and components are 8-connected, matching each
other so thin diagonal regions survive cleanup intact.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Optional

import numpy as np
from PIL import Image

from . import _kernels


class DimensionMismatchError(ValueError):
    """Two masks (or a mask and a raster) disagree on width/height."""


def _check_same_size(a: "BinaryMask", b: "BinaryMask") -> None:
    if a.width != b.width or a.height != b.height:
        raise DimensionMismatchError(
            f"mask dimensions differ: {a.width}x{a.height} vs {b.width}x{b.height}"
        )


@dataclass(frozen=True)
class BBox:
    """Inclusive pixel-coordinate bounding box."""

    x_min: int
    y_min: int
    x_max: int
    y_max: int

    def __post_init__(self) -> None:
        if self.x_min > self.x_max or self.y_min > self.y_max:
            raise ValueError(f"degenerate bbox {self}")
        if self.x_min < 0 or self.y_min < 0:
            raise ValueError(f"bbox extends past the image origin: {self}")

    @property
    def width(self) -> int:
        return self.x_max - self.x_min + 1

    @property
    def height(self) -> int:
        return self.y_max - self.y_min + 1

    def to_json_obj(self) -> list[int]:
        return [self.x_min, self.y_min, self.x_max, self.y_max]

    @classmethod
    def from_json_obj(cls, obj: Iterable[int]) -> "BBox":
        x0, y0, x1, y1 = (int(v) for v in obj)
        return cls(x0, y0, x1, y1)


@dataclass(frozen=True)
class BinaryMask:
    """RLE-encoded binary raster.

    ``runs`` alternate 0-run, 1-run, 0-run, ... with only the leading run
    allowed to be zero; they sum to ``width * height``.
    """

    width: int
    height: int
    runs: tuple[int, ...]

    def __post_init__(self) -> None:
        if self.width < 1 or self.height < 1:
            raise ValueError(f"mask dimensions must be >= 1, got {self.width}x{self.height}")
        runs = tuple(int(r) for r in self.runs)
        object.__setattr__(self, "runs", runs)
        if not runs:
            raise ValueError("runs may not be empty")
        if any(r < 0 for r in runs):
            raise ValueError("negative run length")
        if any(r == 0 for r in runs[1:]):
            raise ValueError("only the leading background run may be zero")
        total = sum(runs)
        if total != self.width * self.height:
            raise ValueError(
                f"runs sum to {total}, expected {self.width}x{self.height}={self.width * self.height}"
            )

    # -- codec ---------------------------------------------------------

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "BinaryMask":
        arr = np.ascontiguousarray(np.asarray(arr, dtype=bool))
        if arr.ndim != 2:
            raise ValueError(f"expected a 2-d raster, got shape {arr.shape}")
        h, w = arr.shape
        flat = arr.ravel()
        change = np.flatnonzero(flat[1:] != flat[:-1]) + 1
        bounds = np.concatenate(([0], change, [flat.size]))
        lengths = np.diff(bounds)
        runs = lengths.tolist()
        if flat[0]:
            runs = [0] + runs
        return cls(w, h, tuple(int(r) for r in runs))

    def to_array(self) -> np.ndarray:
        values = np.zeros(len(self.runs), dtype=bool)
        values[1::2] = True
        flat = np.repeat(values, np.asarray(self.runs, dtype=np.int64))
        return flat.reshape(self.height, self.width)

    @classmethod
    def empty(cls, width: int, height: int) -> "BinaryMask":
        return cls(width, height, (width * height,))

    @classmethod
    def full(cls, width: int, height: int) -> "BinaryMask":
        return cls(width, height, (0, width * height))

    def to_json_obj(self) -> dict:
        return {"w": self.width, "h": self.height, "runs": list(self.runs)}

    @classmethod
    def from_json_obj(cls, obj: dict) -> "BinaryMask":
        return cls(int(obj["w"]), int(obj["h"]), tuple(int(r) for r in obj["runs"]))

    # -- queries -------------------------------------------------------

    @property
    def area(self) -> int:
        return sum(self.runs[1::2])

    def is_empty(self) -> bool:
        return self.area == 0

    def pixels(self) -> np.ndarray:
        """(x, y) coordinates of foreground pixels as an (N, 2) int array."""
        ys, xs = np.nonzero(self.to_array())
        return np.stack([xs, ys], axis=1).astype(np.int64)

    def iter_pixels(self) -> Iterator[tuple[int, int]]:
        for x, y in self.pixels():
            yield int(x), int(y)

    def tight_bbox(self) -> Optional[BBox]:
        arr = self.to_array()
        ys, xs = np.nonzero(arr)
        if ys.size == 0:
            return None
        return BBox(int(xs.min()), int(ys.min()), int(xs.max()), int(ys.max()))

    # -- set algebra ----------------------------------------------------

    def intersect(self, other: "BinaryMask") -> "BinaryMask":
        _check_same_size(self, other)
        return BinaryMask.from_array(self.to_array() & other.to_array())

    def union(self, other: "BinaryMask") -> "BinaryMask":
        _check_same_size(self, other)
        return BinaryMask.from_array(self.to_array() | other.to_array())

    def complement(self) -> "BinaryMask":
        return BinaryMask.from_array(~self.to_array())

    def __and__(self, other: "BinaryMask") -> "BinaryMask":
        return self.intersect(other)

    def __or__(self, other: "BinaryMask") -> "BinaryMask":
        return self.union(other)

    def contains(self, other: "BinaryMask") -> bool:
        _check_same_size(self, other)
        return bool((~self.to_array() & other.to_array()).sum() == 0)

    # -- morphology and geometry ----------------------------------------

    def erode(self, iterations: int = 1) -> "BinaryMask":
        if iterations < 0:
            raise ValueError("iterations must be >= 0")
        if iterations == 0:
            return self
        return BinaryMask.from_array(_kernels.erode(self.to_array(), iterations))

    def dilate(self, iterations: int = 1) -> "BinaryMask":
        if iterations < 0:
            raise ValueError("iterations must be >= 0")
        if iterations == 0:
            return self
        return BinaryMask.from_array(_kernels.dilate(self.to_array(), iterations))

    def hflip(self) -> "BinaryMask":
        return BinaryMask.from_array(self.to_array()[:, ::-1])

    def crop(self, box: BBox) -> "BinaryMask":
        if box.x_max >= self.width or box.y_max >= self.height:
            raise ValueError(f"crop box {box} exceeds {self.width}x{self.height} image")
        arr = self.to_array()[box.y_min:box.y_max + 1, box.x_min:box.x_max + 1]
        return BinaryMask.from_array(arr)


# -- module-level operation aliases ------------------------------------


def encode(bitmap, width: Optional[int] = None, height: Optional[int] = None) -> BinaryMask:
    """Encode a dense bitmap (2-d array, or flat row-major with dims)."""
    arr = np.asarray(bitmap, dtype=bool)
    if arr.ndim == 1:
        if width is None or height is None:
            raise ValueError("flat bitmaps need explicit width and height")
        if arr.size != width * height:
            raise DimensionMismatchError(
                f"bitmap has {arr.size} entries, expected {width}x{height}={width * height}"
            )
        arr = arr.reshape(height, width)
    elif width is not None or height is not None:
        if (height, width) != arr.shape:
            raise DimensionMismatchError(
                f"bitmap shape {arr.shape} does not match {width}x{height}"
            )
    return BinaryMask.from_array(arr)


def decode(mask: BinaryMask) -> np.ndarray:
    return mask.to_array()


def intersect(a: BinaryMask, b: BinaryMask) -> BinaryMask:
    return a.intersect(b)


def union(a: BinaryMask, b: BinaryMask) -> BinaryMask:
    return a.union(b)


def union_all(ms: Iterable[BinaryMask]) -> BinaryMask:
    ms = list(ms)
    if not ms:
        raise ValueError("union_all needs at least one mask")
    out = ms[0]
    for m in ms[1:]:
        out = out.union(m)
    return out


def complement(m: BinaryMask) -> BinaryMask:
    return m.complement()


def area(m: BinaryMask) -> int:
    return m.area


def erode(m: BinaryMask, iterations: int = 1) -> BinaryMask:
    return m.erode(iterations)


def dilate(m: BinaryMask, iterations: int = 1) -> BinaryMask:
    return m.dilate(iterations)


def hflip(m: BinaryMask) -> BinaryMask:
    return m.hflip()


def crop(m: BinaryMask, box: BBox) -> BinaryMask:
    return m.crop(box)


def tight_bbox(m: BinaryMask) -> Optional[BBox]:
    return m.tight_bbox()


def connected_components(m: BinaryMask) -> list[BinaryMask]:
    """8-connected components, ordered by their first pixel in raster order."""
    arr = m.to_array()
    if not arr.any():
        return []
    labels, count = _kernels.label_components(arr)
    flat = labels.ravel()
    order = []
    seen = set()
    for lab in flat[flat != 0]:
        lab = int(lab)
        if lab not in seen:
            seen.add(lab)
            order.append(lab)
            if len(order) == count:
                break
    return [BinaryMask.from_array(labels == lab) for lab in order]


def largest_component(m: BinaryMask) -> BinaryMask:
    """Max-area 8-connected component; raster-order first pixel breaks ties."""
    components = connected_components(m)
    if not components:
        return BinaryMask.empty(m.width, m.height)
    return max(components, key=lambda c: c.area)


def expand_bbox(box: BBox, margin_fraction: float, image_width: int, image_height: int) -> BBox:
    """Grow a box by a fraction of its own extent per side, clamped to the image."""
    if margin_fraction < 0:
        raise ValueError("margin_fraction must be >= 0")
    pad_x = int(round(margin_fraction * box.width))
    pad_y = int(round(margin_fraction * box.height))
    return BBox(
        max(0, box.x_min - pad_x),
        max(0, box.y_min - pad_y),
        min(image_width - 1, box.x_max + pad_x),
        min(image_height - 1, box.y_max + pad_y),
    )


# -- dense raster import/export ----------------------------------------


def mask_to_image(m: BinaryMask) -> Image.Image:
    """8-bit single-channel raster, foreground=255."""
    return Image.fromarray(m.to_array().astype(np.uint8) * 255, mode="L")


def mask_from_image(img) -> BinaryMask:
    """Accepts a PIL image or a path; pixels > 127 are foreground."""
    if not isinstance(img, Image.Image):
        img = Image.open(img)
    arr = np.asarray(img.convert("L"))
    return BinaryMask.from_array(arr > 127)
