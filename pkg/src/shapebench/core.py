"""Binary shape representation, pixel-set geometry, and the IoU measure."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np


@dataclass(frozen=True, eq=False)
class BinaryShape:
    """A binary image treated as a set of foreground pixels.

    ``pixels`` is a read-only ``(height, width)`` uint8 grid whose entries
    are exactly 0 (background) or 1 (foreground). Coordinates follow the
    (x = column, y = row) convention with the origin at the top-left pixel.
    """

    pixels: np.ndarray

    def __post_init__(self) -> None:
        px = np.asarray(self.pixels)
        if px.ndim != 2 or min(px.shape) < 1:
            raise ValueError(f"pixels must be a nonempty 2-D grid, got shape {px.shape}")
        if not ((px == 0) | (px == 1)).all():
            raise ValueError("pixels must contain only the values 0 and 1")
        px = np.ascontiguousarray(px, dtype=np.uint8)
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @classmethod
    def blank(cls, width: int, height: int) -> "BinaryShape":
        return cls(np.zeros((height, width), dtype=np.uint8))

    @classmethod
    def full(cls, width: int, height: int) -> "BinaryShape":
        return cls(np.ones((height, width), dtype=np.uint8))

    @classmethod
    def from_foreground(cls, width: int, height: int,
                        coords: Iterable[tuple[int, int]]) -> "BinaryShape":
        """Shape whose foreground is exactly the given (x, y) pixels."""
        px = np.zeros((height, width), dtype=np.uint8)
        for x, y in coords:
            px[y, x] = 1
        return cls(px)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def foreground_count(self) -> int:
        return int(np.count_nonzero(self.pixels))

    def foreground_xy(self) -> tuple[np.ndarray, np.ndarray]:
        """Foreground coordinates as parallel (xs, ys) arrays in row-major order."""
        ys, xs = np.nonzero(self.pixels)
        return xs, ys

    def same_size(self, other: "BinaryShape") -> bool:
        return self.pixels.shape == other.pixels.shape

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BinaryShape):
            return NotImplemented
        return np.array_equal(self.pixels, other.pixels)

    def __repr__(self) -> str:
        return f"BinaryShape({self.width}x{self.height}, foreground={self.foreground_count})"


@dataclass(frozen=True)
class Centroid:
    """Sub-pixel center of mass of a foreground, in (x, y) order."""

    x: float
    y: float


def iou(a: BinaryShape, b: BinaryShape) -> float:
    """Intersection-over-union (Jaccard index) of two same-size foregrounds.

    Two empty foregrounds compare as 1.0 so that ``iou(s, s) == 1`` holds for
    every shape; an empty versus a nonempty foreground gives 0.0.
    """
    if not a.same_size(b):
        raise ValueError(
            f"shape dimensions differ: {a.width}x{a.height} vs {b.width}x{b.height}"
        )
    inter = int(np.count_nonzero(a.pixels & b.pixels))
    union = int(np.count_nonzero(a.pixels | b.pixels))
    if union == 0:
        return 1.0
    return inter / union


def center_of_mass(s: BinaryShape) -> Centroid:
    """Arithmetic mean of the foreground pixel coordinates."""
    xs, ys = s.foreground_xy()
    if xs.size == 0:
        raise ValueError("center of mass is undefined for an empty foreground")
    return Centroid(float(xs.mean()), float(ys.mean()))


def translate(s: BinaryShape, dx: int, dy: int) -> BinaryShape:
    """Shift the foreground by (dx, dy); pixels leaving the canvas are dropped."""
    h, w = s.pixels.shape
    out = np.zeros_like(s.pixels)
    src_x0, src_x1 = max(0, -dx), min(w, w - dx)
    src_y0, src_y1 = max(0, -dy), min(h, h - dy)
    if src_x0 < src_x1 and src_y0 < src_y1:
        out[src_y0 + dy:src_y1 + dy, src_x0 + dx:src_x1 + dx] = \
            s.pixels[src_y0:src_y1, src_x0:src_x1]
    return BinaryShape(out)
