"""Synthetic shapes and images for tests, demos, and benchmark dry runs."""
from __future__ import annotations

import numpy as np

from .core import BinaryShape
from .noise import ColorImage
from .seeds import generator


def disk(canvas: int, radius: float,
         center: tuple[float, float] | None = None) -> BinaryShape:
    """Filled disk; default center is the symmetric canvas midpoint."""
    if center is None:
        center = ((canvas - 1) / 2.0, (canvas - 1) / 2.0)
    cx, cy = center
    x = np.arange(canvas)
    d2 = (x[None, :] - cx) ** 2 + (x[:, None] - cy) ** 2
    return BinaryShape((d2 <= radius * radius).astype(np.uint8))


def ellipse(canvas: int, semi_x: float, semi_y: float,
            center: tuple[float, float] | None = None) -> BinaryShape:
    """Axis-aligned filled ellipse."""
    if center is None:
        center = ((canvas - 1) / 2.0, (canvas - 1) / 2.0)
    cx, cy = center
    x = np.arange(canvas)
    inside = ((x[None, :] - cx) / semi_x) ** 2 + ((x[:, None] - cy) / semi_y) ** 2 <= 1.0
    return BinaryShape(inside.astype(np.uint8))


def random_blob(canvas: int, seed: int, body_radius: tuple[float, float] = (22.0, 30.0),
                bumps: tuple[int, int] = (2, 5),
                bump_scale: tuple[float, float] = (0.20, 0.35)) -> BinaryShape:
    """A disk with smaller disks bumping out of its boundary at random angles.

    The dominant body keeps the radial mass distribution dense around its
    80th-percentile radius, so the blob realigns stably, and the total extent
    stays well inside the canvas after alignment.
    """
    rng = generator(seed)
    cx = cy = (canvas - 1) / 2.0
    body = rng.uniform(*body_radius)
    x = np.arange(canvas)
    inside = (x[None, :] - cx) ** 2 + (x[:, None] - cy) ** 2 <= body * body
    for _ in range(int(rng.integers(bumps[0], bumps[1] + 1))):
        ang = rng.uniform(0.0, 2.0 * np.pi)
        dist = rng.uniform(0.7 * body, body)
        r = body * rng.uniform(*bump_scale)
        lx, ly = cx + dist * np.cos(ang), cy + dist * np.sin(ang)
        inside |= (x[None, :] - lx) ** 2 + (x[:, None] - ly) ** 2 <= r * r
    return BinaryShape(inside.astype(np.uint8))


def two_color_image(mask: BinaryShape,
                    foreground: tuple[int, int, int] = (200, 40, 40),
                    background: tuple[int, int, int] = (40, 60, 200)) -> ColorImage:
    """Color image that paints the mask foreground and background flat colors."""
    px = np.empty((mask.height, mask.width, 3), dtype=np.uint8)
    px[...] = background
    px[mask.pixels.astype(bool)] = foreground
    return ColorImage(px)


def noisy_two_color_image(mask: BinaryShape, seed: int, jitter: int = 25,
                          foreground: tuple[int, int, int] = (200, 40, 40),
                          background: tuple[int, int, int] = (40, 60, 200)) -> ColorImage:
    """Two-color image with uniform channel jitter, for clusterable test data."""
    rng = generator(seed)
    base = two_color_image(mask, foreground, background).pixels.astype(np.int32)
    noise = rng.integers(-jitter, jitter + 1, size=base.shape)
    return ColorImage(np.clip(base + noise, 0, 255).astype(np.uint8))


def random_color_image(width: int, height: int, seed: int) -> ColorImage:
    """Smooth random RGB field, a stand-in for natural-image patches."""
    rng = generator(seed)
    coarse = rng.integers(0, 256, size=(-(-height // 8), -(-width // 8), 3))
    px = np.repeat(np.repeat(coarse, 8, axis=0), 8, axis=1)[:height, :width]
    return ColorImage(px.astype(np.uint8))
