"""Canonical shape alignment: rescale to a target radial size and recenter.

A raw mask is normalized in three steps: the image is rescaled so that the
80th percentile of foreground-to-centroid distances hits a target radius
(bicubic interpolation, then re-binarization), the centroid is recomputed on
the rescaled mask, and the result is cropped or padded to a square canvas
whose center pixel is the nearest pixel to that centroid. Only translation
and scale are normalized; rotation is left untouched.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import BinaryShape, center_of_mass

# Catmull-Rom cubic convolution; the common "bicubic" kernel choice.
CUBIC_A = -0.5


@dataclass(frozen=True)
class AlignmentParams:
    canvas: int = 128
    target_radius: float = 40.0
    percentile: float = 0.80
    rebinarize_threshold: float = 0.5

    def __post_init__(self) -> None:
        if self.canvas <= 0:
            raise ValueError("canvas must be positive")
        if self.target_radius <= 0:
            raise ValueError("target_radius must be positive")
        if not 0.0 < self.percentile < 1.0:
            raise ValueError("percentile must lie strictly between 0 and 1")
        if not 0.0 < self.rebinarize_threshold < 1.0:
            raise ValueError("rebinarize_threshold must lie strictly between 0 and 1")


def radial_percentile(s: BinaryShape, q: float) -> float:
    """Nearest-rank percentile of foreground distances to the centroid.

    Collects the Euclidean distance of every foreground pixel to the center
    of mass and returns the element at index ``ceil(q*N) - 1`` of the sorted
    distance multiset. The nearest-rank rule keeps the value exactly
    reproducible across implementations.
    """
    if not 0.0 < q < 1.0:
        raise ValueError("q must lie strictly between 0 and 1")
    c = center_of_mass(s)
    xs, ys = s.foreground_xy()
    d = np.hypot(xs - c.x, ys - c.y)
    d.sort()
    rank = math.ceil(q * d.size) - 1
    return float(d[max(rank, 0)])


def _cubic_weight(t: np.ndarray, a: float = CUBIC_A) -> np.ndarray:
    at = np.abs(t)
    at2 = at * at
    at3 = at2 * at
    near = (a + 2.0) * at3 - (a + 3.0) * at2 + 1.0
    far = a * at3 - 5.0 * a * at2 + 8.0 * a * at - 4.0 * a
    return np.where(at <= 1.0, near, np.where(at < 2.0, far, 0.0))


def _axis_taps(n_in: int, n_out: int, scale: float,
               anchor: float) -> tuple[np.ndarray, np.ndarray]:
    """4-tap source indices (clamped to the edge) and weights per output index.

    The sample grid maps the output center pixel ``n_out // 2`` onto the
    source ``anchor`` and is spaced by the exact requested factor. With an
    integer anchor, a factor of 1 reproduces the input bit-for-bit, near-unity
    factors stay free of grid-commensurability bias, and integer shifts of
    the anchor shift the samples exactly.
    """
    src = anchor + (np.arange(n_out) - n_out // 2) / scale
    base = np.floor(src).astype(np.int64)
    offsets = np.arange(-1, 3)
    idx = base[:, None] + offsets[None, :]
    weights = _cubic_weight(src[:, None] - idx)
    idx = np.clip(idx, 0, n_in - 1)
    return idx, weights


def rescale_bicubic(img: np.ndarray, scale: float,
                    anchor: tuple[float, float] | None = None) -> np.ndarray:
    """Rescale a 2-D float image by a uniform factor with cubic convolution.

    Output dimensions are ``round(n * scale)`` per axis (at least 1). Samples
    are taken at output pixel centers mapped through the exact scale factor,
    with the output center pixel landing on ``anchor`` (an (x, y) source
    position, default the source center pixel); source coordinates outside
    the image clamp to the nearest edge pixel.
    """
    if scale <= 0:
        raise ValueError("scale must be positive")
    img = np.asarray(img, dtype=np.float64)
    h_in, w_in = img.shape
    if anchor is None:
        anchor = (w_in // 2, h_in // 2)
    h_out = max(1, int(round(h_in * scale)))
    w_out = max(1, int(round(w_in * scale)))
    ridx, rw = _axis_taps(h_in, h_out, scale, anchor[1])
    cidx, cw = _axis_taps(w_in, w_out, scale, anchor[0])
    rows = (img[ridx] * rw[:, :, None]).sum(axis=1)      # (h_out, w_in)
    out = (rows[:, cidx] * cw[None, :, :]).sum(axis=2)   # (h_out, w_out)
    return out


def align(s: BinaryShape, p: AlignmentParams = AlignmentParams()) -> BinaryShape:
    """Center and scale-normalize a mask onto a ``canvas x canvas`` image.

    Raises ``ValueError`` for an empty foreground, or when the radial
    percentile is zero (single-pixel foregrounds leave the scale factor
    undefined). Foreground falling outside the final crop window is clipped.
    """
    radius = radial_percentile(s, p.percentile)
    if radius <= 0.0:
        raise ValueError("radial percentile is zero; scale factor undefined")
    c0 = center_of_mass(s)
    # Anchoring the sample grid at the nearest pixel to the centroid makes
    # alignment exactly invariant to integer translations of the input.
    anchor = (math.floor(c0.x + 0.5), math.floor(c0.y + 0.5))
    gray = rescale_bicubic(s.pixels.astype(np.float64), p.target_radius / radius,
                           anchor=anchor)
    binary = (gray >= p.rebinarize_threshold).astype(np.uint8)
    if not binary.any():
        raise ValueError("foreground vanished during rescaling")
    rescaled = BinaryShape(binary)
    c = center_of_mass(rescaled)
    # Nearest pixel to the recomputed centroid, halves rounding up.
    cx = int(math.floor(c.x + 0.5))
    cy = int(math.floor(c.y + 0.5))
    half = p.canvas // 2
    ox, oy = cx - half, cy - half
    out = np.zeros((p.canvas, p.canvas), dtype=np.uint8)
    sy0, sy1 = max(oy, 0), min(oy + p.canvas, binary.shape[0])
    sx0, sx1 = max(ox, 0), min(ox + p.canvas, binary.shape[1])
    if sy0 < sy1 and sx0 < sx1:
        out[sy0 - oy:sy1 - oy, sx0 - ox:sx1 - ox] = binary[sy0:sy1, sx0:sx1]
    return BinaryShape(out)
