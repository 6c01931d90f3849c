"""Noise processes that corrupt binary shapes, deterministic per seed.

Five generators live here: per-pixel value flips, disk bumps/bites stamped on
the shape boundary, thresholded natural-image backgrounds, rectangular
occluders, and binarized color-cluster probability maps. Detection noise (a
segmentation model's prediction errors) is not generated; such masks are
ingested as external files and evaluated like any other noisy shape.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .core import BinaryShape
from .seeds import generator

NOISE_KINDS = (
    "salt_pepper",
    "circle",
    "real_image",
    "occlusion",
    "thresh_prob",
    "detection_external",
)

Rect = tuple[int, int, int, int]

# ITU-R 601 luma weights used to binarize color patches.
_LUMA = np.array([0.299, 0.587, 0.114])


@dataclass(frozen=True, eq=False)
class ColorImage:
    """An RGB image; ``pixels`` is a read-only (height, width, 3) uint8 grid."""

    pixels: np.ndarray

    def __post_init__(self) -> None:
        px = np.asarray(self.pixels)
        if px.ndim != 3 or px.shape[2] != 3 or min(px.shape[:2]) < 1:
            raise ValueError(f"pixels must be a nonempty (h, w, 3) grid, got shape {px.shape}")
        if px.dtype != np.uint8:
            if ((px < 0) | (px > 255)).any():
                raise ValueError("channel values must lie in 0..255")
        px = np.ascontiguousarray(px, dtype=np.uint8)
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def luma(self) -> np.ndarray:
        """Per-pixel luma in 0..255 as float64."""
        return self.pixels.astype(np.float64) @ _LUMA


@dataclass(frozen=True, eq=False)
class ProbabilityMap:
    """Per-pixel foreground probability; read-only float64 grid in [0, 1]."""

    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2 or min(v.shape) < 1:
            raise ValueError(f"values must be a nonempty 2-D grid, got shape {v.shape}")
        if ((v < 0.0) | (v > 1.0)).any():
            raise ValueError("probabilities must lie in [0, 1]")
        v = np.ascontiguousarray(v)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True, eq=False)
class ClusterAssignment:
    """Color-cluster labels (1-based grid) plus per-cluster foreground/background counts."""

    labels: np.ndarray
    k: int
    fg_counts: np.ndarray
    bg_counts: np.ndarray

    def __post_init__(self) -> None:
        labels = np.ascontiguousarray(self.labels, dtype=np.int32)
        fg = np.ascontiguousarray(self.fg_counts, dtype=np.int64)
        bg = np.ascontiguousarray(self.bg_counts, dtype=np.int64)
        if labels.ndim != 2:
            raise ValueError("labels must be a 2-D grid")
        if self.k < 1 or fg.shape != (self.k,) or bg.shape != (self.k,):
            raise ValueError("fg/bg counts must have one entry per cluster")
        if labels.min() < 1 or labels.max() > self.k:
            raise ValueError("labels must lie in 1..k")
        if int(fg.sum() + bg.sum()) != labels.size:
            raise ValueError("cluster counts must partition the pixel grid")
        for arr in (labels, fg, bg):
            arr.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "fg_counts", fg)
        object.__setattr__(self, "bg_counts", bg)


@dataclass(frozen=True)
class NoiseSpec:
    """Tagged parameter record for one noise process.

    Which fields are required depends on ``kind``: flip probability ``p``
    (salt_pepper), radius ``r`` and optional ``count`` (circle), threshold
    ``t`` (real_image and thresh_prob), cluster count ``k`` (thresh_prob),
    and an optional occluder ``rect`` as (x, y, w, h). ``seed`` drives every
    random draw the process makes.
    """

    kind: str
    p: float | None = None
    r: float | None = None
    count: int | None = None
    t: float | None = None
    rect: Rect | None = None
    k: int | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in NOISE_KINDS:
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if self.kind == "salt_pepper":
            if self.p is None or not 0.0 <= self.p <= 1.0:
                raise ValueError("salt_pepper requires a flip probability p in [0, 1]")
        elif self.kind == "circle":
            if self.r is None or self.r < 0:
                raise ValueError("circle requires a radius r >= 0")
            if self.count is not None and self.count < 0:
                raise ValueError("circle count must be >= 0")
        elif self.kind == "real_image":
            if self.t is None or not 0.0 <= self.t <= 1.0:
                raise ValueError("real_image requires a threshold t in [0, 1]")
        elif self.kind == "occlusion":
            if self.rect is not None:
                x, y, w, h = self.rect
                if w <= 0 or h <= 0:
                    raise ValueError("occluder rect must have positive width and height")
        elif self.kind == "thresh_prob":
            if self.t is None or not 0.0 <= self.t <= 1.0:
                raise ValueError("thresh_prob requires a threshold t in [0, 1]")
            if self.k is not None and self.k < 1:
                raise ValueError("thresh_prob cluster count k must be >= 1")

    def params(self) -> dict[str, str]:
        """Per-kind parameters as sorted text pairs (seed excluded)."""
        out: dict[str, str] = {}
        if self.p is not None:
            out["p"] = repr(float(self.p))
        if self.r is not None:
            out["r"] = repr(float(self.r))
        if self.count is not None:
            out["count"] = str(int(self.count))
        if self.t is not None:
            out["t"] = repr(float(self.t))
        if self.rect is not None:
            out["rect"] = ",".join(str(int(v)) for v in self.rect)
        if self.k is not None:
            out["k"] = str(int(self.k))
        return dict(sorted(out.items()))

    @classmethod
    def from_params(cls, kind: str, params: Mapping[str, str], seed: int = 0) -> "NoiseSpec":
        kw: dict = {}
        if "p" in params:
            kw["p"] = float(params["p"])
        if "r" in params:
            kw["r"] = float(params["r"])
        if "count" in params:
            kw["count"] = int(params["count"])
        if "t" in params:
            kw["t"] = float(params["t"])
        if "rect" in params:
            parts = tuple(int(v) for v in params["rect"].split(","))
            if len(parts) != 4:
                raise ValueError(f"rect must have four components, got {params['rect']!r}")
            kw["rect"] = parts
        if "k" in params:
            kw["k"] = int(params["k"])
        return cls(kind=kind, seed=seed, **kw)


def salt_pepper(s: BinaryShape, p: float, seed: int) -> BinaryShape:
    """Flip every pixel to its opposite value independently with probability p."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("flip probability must lie in [0, 1]")
    flips = generator(seed).random(s.pixels.shape) < p
    return BinaryShape(np.where(flips, 1 - s.pixels, s.pixels))


def boundary_pixels(s: BinaryShape) -> tuple[np.ndarray, np.ndarray]:
    """Foreground pixels 4-adjacent to an in-canvas background pixel, as (xs, ys)."""
    fg = s.pixels.astype(bool)
    bg = ~fg
    adj = np.zeros_like(fg)
    adj[1:, :] |= bg[:-1, :]
    adj[:-1, :] |= bg[1:, :]
    adj[:, 1:] |= bg[:, :-1]
    adj[:, :-1] |= bg[:, 1:]
    ys, xs = np.nonzero(fg & adj)
    return xs, ys


def default_circle_count(s: BinaryShape, r: float) -> int:
    """Default disk count, scaled to the boundary length: ceil(perimeter / 4r)."""
    perimeter = boundary_pixels(s)[0].size
    return math.ceil(perimeter / (4.0 * max(r, 1.0)))


def stamp_disk(s: BinaryShape, cx: int, cy: int, r: float, add: bool) -> BinaryShape:
    """Set all pixels within distance r of (cx, cy) to foreground or background."""
    h, w = s.pixels.shape
    rr = int(math.floor(r))
    dy, dx = np.mgrid[-rr:rr + 1, -rr:rr + 1]
    m = (dx * dx + dy * dy) <= r * r
    ys = dy[m] + cy
    xs = dx[m] + cx
    keep = (ys >= 0) & (ys < h) & (xs >= 0) & (xs < w)
    out = s.pixels.copy()
    out[ys[keep], xs[keep]] = 1 if add else 0
    return BinaryShape(out)


def circle_noise(s: BinaryShape, r: float, count: int, seed: int) -> BinaryShape:
    """Stamp ``count`` disks of radius r at random input-boundary pixels.

    Each repetition draws a boundary pixel uniformly from the input shape's
    boundary, then a fair coin: heads adds a foreground disk (a semicircular
    bump, since the inner half is already foreground), tails punches a hole.
    Disks are clipped to the canvas.
    """
    if r < 0:
        raise ValueError("radius must be >= 0")
    if count < 0:
        raise ValueError("count must be >= 0")
    bx, by = boundary_pixels(s)
    if bx.size == 0:
        raise ValueError("shape has no foreground boundary")
    rng = generator(seed)
    out = s
    for _ in range(count):
        i = int(rng.integers(bx.size))
        add = bool(rng.integers(2))
        out = stamp_disk(out, int(bx[i]), int(by[i]), r, add)
    return out


def real_image_noise(s: BinaryShape, patch: ColorImage, t: float) -> BinaryShape:
    """Replace the background with a luma-thresholded color patch.

    A background pixel becomes foreground when ``luma/255 >= t``; foreground
    pixels are never deleted, so the output is a superset of the input.
    """
    if (patch.height, patch.width) != (s.height, s.width):
        raise ValueError(
            f"patch dimensions {patch.width}x{patch.height} do not match "
            f"shape {s.width}x{s.height}"
        )
    if not 0.0 <= t <= 1.0:
        raise ValueError("threshold must lie in [0, 1]")
    passed = (patch.luma() / 255.0) >= t
    return BinaryShape(np.where(passed, 1, s.pixels))


def occlusion_noise(s: BinaryShape, rect: Rect) -> BinaryShape:
    """Force every pixel inside the (x, y, w, h) rectangle to background."""
    x, y, w, h = (int(v) for v in rect)
    if w <= 0 or h <= 0:
        raise ValueError(f"degenerate occluder rect {rect}")
    x0, y0 = max(x, 0), max(y, 0)
    x1, y1 = min(x + w, s.width), min(y + h, s.height)
    if x0 >= x1 or y0 >= y1:
        raise ValueError(f"occluder rect {rect} does not intersect the canvas")
    out = s.pixels.copy()
    out[y0:y1, x0:x1] = 0
    return BinaryShape(out)


def sample_occlusion_rect(s: BinaryShape, seed: int) -> Rect:
    """Random occluder: top-left uniform over the foreground bounding box,
    side lengths uniform in [ceil(0.2 * side), ceil(0.6 * side)] of that box."""
    xs, ys = s.foreground_xy()
    if xs.size == 0:
        raise ValueError("cannot sample an occluder for an empty foreground")
    bx, by = int(xs.min()), int(ys.min())
    bw = int(xs.max()) - bx + 1
    bh = int(ys.max()) - by + 1
    rng = generator(seed)
    w = int(rng.integers(math.ceil(0.2 * bw), math.ceil(0.6 * bw) + 1))
    h = int(rng.integers(math.ceil(0.2 * bh), math.ceil(0.6 * bh) + 1))
    x = int(rng.integers(bx, bx + bw))
    y = int(rng.integers(by, by + bh))
    return (x, y, w, h)


def _kmeans_pp_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    centers = np.empty((k, points.shape[1]), dtype=np.float64)
    centers[0] = points[int(rng.integers(points.shape[0]))]
    d2 = ((points - centers[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        centers[j] = points[int(rng.choice(points.shape[0], p=d2 / d2.sum()))]
        d2 = np.minimum(d2, ((points - centers[j]) ** 2).sum(axis=1))
    return centers


def _lloyd(points: np.ndarray, centers: np.ndarray, max_iter: int = 100) -> np.ndarray:
    """Lloyd iterations to an assignment fixpoint; argmin breaks ties by lowest index."""
    labels = None
    for _ in range(max_iter):
        d2 = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new_labels = d2.argmin(axis=1)
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for j in range(centers.shape[0]):
            members = labels == j
            if members.any():
                centers[j] = points[members].mean(axis=0)
            # an emptied cluster keeps its previous center
    return labels


def probability_map(img: ColorImage, mask: BinaryShape, k: int,
                    seed: int) -> tuple[ProbabilityMap, ClusterAssignment]:
    """Foreground frequency of each color cluster, spread back over the pixels.

    The pixel colors are clustered into k groups (k-means with k-means++
    seeding, at most 100 Lloyd iterations). Each pixel's probability is the
    fraction of its cluster's pixels that fall inside the mask foreground, so
    the map is constant on every cluster.
    """
    if (img.height, img.width) != (mask.height, mask.width):
        raise ValueError(
            f"image dimensions {img.width}x{img.height} do not match "
            f"mask {mask.width}x{mask.height}"
        )
    points = img.pixels.reshape(-1, 3).astype(np.float64)
    distinct = np.unique(points, axis=0).shape[0]
    if not 1 <= k <= distinct:
        raise ValueError(f"k must lie in 1..{distinct} (distinct colors), got {k}")
    rng = generator(seed)
    labels = _lloyd(points, _kmeans_pp_init(points, k, rng))
    fg = mask.pixels.reshape(-1).astype(bool)
    fg_counts = np.bincount(labels[fg], minlength=k)
    bg_counts = np.bincount(labels[~fg], minlength=k)
    total = fg_counts + bg_counts
    frac = np.where(total > 0, fg_counts / np.maximum(total, 1), 0.0)
    values = frac[labels].reshape(mask.height, mask.width)
    assignment = ClusterAssignment(
        labels=(labels + 1).reshape(mask.height, mask.width),
        k=k,
        fg_counts=fg_counts,
        bg_counts=bg_counts,
    )
    return ProbabilityMap(values), assignment


def threshold_probability(pm: ProbabilityMap, t: float) -> BinaryShape:
    """Binarize a probability map: foreground where the probability is >= t."""
    if not 0.0 <= t <= 1.0:
        raise ValueError("threshold must lie in [0, 1]")
    return BinaryShape((pm.values >= t).astype(np.uint8))


def apply_noise(s: BinaryShape, spec: NoiseSpec,
                patch: ColorImage | None = None) -> BinaryShape:
    """Run the noise process described by ``spec`` on a shape.

    ``patch`` supplies the color image that real_image and thresh_prob noise
    require (for thresh_prob it is the image the mask segments).
    """
    if spec.kind == "salt_pepper":
        return salt_pepper(s, spec.p, spec.seed)
    if spec.kind == "circle":
        count = spec.count if spec.count is not None else default_circle_count(s, spec.r)
        return circle_noise(s, spec.r, count, spec.seed)
    if spec.kind == "real_image":
        if patch is None:
            raise ValueError("real_image noise requires a color patch")
        return real_image_noise(s, patch, spec.t)
    if spec.kind == "occlusion":
        rect = spec.rect if spec.rect is not None else sample_occlusion_rect(s, spec.seed)
        return occlusion_noise(s, rect)
    if spec.kind == "thresh_prob":
        if patch is None:
            raise ValueError("thresh_prob noise requires the color image the mask segments")
        pm, _ = probability_map(patch, s, spec.k if spec.k is not None else 10, spec.seed)
        return threshold_probability(pm, spec.t)
    raise ValueError(
        "detection noise is ingested from external prediction masks, not generated"
    )
