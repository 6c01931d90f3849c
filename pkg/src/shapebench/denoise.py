"""Baseline denoisers: PCA-subspace reconstruction, morphology, majority filter.

The eigenshape denoiser treats each aligned mask as a flat {0,1} vector,
learns a mean and an orthonormal principal subspace from clean training
shapes, and denoises by projecting onto that subspace, reconstructing, and
re-binarizing. Because the number of training shapes n is far smaller than
the pixel dimension D, the principal components are recovered from the
n x n Gram matrix of the centered data instead of the D x D covariance.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy import ndimage

from .core import BinaryShape

DENOISE_METHODS = ("identity", "eigenshape", "morphological", "median")

_MODEL_MAGIC = b"ESHAPE01"


@dataclass(frozen=True, eq=False)
class EigenshapeModel:
    """Mean shape vector plus orthonormal principal components.

    ``mean`` has length D = canvas**2, ``components`` is (m, D) with
    orthonormal rows, and ``variances`` holds the matching sample variances
    in non-increasing order.
    """

    mean: np.ndarray
    components: np.ndarray
    variances: np.ndarray
    canvas: int

    def __post_init__(self) -> None:
        mean = np.ascontiguousarray(self.mean, dtype=np.float64)
        comps = np.ascontiguousarray(self.components, dtype=np.float64)
        var = np.ascontiguousarray(self.variances, dtype=np.float64)
        d = self.canvas * self.canvas
        if self.canvas <= 0 or mean.shape != (d,):
            raise ValueError("mean length must equal canvas squared")
        if comps.ndim != 2 or comps.shape[1] != d or comps.shape[0] < 1:
            raise ValueError("components must be a nonempty (m, canvas**2) matrix")
        if var.shape != (comps.shape[0],):
            raise ValueError("need one variance per component")
        if (var < 0).any() or (np.diff(var) > 1e-12).any():
            raise ValueError("variances must be nonnegative and non-increasing")
        gram = comps @ comps.T
        if not np.allclose(gram, np.eye(comps.shape[0]), atol=1e-6):
            raise ValueError("components must be pairwise orthonormal")
        for arr in (mean, comps, var):
            arr.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "variances", var)

    @property
    def n_components(self) -> int:
        return self.components.shape[0]


@dataclass(frozen=True)
class DenoiserConfig:
    method: str = "identity"
    n_components: int = 5
    struct_radius: int = 1
    window: int = 3
    rebinarize_threshold: float = 0.5

    def __post_init__(self) -> None:
        if self.method not in DENOISE_METHODS:
            raise ValueError(f"unknown denoise method {self.method!r}")
        if self.n_components < 1:
            raise ValueError("n_components must be >= 1")
        if self.struct_radius < 0:
            raise ValueError("struct_radius must be >= 0")
        if self.window < 1 or self.window % 2 == 0:
            raise ValueError("window must be odd and >= 1")


def _basis_filler(existing: np.ndarray) -> np.ndarray:
    """Deterministic unit vector orthogonal to the rows accumulated so far."""
    d = existing.shape[1]
    for i in range(d):
        v = np.zeros(d)
        v[i] = 1.0
        if existing.shape[0]:
            v -= existing.T @ (existing @ v)
        norm = np.linalg.norm(v)
        if norm > 0.5:
            return v / norm
    raise ValueError("cannot extend orthonormal basis")


def train_eigenshape(train: Sequence[BinaryShape], m: int) -> EigenshapeModel:
    """Fit the mean and top-m principal components of vectorized shapes.

    Requires at least two square, same-size training shapes and
    ``1 <= m <= min(n - 1, D)``. Components for zero-variance directions
    (degenerate training sets) are filled with a deterministic orthonormal
    completion so the model invariants always hold.
    """
    n = len(train)
    if n < 2:
        raise ValueError("need at least 2 training shapes")
    first = train[0]
    if any(not s.same_size(first) for s in train):
        raise ValueError("training shapes must share dimensions")
    if first.width != first.height:
        raise ValueError("eigenshape training expects square shapes")
    canvas = first.width
    d = canvas * canvas
    if not 1 <= m <= min(n - 1, d):
        raise ValueError(f"m must lie in 1..{min(n - 1, d)}, got {m}")

    x = np.stack([s.pixels.reshape(-1) for s in train]).astype(np.float64)
    mean = x.mean(axis=0)
    xc = x - mean
    gram = xc @ xc.T
    evals, evecs = np.linalg.eigh(gram)
    order = np.argsort(evals)[::-1][:m]
    tol = max(float(evals.max(initial=0.0)), 0.0) * 1e-12 + 1e-12

    comps = np.empty((m, d))
    variances = np.empty(m)
    for j, idx in enumerate(order):
        lam = float(evals[idx])
        variances[j] = max(lam, 0.0) / (n - 1)
        if lam > tol:
            comps[j] = xc.T @ evecs[:, idx] / math.sqrt(lam)
        else:
            comps[j] = _basis_filler(comps[:j])
    return EigenshapeModel(mean=mean, components=comps, variances=variances, canvas=canvas)


def reconstruct(model: EigenshapeModel, s: BinaryShape, n_components: int) -> np.ndarray:
    """Pre-threshold subspace reconstruction of a shape, as a flat float vector."""
    if s.height != model.canvas or s.width != model.canvas:
        raise ValueError(
            f"shape {s.width}x{s.height} does not match model canvas {model.canvas}"
        )
    if not 1 <= n_components <= model.n_components:
        raise ValueError(f"n_components must lie in 1..{model.n_components}")
    c = model.components[:n_components]
    x = s.pixels.reshape(-1).astype(np.float64) - model.mean
    return model.mean + c.T @ (c @ x)


def denoise_eigenshape(model: EigenshapeModel, noisy: BinaryShape,
                       cfg: DenoiserConfig) -> BinaryShape:
    """Project onto the learned subspace, reconstruct, and re-binarize."""
    recon = reconstruct(model, noisy, cfg.n_components)
    out = (recon >= cfg.rebinarize_threshold).astype(np.uint8)
    return BinaryShape(out.reshape(model.canvas, model.canvas))


def disk_structuring_element(radius: int) -> np.ndarray:
    """Rasterized disk: offsets with dx**2 + dy**2 <= radius**2."""
    if radius < 0:
        raise ValueError("radius must be >= 0")
    ax = np.arange(-radius, radius + 1)
    return (ax[:, None] ** 2 + ax[None, :] ** 2) <= radius * radius


def open_with_disk(s: BinaryShape, radius: int) -> BinaryShape:
    """Binary opening (erosion then dilation) with a disk element.

    Pixels outside the canvas count as background; opening never adds
    foreground and is idempotent.
    """
    if radius < 0:
        raise ValueError("radius must be >= 0")
    if radius == 0:
        return s
    selem = disk_structuring_element(radius)
    opened = ndimage.binary_opening(s.pixels.astype(bool), structure=selem)
    return BinaryShape(opened.astype(np.uint8))


def close_with_disk(s: BinaryShape, radius: int) -> BinaryShape:
    """Binary closing (dilation then erosion) with a disk element.

    Computed on a canvas padded by the radius so the dilation is not clipped
    at the border; closing never removes foreground and is idempotent.
    """
    if radius < 0:
        raise ValueError("radius must be >= 0")
    if radius == 0:
        return s
    selem = disk_structuring_element(radius)
    padded = np.pad(s.pixels.astype(bool), radius)
    closed = ndimage.binary_closing(padded, structure=selem)
    return BinaryShape(closed[radius:-radius, radius:-radius].astype(np.uint8))


def denoise_morphological(noisy: BinaryShape, struct_radius: int) -> BinaryShape:
    """Binary opening then closing with a disk structuring element.

    Radius 0 is the identity.
    """
    return close_with_disk(open_with_disk(noisy, struct_radius), struct_radius)


def denoise_median(noisy: BinaryShape, window: int) -> BinaryShape:
    """Majority vote over a window x window neighborhood clipped to the canvas.

    Ties (possible only on clipped, even-sized neighborhoods) resolve to
    foreground. Window 1 is the identity.
    """
    if window < 1 or window % 2 == 0:
        raise ValueError("window must be odd and >= 1")
    h, w = noisy.pixels.shape
    half = window // 2
    ii = np.zeros((h + 1, w + 1), dtype=np.int64)
    ii[1:, 1:] = noisy.pixels.astype(np.int64).cumsum(axis=0).cumsum(axis=1)
    y0 = np.maximum(np.arange(h) - half, 0)
    y1 = np.minimum(np.arange(h) + half + 1, h)
    x0 = np.maximum(np.arange(w) - half, 0)
    x1 = np.minimum(np.arange(w) + half + 1, w)
    ones = ii[y1][:, x1] - ii[y0][:, x1] - ii[y1][:, x0] + ii[y0][:, x0]
    total = (y1 - y0)[:, None] * (x1 - x0)[None, :]
    return BinaryShape((2 * ones >= total).astype(np.uint8))


def make_denoiser(cfg: DenoiserConfig,
                  model: EigenshapeModel | None = None) -> Callable[[BinaryShape], BinaryShape]:
    """Bind a config (and model, for eigenshape) into a shape -> shape callable."""
    if cfg.method == "identity":
        return lambda s: s
    if cfg.method == "median":
        return lambda s: denoise_median(s, cfg.window)
    if cfg.method == "morphological":
        return lambda s: denoise_morphological(s, cfg.struct_radius)
    if model is None:
        raise ValueError("eigenshape denoising requires a trained model")
    return lambda s: denoise_eigenshape(model, s, cfg)


def save_model(model: EigenshapeModel, path: str | Path) -> None:
    """Write a model to the flat binary container.

    Layout (little-endian): 8-byte magic ``ESHAPE01``, uint32 canvas,
    uint32 m, then float64 runs of the mean (D values, row-major), the
    components (m rows of D, row-major), and the variances (m values).
    """
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(_MODEL_MAGIC)
        fh.write(struct.pack("<II", model.canvas, model.n_components))
        fh.write(model.mean.astype("<f8").tobytes())
        fh.write(model.components.astype("<f8").tobytes())
        fh.write(model.variances.astype("<f8").tobytes())


def load_model(path: str | Path) -> EigenshapeModel:
    """Read a model written by ``save_model``; round-trips bit-exactly."""
    path = Path(path)
    raw = path.read_bytes()
    if raw[:8] != _MODEL_MAGIC:
        raise ValueError(f"{path}: not an eigenshape model file")
    canvas, m = struct.unpack("<II", raw[8:16])
    d = canvas * canvas
    expected = 16 + 8 * (d + m * d + m)
    if len(raw) != expected:
        raise ValueError(f"{path}: truncated model file ({len(raw)} of {expected} bytes)")
    data = np.frombuffer(raw, dtype="<f8", offset=16)
    mean = data[:d]
    comps = data[d:d + m * d].reshape(m, d)
    variances = data[d + m * d:]
    return EigenshapeModel(mean=mean, components=comps, variances=variances, canvas=canvas)
