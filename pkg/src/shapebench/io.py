"""Mask files and run manifests.

Masks are 8-bit single-channel raster files (PNG by default) with foreground
255 and background 0; on load, any value >= 128 counts as foreground.
Manifests are UTF-8 CSV files with a fixed header; paths inside a manifest
are resolved relative to the manifest's own directory so trees stay portable.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np
from PIL import Image, UnidentifiedImageError

from .core import BinaryShape
from .noise import ColorImage, NOISE_KINDS

MASK_FOREGROUND = 255
MANIFEST_FIELDS = ("item_id", "split", "clean_path", "noisy_path",
                   "noise_kind", "noise_params", "seed", "input_iou")
SPLITS = ("train", "test")


def load_mask(path: str | Path) -> BinaryShape:
    """Decode a mask file; pixel values >= 128 become foreground.

    Multi-channel files are accepted only when all color channels agree.
    """
    path = Path(path)
    try:
        with Image.open(path) as img:
            if img.mode == "P":
                img = img.convert("L")
            arr = np.asarray(img)
    except FileNotFoundError:
        raise
    except (UnidentifiedImageError, OSError) as exc:
        raise ValueError(f"cannot decode mask file {path}: {exc}") from exc
    if arr.ndim == 3:
        rgb = arr[..., :3]
        if not (rgb == rgb[..., :1]).all():
            raise ValueError(f"{path}: multi-channel mask with unequal channels")
        arr = rgb[..., 0]
    if arr.ndim != 2:
        raise ValueError(f"{path}: expected a single-channel image, got shape {arr.shape}")
    if arr.dtype == bool:
        arr = arr.astype(np.uint8) * 255
    return BinaryShape((arr >= 128).astype(np.uint8))


def save_mask(shape: BinaryShape, path: str | Path) -> None:
    """Write a shape as an 8-bit single-channel image, foreground = 255."""
    path = Path(path)
    img = Image.fromarray(shape.pixels * MASK_FOREGROUND, mode="L")
    try:
        img.save(path)
    except (OSError, ValueError) as exc:
        raise OSError(f"failed to write mask {path}: {exc}") from exc


def load_color_image(path: str | Path) -> ColorImage:
    """Decode an image file as RGB."""
    path = Path(path)
    try:
        with Image.open(path) as img:
            arr = np.asarray(img.convert("RGB"))
    except FileNotFoundError:
        raise
    except (UnidentifiedImageError, OSError) as exc:
        raise ValueError(f"cannot decode image file {path}: {exc}") from exc
    return ColorImage(arr)


def save_color_image(img: ColorImage, path: str | Path) -> None:
    Image.fromarray(img.pixels, mode="RGB").save(Path(path))


def format_params(params: Mapping[str, str]) -> str:
    """key=value pairs joined by ';', sorted by key."""
    return ";".join(f"{k}={params[k]}" for k in sorted(params))


def parse_params(text: str) -> dict[str, str]:
    if not text:
        return {}
    out: dict[str, str] = {}
    for pair in text.split(";"):
        key, sep, value = pair.partition("=")
        if not sep or not key:
            raise ValueError(f"malformed noise_params entry {pair!r}")
        out[key] = value
    return out


@dataclass
class ManifestRow:
    """One dataset item, optionally paired with a generated noisy mask."""

    item_id: str
    split: str
    clean_path: str
    noisy_path: str = ""
    noise_kind: str = ""
    noise_params: str = ""
    seed: int = 0
    input_iou: float | None = None

    def __post_init__(self) -> None:
        if not self.item_id:
            raise ValueError("item_id must be nonempty")
        if self.split not in SPLITS:
            raise ValueError(f"split must be one of {SPLITS}, got {self.split!r}")
        if self.noise_kind and self.noise_kind not in NOISE_KINDS:
            raise ValueError(f"unknown noise_kind {self.noise_kind!r}")

    def key(self) -> tuple:
        return (self.item_id, self.split, self.noise_kind, self.noise_params, self.seed)


def write_manifest(rows: Iterable[ManifestRow], path: str | Path) -> None:
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(MANIFEST_FIELDS)
        for row in rows:
            writer.writerow([
                row.item_id, row.split, row.clean_path, row.noisy_path,
                row.noise_kind, row.noise_params, str(row.seed),
                "" if row.input_iou is None else repr(float(row.input_iou)),
            ])


def read_manifest(path: str | Path, check_paths: bool = True) -> list[ManifestRow]:
    """Parse a manifest; rejects duplicate item keys and, by default,
    rows whose mask paths do not exist."""
    path = Path(path)
    rows: list[ManifestRow] = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != MANIFEST_FIELDS:
            raise ValueError(f"{path}: bad manifest header {header!r}")
        for lineno, raw in enumerate(reader, start=2):
            if len(raw) != len(MANIFEST_FIELDS):
                raise ValueError(f"{path}:{lineno}: expected {len(MANIFEST_FIELDS)} fields")
            item_id, split, clean, noisy, kind, params, seed, in_iou = raw
            try:
                rows.append(ManifestRow(
                    item_id=item_id, split=split, clean_path=clean, noisy_path=noisy,
                    noise_kind=kind, noise_params=params, seed=int(seed),
                    input_iou=None if in_iou == "" else float(in_iou),
                ))
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from exc
    seen: set[tuple] = set()
    for row in rows:
        key = row.key()
        if key in seen:
            raise ValueError(f"{path}: duplicate manifest key {key}")
        seen.add(key)
    if check_paths:
        base = path.parent
        for row in rows:
            for p in (row.clean_path, row.noisy_path):
                if p and not resolve_path(path, p).exists():
                    raise ValueError(f"{path}: item {row.item_id}: missing file {base / p}")
    return rows


def resolve_path(manifest_path: str | Path, p: str | Path) -> Path:
    """Resolve a manifest-relative path against the manifest's directory."""
    p = Path(p)
    return p if p.is_absolute() else Path(manifest_path).parent / p
