"""Command-line pipeline: align, split, perturb, denoise, train-eigen, evaluate, report.

Every stochastic step derives per-item seeds from the master ``--seed``, and
batch results are assembled in a fixed item order, so outputs are
byte-identical across reruns and across ``--jobs`` settings.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .align import AlignmentParams, align
from .core import iou
from .denoise import (DenoiserConfig, EigenshapeModel, load_model,
                      make_denoiser, save_model, train_eigenshape)
from .evaluate import (DEFAULT_ALPHA, DEFAULT_BIN_CAP, DEFAULT_BIN_EDGES,
                       EvalRecord, bin_by_input_iou, evaluate_method)
from .io import (ManifestRow, format_params, load_color_image, load_mask,
                 read_manifest, resolve_path, save_mask, write_manifest)
from .noise import (ColorImage, NoiseSpec, apply_noise, default_circle_count,
                    occlusion_noise, sample_occlusion_rect)
from .report import (ReportTable, build_section, render_csv, render_json,
                     render_text, table_from_jsonable, table_to_jsonable)
from .seeds import derive_seed, generator

MASK_EXTENSIONS = (".png", ".pgm", ".bmp", ".tif", ".tiff", ".gif", ".jpg", ".jpeg")

DEFAULT_GRIDS = {
    "salt_pepper": "0:0.15:0.01",
    "circle": "0:10:1",
    "real_image": f"{10 / 255}:{250 / 255}:{10 / 255}",
    "thresh_prob": "0.1:0.9:0.1",
}

NOISE_ALIASES = {
    "salt": "salt_pepper",
    "salt_pepper": "salt_pepper",
    "circle": "circle",
    "real": "real_image",
    "real_image": "real_image",
    "occlusion": "occlusion",
    "thresh-prob": "thresh_prob",
    "thresh_prob": "thresh_prob",
    "detection": "detection_external",
    "detection_external": "detection_external",
}

_MODEL_CACHE: dict[str, EigenshapeModel] = {}


def parse_grid(text: str) -> list[float]:
    """Parse "lo:hi:step" (inclusive) or a comma-separated value list."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"grid must be lo:hi:step, got {text!r}")
        lo, hi, step = (float(v) for v in parts)
        if step <= 0 or hi < lo:
            raise ValueError(f"bad grid range {text!r}")
        vals = []
        i = 0
        while lo + i * step <= hi + 1e-9:
            vals.append(round(lo + i * step, 10))
            i += 1
        return vals
    return [round(float(v), 10) for v in text.split(",")]


def _list_images(directory: Path) -> list[Path]:
    if not directory.is_dir():
        raise ValueError(f"not a directory: {directory}")
    files = sorted(p for p in directory.iterdir()
                   if p.suffix.lower() in MASK_EXTENSIONS and p.is_file())
    if not files:
        raise ValueError(f"no image files found in {directory}")
    return files


def _map_ordered(fn, tasks, jobs: int) -> list:
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        chunk = max(1, len(tasks) // (jobs * 4))
        return list(pool.map(fn, tasks, chunksize=chunk))


def _params_slug(params: dict[str, str]) -> str:
    return "_".join(f"{k}{v}" for k, v in sorted(params.items())).replace(",", "-")


# ---------------------------------------------------------------- align

def _align_worker(task: tuple[str, str, tuple]) -> str:
    in_path, out_path, (canvas, radius, pct, thr) = task
    params = AlignmentParams(canvas=canvas, target_radius=radius,
                             percentile=pct, rebinarize_threshold=thr)
    try:
        save_mask(align(load_mask(in_path), params), out_path)
    except ValueError as exc:
        raise RuntimeError(f"item {Path(in_path).name}: {exc}") from exc
    return out_path


def cmd_align(args: argparse.Namespace) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    files = _list_images(Path(args.input))
    ap = (args.canvas, args.target_radius, args.percentile, args.threshold)
    tasks = [(str(p), str(out_dir / p.name), ap) for p in files]
    _map_ordered(_align_worker, tasks, args.jobs)
    print(f"aligned {len(tasks)} masks into {out_dir}")
    return 0


# ---------------------------------------------------------------- split

def cmd_split(args: argparse.Namespace) -> int:
    files = _list_images(Path(args.masks))
    out_path = Path(args.out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    n_train = int(len(files) * args.train_frac)
    order = generator(args.seed).permutation(len(files))
    train_idx = set(int(i) for i in order[:n_train])
    rows = [
        ManifestRow(
            item_id=p.stem,
            split="train" if i in train_idx else "test",
            clean_path=os.path.relpath(p, out_path.parent),
        )
        for i, p in enumerate(files)
    ]
    write_manifest(rows, out_path)
    print(f"split {len(files)} masks: {n_train} train / {len(files) - n_train} test -> {out_path}")
    return 0


# ---------------------------------------------------------------- perturb

def _pick_patch(patch_files: list[str], width: int, height: int, seed: int) -> ColorImage:
    rng = generator(seed, 1)
    img = load_color_image(patch_files[int(rng.integers(len(patch_files)))])
    if img.width < width or img.height < height:
        raise ValueError(f"patch {img.width}x{img.height} smaller than mask {width}x{height}")
    x0 = int(rng.integers(img.width - width + 1))
    y0 = int(rng.integers(img.height - height + 1))
    return ColorImage(img.pixels[y0:y0 + height, x0:x0 + width])


def _perturb_worker(task: dict) -> tuple:
    clean = load_mask(task["clean_path"])
    kind = task["kind"]
    seed = task["seed"]
    params = dict(task["params"])
    patch = None
    if kind == "real_image":
        patch = _pick_patch(task["patch_files"], clean.width, clean.height, seed)
    elif kind == "thresh_prob":
        patch = load_color_image(task["image_path"])
    if kind == "occlusion" and "rect" not in params:
        rect = sample_occlusion_rect(clean, seed)
        params["rect"] = ",".join(str(v) for v in rect)
        noisy = occlusion_noise(clean, rect)
    else:
        spec = NoiseSpec.from_params(kind, params, seed=seed)
        if kind == "circle" and spec.count is None:
            params["count"] = str(default_circle_count(clean, spec.r))
            spec = NoiseSpec.from_params(kind, params, seed=seed)
        noisy = apply_noise(clean, spec, patch=patch)
    save_mask(noisy, task["out_path"])
    return task["index"], params, iou(clean, noisy)


def _unique_clean_rows(rows: list[ManifestRow], split: str) -> list[ManifestRow]:
    picked: dict[tuple[str, str], ManifestRow] = {}
    for row in rows:
        if split != "all" and row.split != split:
            continue
        picked.setdefault((row.item_id, row.split), row)
    out = sorted(picked.values(), key=lambda r: (r.split, r.item_id))
    if not out:
        raise ValueError(f"manifest has no rows for split {split!r}")
    return out


def _find_paired_file(directory: Path, stem: str) -> Path:
    for ext in MASK_EXTENSIONS:
        p = directory / f"{stem}{ext}"
        if p.exists():
            return p
    raise ValueError(f"item {stem}: no paired file in {directory}")


def cmd_perturb(args: argparse.Namespace) -> int:
    kind = NOISE_ALIASES[args.noise]
    manifest_path = Path(args.manifest)
    rows = _unique_clean_rows(read_manifest(manifest_path), args.split)

    if kind == "detection_external":
        return _ingest_detections(args, rows, manifest_path)

    if not args.out:
        raise ValueError("perturb requires --out DIR for generated noisy masks")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    out_manifest = Path(args.out_manifest) if args.out_manifest else out_dir / "manifest.csv"
    out_manifest.parent.mkdir(parents=True, exist_ok=True)

    grid = _build_grid(args, kind)
    patch_files = None
    if kind == "real_image":
        if not args.patches:
            raise ValueError("real image noise requires --patches DIR")
        patch_files = [str(p) for p in _list_images(Path(args.patches))]

    tasks = []
    for row in rows:
        clean_path = resolve_path(manifest_path, row.clean_path)
        image_path = None
        if kind == "thresh_prob":
            if not args.images:
                raise ValueError("thresholded probability noise requires --images DIR")
            image_path = str(_find_paired_file(Path(args.images), row.item_id))
        for params in grid:
            index = len(tasks)
            slug = _params_slug(params) or f"s{index}"
            tasks.append({
                "index": index,
                "row": row,
                "kind": kind,
                "params": params,
                "seed": derive_seed(args.seed, index),
                "clean_path": str(clean_path),
                "out_path": str(out_dir / f"{row.item_id}__{kind}__{slug}.png"),
                "patch_files": patch_files,
                "image_path": image_path,
            })

    results = _map_ordered(_perturb_worker, tasks, args.jobs)
    out_rows = []
    for (index, params, input_iou), task in zip(results, tasks):
        row = task["row"]
        out_rows.append(ManifestRow(
            item_id=row.item_id,
            split=row.split,
            clean_path=os.path.relpath(resolve_path(manifest_path, row.clean_path),
                                       out_manifest.parent),
            noisy_path=os.path.relpath(task["out_path"], out_manifest.parent),
            noise_kind=kind,
            noise_params=format_params(params),
            seed=task["seed"],
            input_iou=input_iou,
        ))
    write_manifest(out_rows, out_manifest)
    print(f"wrote {len(out_rows)} noisy masks to {out_dir}; manifest {out_manifest}")
    return 0


def _build_grid(args: argparse.Namespace, kind: str) -> list[dict[str, str]]:
    if kind == "salt_pepper":
        return [{"p": repr(v)} for v in parse_grid(args.p or DEFAULT_GRIDS[kind])]
    if kind == "circle":
        grid = [{"r": repr(v)} for v in parse_grid(args.r or DEFAULT_GRIDS[kind])]
        if args.count is not None:
            for g in grid:
                g["count"] = str(args.count)
        return grid
    if kind == "real_image":
        return [{"t": repr(v)} for v in parse_grid(args.t or DEFAULT_GRIDS[kind])]
    if kind == "thresh_prob":
        return [{"t": repr(v), "k": str(args.k)}
                for v in parse_grid(args.t or DEFAULT_GRIDS[kind])]
    if kind == "occlusion":
        if args.rect:
            return [{"rect": args.rect.replace(" ", "")}]
        return [{} for _ in range(args.samples)]
    raise ValueError(f"no parameter grid for noise kind {kind!r}")


def _ingest_detections(args: argparse.Namespace, rows: list[ManifestRow],
                       manifest_path: Path) -> int:
    if not args.detections:
        raise ValueError("detection ingestion requires --detections DIR")
    if not args.out_manifest:
        raise ValueError("detection ingestion requires --out-manifest PATH")
    det_dir = Path(args.detections)
    out_manifest = Path(args.out_manifest)
    out_manifest.parent.mkdir(parents=True, exist_ok=True)
    out_rows = []
    for row in rows:
        det = _find_paired_file(det_dir, row.item_id)
        clean_path = resolve_path(manifest_path, row.clean_path)
        clean = load_mask(clean_path)
        noisy = load_mask(det)
        if not clean.same_size(noisy):
            raise ValueError(f"item {row.item_id}: detection mask size differs from clean mask")
        out_rows.append(ManifestRow(
            item_id=row.item_id,
            split=row.split,
            clean_path=os.path.relpath(clean_path, out_manifest.parent),
            noisy_path=os.path.relpath(det, out_manifest.parent),
            noise_kind="detection_external",
            noise_params="",
            seed=0,
            input_iou=iou(clean, noisy),
        ))
    write_manifest(out_rows, out_manifest)
    print(f"ingested {len(out_rows)} detection masks -> {out_manifest}")
    return 0


# ---------------------------------------------------------------- denoise

def _denoise_worker(task: tuple[str, str, dict, str | None]) -> str:
    in_path, out_path, cfg_kw, model_path = task
    cfg = DenoiserConfig(**cfg_kw)
    model = None
    if model_path is not None:
        model = _MODEL_CACHE.get(model_path)
        if model is None:
            model = _MODEL_CACHE.setdefault(model_path, load_model(model_path))
    fn = make_denoiser(cfg, model)
    try:
        save_mask(fn(load_mask(in_path)), out_path)
    except ValueError as exc:
        raise RuntimeError(f"item {Path(in_path).name}: {exc}") from exc
    return out_path


def cmd_denoise(args: argparse.Namespace) -> int:
    manifest_path = Path(args.manifest)
    rows = [r for r in read_manifest(manifest_path) if r.noisy_path]
    if not rows:
        raise ValueError(f"{manifest_path}: no rows with a noisy mask to denoise")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    cfg_kw = {
        "method": args.method,
        "n_components": args.components,
        "struct_radius": args.radius,
        "window": args.window,
        "rebinarize_threshold": args.threshold,
    }
    model_path = None
    if args.method == "eigenshape":
        if not args.model:
            raise ValueError("eigenshape denoising requires --model PATH")
        model_path = str(Path(args.model))
        load_model(model_path)  # fail fast on a bad model file
    tasks = []
    seen = set()
    for row in sorted(rows, key=lambda r: r.noisy_path):
        name = Path(row.noisy_path).name
        if name in seen:
            raise ValueError(f"duplicate noisy mask name {name}; prediction files would collide")
        seen.add(name)
        tasks.append((str(resolve_path(manifest_path, row.noisy_path)),
                      str(out_dir / name), cfg_kw, model_path))
    _map_ordered(_denoise_worker, tasks, args.jobs)
    print(f"denoised {len(tasks)} masks with {args.method} into {out_dir}")
    return 0


# ---------------------------------------------------------------- train-eigen

def cmd_train_eigen(args: argparse.Namespace) -> int:
    if bool(args.manifest) == bool(args.masks):
        raise ValueError("provide exactly one of --manifest or --masks")
    if args.masks:
        paths = _list_images(Path(args.masks))
    else:
        manifest_path = Path(args.manifest)
        rows = _unique_clean_rows(read_manifest(manifest_path), args.split)
        paths = [resolve_path(manifest_path, r.clean_path) for r in rows]
    shapes = [load_mask(p) for p in paths]
    m = args.components if args.components is not None else min(len(shapes) - 1, 20)
    model = train_eigenshape(shapes, m)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_model(model, out)
    print(f"trained eigenshape model on {len(shapes)} shapes (m={m}) -> {out}")
    return 0


# ---------------------------------------------------------------- evaluate

def _record_worker(task: tuple[str, str, str, str, float | None]) -> EvalRecord:
    record_id, truth_path, noisy_path, kind, input_iou = task
    truth = load_mask(truth_path)
    noisy = load_mask(noisy_path)
    if input_iou is None:
        input_iou = iou(truth, noisy)
    return EvalRecord(item_id=record_id, truth=truth, noisy=noisy,
                      input_iou=input_iou, noise_kind=kind)


def _parse_pred_args(pred_args: list[str]) -> list[tuple[str, Path]]:
    preds = []
    for spec in pred_args:
        name, sep, directory = spec.partition("=")
        if not sep or not name or not directory:
            raise ValueError(f"--pred must be NAME=DIR, got {spec!r}")
        if not Path(directory).is_dir():
            raise ValueError(f"--pred {name}: not a directory: {directory}")
        preds.append((name, Path(directory)))
    names = [nm for nm, _ in preds]
    if len(set(names)) != len(names):
        raise ValueError("--pred method names must be unique")
    return preds


def cmd_evaluate(args: argparse.Namespace) -> int:
    manifest_path = Path(args.manifest)
    rows = [r for r in read_manifest(manifest_path) if r.noisy_path]
    if not rows:
        raise ValueError(f"{manifest_path}: no noisy rows to evaluate")
    preds = _parse_pred_args(args.pred or [])
    method_names = (["input"] if args.include_input else []) + [nm for nm, _ in preds]
    if not method_names:
        raise ValueError("nothing to score: give --pred NAME=DIR and/or --include-input")
    edges = parse_grid(args.bins) if args.bins else list(DEFAULT_BIN_EDGES)

    rows = sorted(rows, key=lambda r: r.noisy_path)
    names = [Path(r.noisy_path).name for r in rows]
    if len(set(names)) != len(names):
        raise ValueError("noisy mask file names must be unique across the manifest")
    tasks = [
        (name, str(resolve_path(manifest_path, row.clean_path)),
         str(resolve_path(manifest_path, row.noisy_path)), row.noise_kind, row.input_iou)
        for name, row in zip(names, rows)
    ]
    records = _map_ordered(_record_worker, tasks, args.jobs)

    by_kind: dict[str, list[EvalRecord]] = {}
    for rec in records:
        by_kind.setdefault(rec.noise_kind or "unspecified", []).append(rec)

    sections = []
    failures = 0
    for kind_index, kind in enumerate(sorted(by_kind)):
        bins = bin_by_input_iou(by_kind[kind], edges, args.max_per_bin,
                                derive_seed(args.seed, kind_index))
        for name in method_names:
            if name == "input":
                evaluate_method("input", lambda rec: rec.noisy, bins)
                continue
            pred_dir = dict(preds)[name]
            evaluate_method(
                name,
                lambda rec, d=pred_dir: load_mask(d / rec.item_id),
                bins,
            )
        for b in bins:
            for rec in b.records:
                failures += len(rec.failed)
        sections.append(build_section(kind, bins, method_names, args.alpha))

    table = ReportTable(sections=tuple(sections))
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(table_to_jsonable(table), indent=2) + "\n", encoding="utf-8")
    if failures:
        print(f"warning: {failures} record scorings failed and were counted as IoU 0",
              file=sys.stderr)
    if not args.quiet:
        print(render_text(table), end="")
    print(f"report written to {out}")
    return 0


# ---------------------------------------------------------------- report

def cmd_report(args: argparse.Namespace) -> int:
    data = json.loads(Path(args.report).read_text(encoding="utf-8"))
    table = table_from_jsonable(data)
    if args.format == "text":
        rendered = render_text(table)
    elif args.format == "csv":
        rendered = render_csv(table)
    else:
        rendered = render_json(table)
    if args.out:
        Path(args.out).write_text(rendered, encoding="utf-8")
    else:
        print(rendered, end="")
    return 0


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="shapebench",
        description="Binary shape denoising benchmark: align masks, generate "
                    "seeded noise, run baseline denoisers, and score methods "
                    "by binned IoU with significance marking.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("align", help="batch-align a directory of masks")
    p.add_argument("--input", required=True, help="directory of raw masks")
    p.add_argument("--out", required=True, help="output directory for aligned masks")
    p.add_argument("--canvas", type=int, default=128)
    p.add_argument("--target-radius", type=float, default=40.0)
    p.add_argument("--percentile", type=float, default=0.80)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_align)

    p = sub.add_parser("split", help="write a train/test manifest for a mask directory")
    p.add_argument("--masks", required=True)
    p.add_argument("--out", required=True, help="manifest CSV path")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--train-frac", type=float, default=0.5)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("perturb", help="apply a noise grid and write noisy masks + manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--noise", required=True, choices=sorted(NOISE_ALIASES))
    p.add_argument("--out", help="output directory for noisy masks")
    p.add_argument("--out-manifest", help="output manifest path (default: OUT/manifest.csv)")
    p.add_argument("--split", choices=("train", "test", "all"), default="all")
    p.add_argument("--p", help="flip probability grid (lo:hi:step or comma list)")
    p.add_argument("--r", help="disk radius grid")
    p.add_argument("--count", type=int, help="disks per image (default scales with boundary)")
    p.add_argument("--t", help="threshold grid")
    p.add_argument("--rect", help="fixed occluder as x,y,w,h (default: sampled per item)")
    p.add_argument("--samples", type=int, default=1, help="sampled occluders per item")
    p.add_argument("--k", type=int, default=10, help="color cluster count")
    p.add_argument("--patches", help="directory of color images for real image noise")
    p.add_argument("--images", help="directory of item-paired color images")
    p.add_argument("--detections", help="directory of external detection masks to ingest")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_perturb)

    p = sub.add_parser("denoise", help="run a baseline denoiser over a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--method", required=True,
                   choices=("identity", "median", "morphological", "eigenshape"))
    p.add_argument("--out", required=True, help="output directory for predictions")
    p.add_argument("--model", help="eigenshape model file")
    p.add_argument("--components", type=int, default=5)
    p.add_argument("--window", type=int, default=3)
    p.add_argument("--radius", type=int, default=1)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_denoise)

    p = sub.add_parser("train-eigen", help="fit and serialize an eigenshape model")
    p.add_argument("--manifest", help="manifest whose clean masks to train on")
    p.add_argument("--masks", help="or: directory of training masks")
    p.add_argument("--split", choices=("train", "test", "all"), default="train")
    p.add_argument("--components", type=int, help="default: min(n - 1, 20)")
    p.add_argument("--out", required=True, help="model file path")
    p.set_defaults(func=cmd_train_eigen)

    p = sub.add_parser("evaluate", help="score prediction directories against a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--pred", action="append",
                   help="NAME=DIR of predictions named like the noisy masks (repeatable)")
    p.add_argument("--include-input", action="store_true",
                   help="score the unmodified noisy input as a baseline column")
    p.add_argument("--out", required=True, help="report JSON path")
    p.add_argument("--bins", help="bin edges as lo:hi:step (default 0.5:1.0:0.1)")
    p.add_argument("--max-per-bin", type=int, default=DEFAULT_BIN_CAP)
    p.add_argument("--alpha", type=float, default=DEFAULT_ALPHA)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", help="render a report JSON as text, CSV, or JSON")
    p.add_argument("--report", required=True)
    p.add_argument("--format", choices=("text", "csv", "json"), default="text")
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
