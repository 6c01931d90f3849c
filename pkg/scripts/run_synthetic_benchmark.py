"""End-to-end benchmark dry run on synthetic blobs.

Generates a small shape dataset, aligns it, corrupts the test split with
several noise processes, trains the eigenshape model on the train split,
runs every baseline denoiser, and prints the binned IoU table with
significance marks. Everything is seeded, so reruns reproduce the same
report byte for byte.
"""
import argparse
import sys
from pathlib import Path

from shapebench.cli import main as shapebench
from shapebench.io import read_manifest, resolve_path, load_mask, save_color_image, save_mask
from shapebench.synth import noisy_two_color_image, random_blob, random_color_image


def build_dataset(root: Path, n_shapes: int, seed: int) -> None:
    raw = root / "raw"
    raw.mkdir(parents=True, exist_ok=True)
    for i in range(n_shapes):
        save_mask(random_blob(352, seed=seed + i, body_radius=(52.0, 65.0)),
                  raw / f"blob{i:03d}.png")
    patches = root / "patches"
    patches.mkdir(exist_ok=True)
    for i in range(8):
        save_color_image(random_color_image(192, 192, seed=seed + 9000 + i),
                         patches / f"patch{i}.png")


def build_paired_images(root: Path, manifest: Path, seed: int) -> Path:
    images = root / "images"
    images.mkdir(exist_ok=True)
    for row in read_manifest(manifest):
        mask = load_mask(resolve_path(manifest, row.clean_path))
        save_color_image(noisy_two_color_image(mask, seed=seed + hash(row.item_id) % 10000),
                         images / f"{row.item_id}.png")
    return images


def run(cmd: list[str]) -> None:
    if shapebench(cmd) != 0:
        sys.exit(f"step failed: shapebench {' '.join(cmd)}")


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--workdir", default="benchmark_run")
    ap.add_argument("--shapes", type=int, default=24)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()

    root = Path(args.workdir)
    build_dataset(root, args.shapes, args.seed)
    jobs = str(args.jobs)

    run(["align", "--input", str(root / "raw"), "--out", str(root / "aligned"),
         "--jobs", jobs])
    manifest = root / "manifest.csv"
    run(["split", "--masks", str(root / "aligned"), "--out", str(manifest),
         "--seed", str(args.seed)])

    noisy = root / "noisy"
    run(["perturb", "--manifest", str(manifest), "--noise", "salt", "--split", "test",
         "--p", "0:0.15:0.03", "--seed", str(args.seed), "--jobs", jobs,
         "--out", str(noisy / "salt"), "--out-manifest", str(noisy / "salt.csv")])
    run(["perturb", "--manifest", str(manifest), "--noise", "circle", "--split", "test",
         "--r", "1:9:2", "--seed", str(args.seed), "--jobs", jobs,
         "--out", str(noisy / "circle"), "--out-manifest", str(noisy / "circle.csv")])
    run(["perturb", "--manifest", str(manifest), "--noise", "occlusion", "--split", "test",
         "--samples", "4", "--seed", str(args.seed), "--jobs", jobs,
         "--out", str(noisy / "occlusion"), "--out-manifest", str(noisy / "occlusion.csv")])
    run(["perturb", "--manifest", str(manifest), "--noise", "real", "--split", "test",
         "--patches", str(root / "patches"), "--t", "0.3:0.9:0.15",
         "--seed", str(args.seed), "--jobs", jobs,
         "--out", str(noisy / "real"), "--out-manifest", str(noisy / "real.csv")])
    images = build_paired_images(root, manifest, args.seed)
    run(["perturb", "--manifest", str(manifest), "--noise", "thresh-prob", "--split", "test",
         "--images", str(images), "--t", "0.2:0.8:0.2", "--k", "4",
         "--seed", str(args.seed), "--jobs", jobs,
         "--out", str(noisy / "thresh"), "--out-manifest", str(noisy / "thresh.csv")])

    # the per-noise manifests share a directory, so their relative paths can
    # be concatenated into one evaluation manifest as-is
    from shapebench.io import write_manifest
    merged_rows = []
    for part in ("salt", "circle", "occlusion", "real", "thresh"):
        merged_rows += read_manifest(noisy / f"{part}.csv")
    merged2 = noisy / "manifest.csv"
    write_manifest(merged_rows, merged2)

    model = root / "model.eshape"
    n_train = sum(r.split == "train" for r in read_manifest(manifest))
    m = str(min(8, n_train - 1))
    run(["train-eigen", "--manifest", str(manifest), "--split", "train",
         "--components", m, "--out", str(model)])

    preds = root / "preds"
    run(["denoise", "--manifest", str(merged2), "--method", "eigenshape",
         "--model", str(model), "--components", m, "--jobs", jobs,
         "--out", str(preds / "eigenshape")])
    run(["denoise", "--manifest", str(merged2), "--method", "median",
         "--window", "5", "--jobs", jobs, "--out", str(preds / "median")])
    run(["denoise", "--manifest", str(merged2), "--method", "morphological",
         "--radius", "2", "--jobs", jobs, "--out", str(preds / "morph")])

    run(["evaluate", "--manifest", str(merged2), "--include-input",
         "--pred", f"eigenshape={preds / 'eigenshape'}",
         "--pred", f"median={preds / 'median'}",
         "--pred", f"morph={preds / 'morph'}",
         "--bins", "0.5:1.0:0.1", "--seed", str(args.seed), "--jobs", jobs,
         "--out", str(root / "report.json")])
    run(["report", "--report", str(root / "report.json"), "--format", "csv",
         "--out", str(root / "report.csv")])
    print(f"artifacts under {root}: report.json, report.csv")


if __name__ == "__main__":
    main()
