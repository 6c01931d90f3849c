import numpy as np
import pytest
from PIL import Image

from shapebench.core import BinaryShape
from shapebench.io import (ManifestRow, format_params, load_color_image,
                           load_mask, parse_params, read_manifest,
                           resolve_path, save_mask, write_manifest)
from shapebench.synth import disk, random_blob


class TestMaskIO:
    def test_roundtrip_bit_exact(self, tmp_path):
        for seed in range(5):
            s = random_blob(48, seed=seed, body_radius=(8.0, 14.0))
            path = tmp_path / f"mask{seed}.png"
            save_mask(s, path)
            assert load_mask(path) == s

    def test_threshold_rule(self, tmp_path):
        arr = np.array([[0, 127], [128, 255]], dtype=np.uint8)
        path = tmp_path / "gray.png"
        Image.fromarray(arr, mode="L").save(path)
        out = load_mask(path)
        assert np.array_equal(out.pixels, [[0, 0], [1, 1]])

    def test_all_255_is_all_foreground(self, tmp_path):
        path = tmp_path / "white.png"
        Image.fromarray(np.full((8, 8), 255, dtype=np.uint8), mode="L").save(path)
        assert load_mask(path).foreground_count == 64

    def test_empty_shape_writes_all_zero_file(self, tmp_path):
        path = tmp_path / "empty.png"
        save_mask(BinaryShape.blank(16, 16), path)
        assert np.array_equal(np.asarray(Image.open(path)), np.zeros((16, 16)))

    def test_dimensions_preserved(self, tmp_path):
        path = tmp_path / "big.png"
        save_mask(disk(128, 40.0), path)
        assert np.asarray(Image.open(path)).shape == (128, 128)

    def test_equal_channel_rgb_accepted(self, tmp_path):
        gray = np.full((4, 4), 200, dtype=np.uint8)
        rgb = np.stack([gray, gray, gray], axis=-1)
        path = tmp_path / "rgb.png"
        Image.fromarray(rgb, mode="RGB").save(path)
        assert load_mask(path).foreground_count == 16

    def test_unequal_channels_rejected(self, tmp_path):
        rgb = np.zeros((4, 4, 3), dtype=np.uint8)
        rgb[..., 0] = 255
        path = tmp_path / "color.png"
        Image.fromarray(rgb, mode="RGB").save(path)
        with pytest.raises(ValueError):
            load_mask(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_mask(tmp_path / "nope.png")

    def test_undecodable_file(self, tmp_path):
        path = tmp_path / "garbage.png"
        path.write_bytes(b"this is not an image")
        with pytest.raises(ValueError):
            load_mask(path)

    def test_pgm_roundtrip(self, tmp_path):
        s = disk(32, 9.0)
        path = tmp_path / "mask.pgm"
        save_mask(s, path)
        assert load_mask(path) == s

    def test_color_image_loads_rgb(self, tmp_path):
        px = np.zeros((6, 5, 3), dtype=np.uint8)
        px[..., 2] = 200
        path = tmp_path / "img.png"
        Image.fromarray(px, mode="RGB").save(path)
        img = load_color_image(path)
        assert (img.width, img.height) == (5, 6)
        assert np.array_equal(img.pixels, px)


class TestParams:
    def test_roundtrip(self):
        d = {"p": "0.05", "rect": "3,4,10,12"}
        assert parse_params(format_params(d)) == d

    def test_sorted_and_joined(self):
        assert format_params({"t": "0.5", "k": "10"}) == "k=10;t=0.5"

    def test_empty(self):
        assert parse_params("") == {}
        assert format_params({}) == ""

    def test_malformed(self):
        with pytest.raises(ValueError):
            parse_params("novalue")


class TestManifest:
    def _rows(self, tmp_path):
        save_mask(disk(16, 5.0), tmp_path / "a.png")
        save_mask(disk(16, 6.0), tmp_path / "a_noisy.png")
        return [
            ManifestRow(item_id="a", split="train", clean_path="a.png"),
            ManifestRow(item_id="a", split="test", clean_path="a.png",
                        noisy_path="a_noisy.png", noise_kind="salt_pepper",
                        noise_params="p=0.05", seed=123, input_iou=0.875),
        ]

    def test_roundtrip(self, tmp_path):
        rows = self._rows(tmp_path)
        path = tmp_path / "manifest.csv"
        write_manifest(rows, path)
        back = read_manifest(path)
        assert back == rows

    def test_duplicate_key_rejected(self, tmp_path):
        rows = self._rows(tmp_path)
        path = tmp_path / "manifest.csv"
        write_manifest(rows + [rows[0]], path)
        with pytest.raises(ValueError):
            read_manifest(path)

    def test_missing_path_rejected(self, tmp_path):
        path = tmp_path / "manifest.csv"
        write_manifest([ManifestRow(item_id="x", split="train", clean_path="gone.png")], path)
        with pytest.raises(ValueError):
            read_manifest(path)
        assert read_manifest(path, check_paths=False)[0].item_id == "x"

    def test_bad_header_rejected(self, tmp_path):
        path = tmp_path / "manifest.csv"
        path.write_text("item,oops\n1,2\n", encoding="utf-8")
        with pytest.raises(ValueError):
            read_manifest(path)

    def test_bad_split_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            ManifestRow(item_id="x", split="validation", clean_path="x.png")

    def test_relative_resolution(self, tmp_path):
        sub = tmp_path / "data"
        sub.mkdir()
        assert resolve_path(sub / "m.csv", "masks/a.png") == sub / "masks" / "a.png"
        assert resolve_path(sub / "m.csv", "/abs/a.png") == resolve_path("x", "/abs/a.png")
