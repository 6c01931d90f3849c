import math

import numpy as np
import pytest

from shapebench.align import AlignmentParams, align, radial_percentile, rescale_bicubic
from shapebench.core import BinaryShape, center_of_mass, iou, translate
from shapebench.synth import disk, random_blob

BLOB_CANVAS = 352
BLOB_BODY = (52.0, 65.0)


def brute_percentile(s: BinaryShape, q: float) -> float:
    # independent oracle: enumerate all distances with a double loop
    c = center_of_mass(s)
    dists = []
    for y in range(s.height):
        for x in range(s.width):
            if s.pixels[y, x]:
                dists.append(math.hypot(x - c.x, y - c.y))
    dists.sort()
    return dists[math.ceil(q * len(dists)) - 1]


class TestRadialPercentile:
    def test_single_pixel_is_zero(self):
        s = BinaryShape.from_foreground(8, 8, [(3, 3)])
        assert radial_percentile(s, 0.8) == 0.0

    def test_nearest_rank_on_four_distances(self):
        # Distances from the centroid are exactly {0, 3, 4, 5} (3-4-5 offsets
        # summing to zero keep the centroid on the first pixel). The nearest
        # rank for q=0.8 is ceil(0.8 * 4) - 1 = index 3, so the result is 5.
        s = BinaryShape.from_foreground(20, 20, [(10, 10), (13, 10), (10, 14), (7, 6)])
        c = center_of_mass(s)
        assert (c.x, c.y) == (10.0, 10.0)
        assert radial_percentile(s, 0.8) == 5.0

    @pytest.mark.parametrize("radius", [20.0, 32.0, 45.0])
    def test_disk_matches_area_fraction(self, radius):
        s = disk(128, radius)
        expected = radius * math.sqrt(0.8)
        assert radial_percentile(s, 0.8) == pytest.approx(expected, rel=0.03)

    @pytest.mark.parametrize("q", [0.25, 0.5, 0.8, 0.95])
    def test_matches_brute_force_enumeration(self, q):
        s = random_blob(48, seed=5, body_radius=(10.0, 14.0))
        assert radial_percentile(s, q) == pytest.approx(brute_percentile(s, q), abs=1e-12)

    def test_empty_foreground_raises(self):
        with pytest.raises(ValueError):
            radial_percentile(BinaryShape.blank(8, 8), 0.8)

    def test_q_out_of_range(self):
        s = disk(32, 10.0)
        for q in (0.0, 1.0, -0.1, 1.5):
            with pytest.raises(ValueError):
                radial_percentile(s, q)


class TestRescaleBicubic:
    def test_factor_one_is_identity(self):
        img = disk(65, 20.0).pixels.astype(float)
        assert np.array_equal(rescale_bicubic(img, 1.0), img)

    def test_output_dims_round(self):
        img = np.zeros((100, 100))
        assert rescale_bicubic(img, 0.5).shape == (50, 50)
        assert rescale_bicubic(img, 1.28).shape == (128, 128)

    def test_constant_image_stays_constant(self):
        out = rescale_bicubic(np.ones((40, 40)), 1.7)
        assert np.allclose(out, 1.0)

    def test_upscaled_disk_matches_analytic(self):
        r, f = 20.0, 1.9
        src = disk(64, r)
        out = (rescale_bicubic(src.pixels.astype(float), f) >= 0.5).astype(np.uint8)
        m = out.shape[0]
        # center pixel m//2 maps onto the source anchor pixel 64//2 = 32
        c = m // 2 + (31.5 - 32.0) * f
        ref = disk(m, r * f, center=(c, c))
        assert iou(BinaryShape(out), ref) >= 0.97

    def test_rejects_nonpositive_scale(self):
        with pytest.raises(ValueError):
            rescale_bicubic(np.ones((4, 4)), 0.0)


class TestAlignmentParams:
    def test_defaults(self):
        p = AlignmentParams()
        assert (p.canvas, p.target_radius, p.percentile, p.rebinarize_threshold) == \
            (128, 40.0, 0.80, 0.5)

    @pytest.mark.parametrize("kwargs", [
        {"canvas": 0}, {"target_radius": 0.0}, {"percentile": 1.0},
        {"percentile": 0.0}, {"rebinarize_threshold": 0.0},
    ])
    def test_rejects_bad_params(self, kwargs):
        with pytest.raises(ValueError):
            AlignmentParams(**kwargs)


class TestAlign:
    def test_centered_disk_example(self):
        # Disk of radius 45: the 80th-percentile radius is near 40.25, so the
        # aligned disk shrinks to roughly radius 44.7.
        s = disk(128, 45.0)
        p80 = radial_percentile(s, 0.8)
        assert p80 == pytest.approx(45.0 * math.sqrt(0.8), rel=0.01)
        out = align(s)
        ref = disk(128, 45.0 * 40.0 / p80)
        assert iou(out, ref) >= 0.97

    def test_translation_cancels_exactly(self):
        s = random_blob(BLOB_CANVAS, seed=3, body_radius=BLOB_BODY)
        assert align(translate(s, 10, -5)) == align(s)
        assert align(translate(s, -23, 17)) == align(s)

    def test_single_pixel_raises(self):
        with pytest.raises(ValueError):
            align(BinaryShape.from_foreground(64, 64, [(30, 30)]))

    def test_empty_foreground_raises(self):
        with pytest.raises(ValueError):
            align(BinaryShape.blank(64, 64))

    def test_custom_canvas_dims(self):
        out = align(disk(200, 60.0), AlignmentParams(canvas=96, target_radius=30.0))
        assert (out.width, out.height) == (96, 96)

    @pytest.mark.parametrize("seed", range(8))
    def test_alignment_contract_per_blob(self, seed):
        s = random_blob(BLOB_CANVAS, seed=seed, body_radius=BLOB_BODY)
        out = align(s)
        assert (out.width, out.height) == (128, 128)
        assert abs(radial_percentile(out, 0.8) - 40.0) <= 2.0
        c = center_of_mass(out)
        assert abs(c.x - 64) <= 1.0 and abs(c.y - 64) <= 1.0
        assert iou(align(out), out) >= 0.98
