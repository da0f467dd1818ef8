import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chronochroma import colorspace as cs
from chronochroma.errors import DimensionError, ShapeError

# Reference Lab values recorded from an independent implementation of the CIE
# formulas (scikit-image's rgb2lab, D65/2deg) before this module was written.
REFERENCE_LAB = {
    (255, 0, 0): (53.240588, 80.092308, 67.202751),
    (0, 255, 0): (87.735099, -86.183030, 83.179703),
    (0, 0, 255): (32.295673, 79.185591, -107.857300),
    (10, 200, 60): (70.661441, -68.447830, 55.751806),
}
# lab2rgb of (L=50, a=80, b=-80) clamps blue: recorded from the same reference.
REFERENCE_CLAMPED_RGB = (173, 48, 255)


def solid(rgb, h=2, w=3):
    return cs.RgbFrame(np.tile(np.array(rgb, dtype=np.uint8), (h, w, 1)))


class TestRgbToLab:
    def test_white_is_achromatic(self):
        lab = cs.rgb_to_lab(solid((255, 255, 255)))
        assert np.allclose(lab.L, 100.0, atol=1e-6)
        assert np.abs(lab.a).max() < 0.01
        assert np.abs(lab.b).max() < 0.01

    def test_black(self):
        lab = cs.rgb_to_lab(solid((0, 0, 0)))
        assert np.allclose(lab.L, 0.0, atol=1e-9)
        assert np.allclose(lab.a, 0.0, atol=1e-9)
        assert np.allclose(lab.b, 0.0, atol=1e-9)

    @pytest.mark.parametrize("rgb,expected", sorted(REFERENCE_LAB.items()))
    def test_reference_values(self, rgb, expected):
        lab = cs.rgb_to_lab(solid(rgb))
        got = (lab.L[0, 0], lab.a[0, 0], lab.b[0, 0])
        assert got == pytest.approx(expected, abs=2e-2)

    def test_every_gray_is_achromatic(self):
        grays = np.arange(256, dtype=np.uint8)
        lab = cs.srgb_to_lab_array(np.stack([grays] * 3, axis=-1))
        assert np.abs(lab[:, 1]).max() < 0.01
        assert np.abs(lab[:, 2]).max() < 0.01

    def test_l_strictly_increasing_in_gray_level(self):
        grays = np.arange(256, dtype=np.uint8)
        lab = cs.srgb_to_lab_array(np.stack([grays] * 3, axis=-1))
        assert np.all(np.diff(lab[:, 0]) > 0)


class TestLabToRgb:
    def test_white_point(self):
        frame = cs.lab_to_rgb(cs.LabFrame(L=np.full((2, 2), 100.0), a=np.zeros((2, 2)), b=np.zeros((2, 2))))
        assert np.all(frame.pixels == 255)

    def test_out_of_gamut_clamps(self):
        frame = cs.lab_to_rgb(
            cs.LabFrame(L=np.full((1, 1), 50.0), a=np.full((1, 1), 80.0), b=np.full((1, 1), -80.0))
        )
        assert tuple(frame.pixels[0, 0]) == REFERENCE_CLAMPED_RGB

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_roundtrip_within_one_level(self, seed):
        rng = np.random.default_rng(seed)
        pixels = rng.integers(0, 256, size=(5, 7, 3), dtype=np.uint8)
        frame = cs.RgbFrame(pixels)
        back = cs.lab_to_rgb(cs.rgb_to_lab(frame))
        diff = np.abs(back.pixels.astype(int) - pixels.astype(int))
        assert diff.max() <= 1

    def test_matches_independent_reference_on_random_colors(self):
        skimage_color = pytest.importorskip("skimage.color")
        rng = np.random.default_rng(7)
        pixels = rng.integers(0, 256, size=(16, 16, 3), dtype=np.uint8)
        ours = cs.srgb_to_lab_array(pixels)
        theirs = skimage_color.rgb2lab(pixels.astype(np.float64) / 255.0)
        assert np.abs(ours - theirs).max() < 0.05


class TestNormalize:
    def make_lab(self, L, a, b, h=2, w=2):
        return cs.LabFrame(L=np.full((h, w), L), a=np.full((h, w), a), b=np.full((h, w), b))

    def test_affine_endpoints_l(self):
        x, _ = cs.normalize([self.make_lab(0.0, 0.0, 0.0)])
        assert np.allclose(x.values, -1.0)
        x, _ = cs.normalize([self.make_lab(50.0, 0.0, 0.0)])
        assert np.allclose(x.values, 0.0)
        x, _ = cs.normalize([self.make_lab(100.0, 0.0, 0.0)])
        assert np.allclose(x.values, 1.0)

    def test_affine_endpoints_ab(self):
        _, y = cs.normalize([self.make_lab(50.0, -128.0, 127.0)])
        assert np.allclose(y.values[..., 0], -1.0)
        assert np.allclose(y.values[..., 1], 1.0)

    def test_ab_zero_maps_off_center(self):
        # (0 - (-128)) / 255 * 2 - 1
        _, y = cs.normalize([self.make_lab(50.0, 0.0, 0.0)])
        assert y.values[0, 0, 0, 0] == pytest.approx(1.0 / 255.0, abs=1e-12)

    def test_shapes(self):
        frames = [self.make_lab(10.0 * i, 0.0, 0.0, h=4, w=6) for i in range(3)]
        x, y = cs.normalize(frames)
        assert x.shape == (4, 6, 3, 1)
        assert y.shape == (4, 6, 3, 2)

    def test_mismatched_dims(self):
        with pytest.raises(DimensionError):
            cs.normalize([self.make_lab(0, 0, 0, h=2, w=2), self.make_lab(0, 0, 0, h=3, w=2)])


class TestDenormalizeAb:
    def test_midpoint(self):
        v = np.zeros((1, 1, 1, 2))
        assert np.allclose(cs.denormalize_ab(v), -0.5)

    def test_endpoints(self):
        v = np.zeros((1, 1, 1, 2))
        v[..., 0], v[..., 1] = -1.0, 1.0
        ab = cs.denormalize_ab(v)
        assert ab[0, 0, 0, 0] == -128.0
        assert ab[0, 0, 0, 1] == 127.0

    def test_clamps_before_mapping(self):
        v = np.full((1, 1, 1, 2), 1.5)
        assert np.all(cs.denormalize_ab(v) == 127.0)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_roundtrip_exact(self, seed):
        rng = np.random.default_rng(seed)
        ab = rng.uniform(-128.0, 127.0, size=(3, 3, 2, 2))
        back = cs.unit_to_ab(cs.ab_to_unit(ab))
        assert np.abs(back - ab).max() < 1e-9

    def test_l_roundtrip_exact(self):
        L = np.linspace(0.0, 100.0, 1001)
        assert np.abs(cs.unit_to_l(cs.l_to_unit(L)) - L).max() < 1e-9

    def test_rejects_luminance_clip(self):
        with pytest.raises(ShapeError):
            cs.denormalize_ab(np.zeros((2, 2, 1, 1)))
