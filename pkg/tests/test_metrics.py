"""Metric suite tests: deviation, W1, D2, PSNR, sharpness."""

import numpy as np
import pytest
from scipy import ndimage

from plenokit.core import CentroidGrid
from plenokit.metrics import (
    SharpnessConfig,
    centroid_deviation,
    hist_distance_d2,
    psnr,
    sharpness,
    wasserstein_w1,
    wasserstein_w1_channels,
)
from plenokit.synth import smooth_texture


class TestCentroidDeviation:
    def test_zero_on_identical(self, rng):
        g = CentroidGrid(rng.random((4, 5, 2)) * 100)
        assert centroid_deviation(g, g) == 0.0

    def test_uniform_offset_pythagoras(self, rng):
        base = rng.random((4, 5, 2)) * 100
        shifted = base + np.array([0.3, 0.4])
        assert centroid_deviation(CentroidGrid(shifted), CentroidGrid(base)) == pytest.approx(0.5)

    def test_shape_mismatch(self, rng):
        with pytest.raises(ValueError):
            centroid_deviation(CentroidGrid(rng.random((4, 5, 2))),
                               CentroidGrid(rng.random((5, 4, 2))))


class TestWasserstein:
    def test_identical_zero(self, rng):
        img = rng.random((64, 64))
        assert wasserstein_w1(img, img) == 0.0

    def test_point_mass_transport(self):
        a = np.full((50, 50), 0.2)
        b = np.full((50, 50), 0.7)
        assert wasserstein_w1(a, b) == pytest.approx(0.5, abs=2 / 1024)

    def test_shift_invariance(self, rng):
        img = 0.1 + 0.7 * rng.random((80, 80))
        assert wasserstein_w1(img, img + 0.1) == pytest.approx(0.1, abs=2 / 1024)

    def test_green_channel_reported(self, rng):
        img_a = rng.random((32, 32, 3))
        img_b = img_a.copy()
        img_b[..., 1] = np.clip(img_b[..., 1] + 0.2, 0, 1)
        scalar = wasserstein_w1(img_a, img_b)
        per_channel = wasserstein_w1_channels(img_a, img_b)
        assert scalar == per_channel[1]
        assert per_channel[0] == 0.0 and per_channel[2] == 0.0

    def test_metric_properties_spot_checks(self, rng):
        imgs = [rng.random((32, 32)) for _ in range(3)]
        for img in imgs:
            assert wasserstein_w1(img, img) == 0.0
        for a in imgs:
            for b in imgs:
                assert wasserstein_w1(a, b) == pytest.approx(wasserstein_w1(b, a))
        a, b, c = imgs
        assert wasserstein_w1(a, c) <= wasserstein_w1(a, b) + wasserstein_w1(b, c) + 1e-12


class TestHistDistance:
    def test_identical_zero(self, rng):
        img = rng.random((32, 32, 3))
        assert hist_distance_d2(img, img) == 0.0

    def test_disjoint_deltas_sqrt2(self):
        a = np.full((40, 40, 3), 0.2)
        b = np.full((40, 40, 3), 0.7)
        assert hist_distance_d2(a, b) == pytest.approx(np.sqrt(2.0))

    def test_permutation_invariance(self, rng):
        img = rng.random((32, 32))
        perm = rng.permutation(img.ravel()).reshape(img.shape)
        ref = rng.random((32, 32))
        assert hist_distance_d2(img, ref) == pytest.approx(hist_distance_d2(perm, ref))
        assert wasserstein_w1(img, ref) == pytest.approx(wasserstein_w1(perm, ref))


class TestPsnr:
    def test_identical_inf(self, rng):
        img = rng.random((16, 16))
        assert psnr(img, img) == float("inf")

    def test_one_lsb_closed_form(self):
        truth = np.full((64, 64), 0.5)
        test = truth + 1.0 / 255.0
        assert psnr(test, truth) == pytest.approx(20 * np.log10(255.0), abs=1e-9)

    def test_strictly_decreasing_in_rmse(self, rng):
        truth = rng.random((32, 32))
        values = [psnr(truth + eps, truth) for eps in (0.001, 0.01, 0.1)]
        assert values[0] > values[1] > values[2]

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            psnr(np.zeros((4, 4)), np.zeros((5, 5)))


class TestSharpness:
    def test_constant_zero(self):
        assert sharpness(np.full((64, 64), 0.3)) == 0.0

    def test_checkerboard_high(self):
        kk, ll = np.meshgrid(np.arange(64), np.arange(64), indexing="ij")
        checker = ((kk + ll) % 2).astype(float)
        assert sharpness(checker) >= 0.99

    def test_blur_monotone(self):
        tex = smooth_texture((96, 96), seed=8, smooth=0.5)
        values = [sharpness(ndimage.gaussian_filter(tex, s)) for s in (0.0, 1.0, 2.0, 4.0)]
        assert values[0] > values[1] > values[2] > values[3]

    def test_blur_monotone_over_crops(self, rng):
        """>= 95% of crop pairs ordered under blur sweeps."""
        ok = total = 0
        for i in range(20):
            tex = smooth_texture((64, 64), seed=100 + i, smooth=0.4)
            vals = [sharpness(ndimage.gaussian_filter(tex, s)) for s in (0.0, 1.0, 2.0, 4.0)]
            for a, b in zip(vals, vals[1:]):
                total += 1
                ok += a >= b
        assert ok >= 0.95 * total

    def test_range_and_crop(self, rng):
        img = rng.random((80, 80))
        s = sharpness(img, SharpnessConfig(crop=(10, 70, 10, 70)))
        assert 0.0 <= s <= 1.0
        with pytest.raises(ValueError):
            sharpness(img, SharpnessConfig(crop=(10, 10, 0, 5)))
