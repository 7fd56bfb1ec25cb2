"""View-processing tests: hex fringe repair, histogram matching, Gaussian
transport and stack equalization."""

import numpy as np
import pytest

from plenokit.core import ViewStack
from plenokit.extract import (
    align_dynamic_range,
    color_stats,
    correct_hex_artifacts,
    equalize_colors,
    hist_match,
    mkl_transfer,
)
from plenokit.extract.transfer import ColorStats, analytic_matrix, transfer_matrix
from plenokit.metrics import channel_histogram, hist_distance_d2, wasserstein_w1
from plenokit.io import srgb_encode


def make_zipper(width=64, height=40, edge_col=30, ramp=4, shift=0.75):
    """Vertical ramp edge with every other row displaced horizontally."""
    cols = np.arange(width, dtype=float)
    profile = np.clip((cols - edge_col) / ramp, 0.0, 1.0)
    img = np.tile(profile, (height, 1))
    shifted_profile = np.clip((cols - edge_col + shift) / ramp, 0.0, 1.0)
    img[1::2] = shifted_profile
    return img


class TestHexCorrector:
    def test_smooth_horizontal_gradient_untouched(self):
        img = np.tile(np.linspace(0, 1, 48), (32, 1))
        out, mask = correct_hex_artifacts(img)
        assert not mask.mask.any()
        assert np.array_equal(out, img)

    def test_zipper_detected_and_reduced(self):
        img = make_zipper()
        out, mask = correct_hex_artifacts(img)
        assert mask.mask.any()
        # flagged pixels concentrate in the ramp band
        cols = np.flatnonzero(mask.mask.any(axis=0))
        assert cols.min() >= 20 and cols.max() <= 40
        # row-alternation energy at flagged pixels drops at least 4x
        full = mask.to_full(img.shape)
        alt_before = alt_after = 0.0
        for r in range(1, img.shape[0] - 1):
            cols_r = np.flatnonzero(full[r])
            if len(cols_r) == 0:
                continue
            alt_before += np.sum((img[r, cols_r] - 0.5 * (img[r - 1, cols_r] + img[r + 1, cols_r])) ** 2)
            alt_after += np.sum((out[r, cols_r] - 0.5 * (out[r - 1, cols_r] + out[r + 1, cols_r])) ** 2)
        assert alt_after * 4 <= alt_before

    def test_changes_only_inside_mask(self):
        img = make_zipper()
        out, mask = correct_hex_artifacts(img)
        full = mask.to_full(img.shape)
        assert np.array_equal(out[~full], img[~full])

    def test_short_runs_rejected(self):
        img = np.zeros((10, 20))
        img[1, 5:8] = 1.0  # 3-pixel disturbance on a shifted row
        out, mask = correct_hex_artifacts(img, threshold=0.1)
        assert not mask.mask.any()
        assert np.array_equal(out, img)

    def test_run_of_four_accepted(self):
        img = np.zeros((10, 20))
        img[1, 5:9] = 1.0
        out, mask = correct_hex_artifacts(img, threshold=0.1)
        assert mask.mask.sum() == 4

    def test_constant_view_identity(self):
        img = np.full((12, 12), 0.3)
        out, mask = correct_hex_artifacts(img)
        assert not mask.mask.any() and np.array_equal(out, img)


class TestHistMatch:
    def test_identity_within_quantization(self, rng):
        src = rng.random((64, 64))
        _, cdf = channel_histogram(src)
        out = hist_match(src, cdf)
        assert np.abs(out - src).max() <= 1.0 / 1024 + 1e-12

    def test_uniform_shift_closed_form(self):
        # exact uniform supports [0, 0.5) and [0.5, 1): matching is +0.5
        src = np.linspace(0.0, 0.5, 4096, endpoint=False).reshape(64, 64)
        tgt = np.linspace(0.5, 1.0, 4096, endpoint=False).reshape(64, 64)
        _, cdf = channel_histogram(tgt)
        out = hist_match(src, cdf)
        assert np.abs((out - src) - 0.5).max() <= 1.0 / 1024 + 1e-9

    def test_w1_never_increases(self, rng):
        for seed in range(5):
            r = np.random.default_rng(seed)
            src = np.clip(r.normal(0.3, 0.1, (64, 64)), 0, 1)
            tgt = np.clip(r.normal(0.6, 0.15, (64, 64)), 0, 1)
            _, cdf = channel_histogram(tgt)
            out = hist_match(src, cdf)
            assert wasserstein_w1(out, tgt) <= wasserstein_w1(src, tgt) + 1e-12

    def test_monotone_order_preserving(self, rng):
        src = rng.random((80, 80))
        _, cdf = channel_histogram(rng.random((80, 80)) ** 2)
        out = hist_match(src, cdf)
        order = np.argsort(src.ravel())
        assert np.all(np.diff(out.ravel()[order]) >= 0)

    def test_degenerate_source_maps_to_median(self):
        src = np.full((32, 32), 0.4)
        tgt = np.linspace(0, 1, 1024)
        _, cdf = channel_histogram(tgt)
        out = hist_match(src, cdf)
        assert np.allclose(out, out.flat[0])
        assert abs(out.flat[0] - 0.5) < 0.01


class TestMklTransfer:
    def test_identity_transport(self, rng):
        img = rng.random((40, 40, 3))
        stats = color_stats(img)
        m = transfer_matrix(stats.sigma, stats.sigma)
        assert np.linalg.norm(m - np.eye(3)) < 1e-9
        out = mkl_transfer(img, stats)
        assert np.abs(out - img).max() < 1e-7

    def test_diagonal_closed_form(self):
        m = transfer_matrix(np.diag([4.0, 1.0, 1.0]), np.eye(3))
        assert np.allclose(m, np.diag([0.5, 1.0, 1.0]), atol=1e-7)

    def test_monte_carlo_moment_check(self, rng):
        sigma_z = np.array([[0.04, 0.01, 0.0], [0.01, 0.02, 0.005], [0.0, 0.005, 0.03]])
        z = rng.multivariate_normal([0.5, 0.4, 0.6], sigma_z, 100000)
        r = rng.multivariate_normal([0.2, 0.3, 0.4],
                                    np.array([[0.05, 0.0, 0.01], [0.0, 0.02, 0.0],
                                              [0.01, 0.0, 0.04]]), 100000)
        tgt = ColorStats(z.mean(axis=0), np.cov(z.T))
        out = mkl_transfer(r.reshape(200, 500, 3), tgt)
        cov = np.cov(out.reshape(-1, 3).T)
        rel = np.linalg.norm(cov - tgt.sigma) / np.linalg.norm(tgt.sigma)
        assert rel < 0.02

    def test_constraint_identity(self, rng):
        sigma_r = np.cov(rng.random((3, 5000)))
        sigma_z = np.cov(rng.random((3, 5000)) ** 2)
        m = transfer_matrix(sigma_r, sigma_z)
        lhs = m.T @ np.linalg.inv(sigma_z) @ m
        rhs = np.linalg.inv(sigma_r)
        assert np.linalg.norm(lhs - rhs) / np.linalg.norm(rhs) < 1e-6
        # symmetric positive definite whenever both covariances are
        assert np.allclose(m, m.T, atol=1e-9)
        assert np.linalg.eigvalsh(m).min() > 0

    def test_analytic_parity_on_gaussian_pairs(self, rng):
        base = rng.multivariate_normal([0.4, 0.5, 0.3], np.diag([0.04, 0.01, 0.02]), 20000)
        target = base @ np.array([[0.8, 0.1, 0.0], [0.0, 0.9, 0.05], [0.1, 0.0, 0.7]]).T + 0.1
        src_stats = color_stats(base.reshape(-1, 1, 3), keep_samples=True)
        tgt_stats = color_stats(target.reshape(-1, 1, 3), keep_samples=True)
        m_analytic = analytic_matrix(src_stats, tgt_stats)
        moved = (base - src_stats.mu) @ m_analytic.T + tgt_stats.mu
        cov = np.cov(moved.T)
        assert np.linalg.norm(cov - tgt_stats.sigma) / np.linalg.norm(tgt_stats.sigma) < 0.05

    def test_non_finite_rejected(self, rng):
        img = rng.random((8, 8, 3))
        bad = ColorStats(np.array([np.nan, 0, 0]), np.eye(3))
        with pytest.raises(ValueError):
            mkl_transfer(img, bad)


def vignetted_stack(rng, m=5, j=24, h=24, strength=0.5):
    """View stack whose off-center views are dimmed, tinted and tone-bent.

    The power-law term models how angular falloff interacts with the rest
    of the pipeline: the distortion is monotone but not affine, so moment
    matching alone cannot undo it.
    """
    from plenokit.synth import smooth_texture

    base = np.stack([smooth_texture((j, h), seed=s, low=0.2, high=0.9)
                     for s in (1, 2, 3)], axis=-1)
    c = (m - 1) // 2
    views = np.empty((m, m, j, h, 3))
    for u in range(m):
        for v in range(m):
            rho = np.hypot(u - c, v - c) / (np.sqrt(2) * c)
            gain = 1.0 - strength * rho ** 2
            tint = np.array([1.0, 1.0 - 0.2 * strength * rho, 1.0 - 0.3 * strength * rho])
            views[u, v] = (base ** (1.0 + 0.6 * strength * rho)) * gain * tint
    return ViewStack(views)


class TestEqualize:
    def test_identical_views_unchanged(self, rng):
        views = np.tile(rng.random((1, 1, 16, 16, 3)), (3, 3, 1, 1, 1))
        out = equalize_colors(ViewStack(views), scheme="hm-mkl-hm")
        assert np.abs(out.views - views).max() < 2.0 / 1024

    def test_central_view_bit_exact(self, rng):
        vs = vignetted_stack(rng)
        for scheme in ("hm", "mkl", "hm-mkl-hm"):
            out = equalize_colors(vs, scheme=scheme)
            assert np.array_equal(out.central, vs.central)

    def test_compound_improves_corner_and_beats_mkl(self, rng):
        vs = vignetted_stack(rng)
        central = vs.central
        corner_before = vs.views[0, 0]
        out_mkl = equalize_colors(vs, scheme="mkl").views[0, 0]
        out_cmp = equalize_colors(vs, scheme="hm-mkl-hm").views[0, 0]
        w1 = {"before": wasserstein_w1(corner_before, central),
              "mkl": wasserstein_w1(out_mkl, central),
              "cmp": wasserstein_w1(out_cmp, central)}
        d2 = {"before": hist_distance_d2(corner_before, central),
              "mkl": hist_distance_d2(out_mkl, central),
              "cmp": hist_distance_d2(out_cmp, central)}
        assert w1["cmp"] < w1["before"] and d2["cmp"] < d2["before"]
        assert w1["cmp"] <= w1["mkl"] + 1e-9
        assert d2["cmp"] <= d2["mkl"] + 1e-9

    def test_parallax_untouched(self, rng):
        """Per-pixel mapping: spatial structure ranks preserved per channel."""
        vs = vignetted_stack(rng, strength=0.4)
        out = equalize_colors(vs, scheme="hm")
        view_in = vs.views[0, 0, :, :, 1].ravel()
        view_out = out.views[0, 0, :, :, 1].ravel()
        assert np.all(np.diff(view_out[np.argsort(view_in)]) >= -1e-12)

    def test_threads_match_serial(self, rng):
        vs = vignetted_stack(rng, m=3, j=12, h=12)
        a = equalize_colors(vs, scheme="hm-mkl-hm", threads=1)
        b = equalize_colors(vs, scheme="hm-mkl-hm", threads=4)
        assert np.array_equal(a.views, b.views)

    def test_unknown_scheme(self, rng):
        with pytest.raises(ValueError):
            equalize_colors(vignetted_stack(rng), scheme="magic")


class TestDynamicRange:
    def test_uniform_central_near_identity(self, rng):
        views = rng.random((3, 3, 64, 64, 1))
        out = align_dynamic_range(ViewStack(views))
        gain = (out.views.max() - out.views.min()) / (views.max() - views.min())
        assert abs(gain - 1.0) < 0.02

    def test_constant_field_flagged_identity(self):
        views = np.full((3, 3, 8, 8, 1), 0.25)
        out = align_dynamic_range(ViewStack(views))
        assert np.array_equal(out.views, views)

    def test_percentiles_map_to_unit_range(self, rng):
        views = 0.2 + 0.5 * rng.random((3, 3, 128, 128, 1))
        out = align_dynamic_range(ViewStack(views))
        central = out.central
        lo, hi = np.percentile(central, [0.005, 99.9])
        assert lo == pytest.approx(0.0, abs=1e-9)
        assert hi == pytest.approx(1.0, abs=1e-9)

    def test_srgb_value_at_export(self):
        assert srgb_encode(np.array(0.5)) == pytest.approx(0.73536, abs=1e-4)
