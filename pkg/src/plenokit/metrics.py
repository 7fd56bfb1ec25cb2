"""Quantitative evaluation: centroid deviation, Wasserstein-1 and histogram
distances on intensity distributions, PSNR, and a DFT sharpness ratio."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from plenokit.core import CentroidGrid

log = logging.getLogger(__name__)

HIST_BINS = 1024  # over [0, 1]; 8-bit-exact matching needs >= 256


def centroid_deviation(estimate: CentroidGrid | np.ndarray,
                       truth: CentroidGrid | np.ndarray) -> float:
    """Mean Euclidean distance between matching grid entries, in pixels."""
    est = estimate.entries if isinstance(estimate, CentroidGrid) else np.asarray(estimate)
    tru = truth.entries if isinstance(truth, CentroidGrid) else np.asarray(truth)
    if est.shape != tru.shape:
        raise ValueError(f"grid shapes differ: {est.shape} vs {tru.shape}")
    return float(np.mean(np.linalg.norm(est - tru, axis=-1)))


def deviation_unordered(truth_points: np.ndarray, detected: np.ndarray) -> float:
    """Mean truth-to-nearest-detection distance for unordered stages.

    Pre-sorter stages carry duplicates and no indexing, so the grid metric
    does not apply; this is the staging harness's counterpart.
    """
    from scipy.spatial import cKDTree

    d, _ = cKDTree(np.asarray(detected, dtype=np.float64)).query(
        np.asarray(truth_points, dtype=np.float64), k=1)
    return float(np.mean(d))


def channel_histogram(values: np.ndarray, bins: int = HIST_BINS) -> Tuple[np.ndarray, np.ndarray]:
    """(pdf, cdf) of intensities over [0, 1]; out-of-range values clip to the
    boundary bins for counting purposes only."""
    v = np.clip(np.asarray(values, dtype=np.float64).ravel(), 0.0, 1.0)
    counts, _ = np.histogram(v, bins=bins, range=(0.0, 1.0))
    pdf = counts / max(v.size, 1)
    return pdf, np.cumsum(pdf)


def wasserstein_w1(img_a: np.ndarray, img_b: np.ndarray, bins: int = HIST_BINS) -> float:
    """Area between intensity CDFs in intensity units (bin width 1 / bins).

    Three-channel images are scored on the green channel; per-channel values
    come from :func:`wasserstein_w1_channels`.
    """
    a, b = np.asarray(img_a), np.asarray(img_b)
    if a.ndim == 3 and a.shape[2] >= 3:
        a, b = a[..., 1], b[..., 1]
    _, cdf_a = channel_histogram(a, bins)
    _, cdf_b = channel_histogram(b, bins)
    return float(np.abs(cdf_a - cdf_b).sum() / bins)


def wasserstein_w1_channels(img_a: np.ndarray, img_b: np.ndarray,
                            bins: int = HIST_BINS) -> np.ndarray:
    a, b = np.atleast_3d(img_a), np.atleast_3d(img_b)
    return np.array([wasserstein_w1(a[..., c], b[..., c], bins) for c in range(a.shape[2])])


def hist_distance_d2(img_a: np.ndarray, img_b: np.ndarray, bins: int = HIST_BINS) -> float:
    """l2 distance between all-channel pooled intensity PDFs."""
    pdf_a, _ = channel_histogram(np.asarray(img_a).ravel(), bins)
    pdf_b, _ = channel_histogram(np.asarray(img_b).ravel(), bins)
    return float(np.linalg.norm(pdf_a - pdf_b))


def psnr(test: np.ndarray, truth: np.ndarray) -> float:
    """Peak signal-to-noise ratio with an 8-bit peak term (255).

    Inputs are taken in [0, 1] and scaled by 255 before the RMSE; identical
    images return ``inf``.
    """
    test, truth = np.asarray(test, dtype=np.float64), np.asarray(truth, dtype=np.float64)
    if test.shape != truth.shape:
        raise ValueError(f"shapes differ: {test.shape} vs {truth.shape}")
    rmse = float(np.sqrt(np.mean((255.0 * (test - truth)) ** 2)))
    if rmse == 0.0:
        return float("inf")
    return 20.0 * np.log10(255.0 / rmse)


@dataclass
class SharpnessConfig:
    """Crop bounds (row_start, row_stop, col_start, col_stop) plus the
    low-frequency block limits; defaults derive the limits as one twentieth
    of the cropped dimensions."""

    crop: Optional[Tuple[int, int, int, int]] = None
    q_h: Optional[int] = None
    q_v: Optional[int] = None


def sharpness(img: np.ndarray, cfg: SharpnessConfig | None = None) -> float:
    """High-frequency energy fraction of the cropped spectrum, in [0, 1].

    The total energy spans the first unshifted spectrum quarter excluding the
    DC row and column, so a constant crop has zero total energy and scores 0.
    """
    cfg = cfg or SharpnessConfig()
    img = np.asarray(img, dtype=np.float64)
    if img.ndim == 3:
        img = img.mean(axis=2)
    if cfg.crop is not None:
        r0, r1, c0, c1 = cfg.crop
        if not (r1 > r0 and c1 > c0):
            raise ValueError("invalid crop bounds")
        img = img[r0:r1, c0:c1]
    rows, cols = img.shape
    omega = int(np.ceil(rows / 2))
    psi = int(np.ceil(cols / 2))
    q_h = cfg.q_h if cfg.q_h is not None else max(1, round(rows / 20))
    q_v = cfg.q_v if cfg.q_v is not None else max(1, round(cols / 20))
    q_h, q_v = min(q_h, omega), min(q_v, psi)

    mag2 = np.abs(np.fft.fft2(img)) ** 2
    total = mag2[1:omega + 1, 1:psi + 1].sum()
    if total <= 0:
        log.warning("sharpness: constant crop, returning 0")
        return 0.0
    low = mag2[1:q_h + 1, 1:q_v + 1].sum()
    return float((total - low) / total)
