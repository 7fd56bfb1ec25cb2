"""Micro-image pitch estimation from a white image via half-octave scale space.

Stage 1 builds a half-octave pyramid of band-pass (difference-of-Gaussians)
responses and picks the level with the strongest maximum; the level index
maps to a blob radius through sigma = sqrt(2)^nu.  Stage 2 refines the scale
inside the bracketing octave with a scale-normalized Laplacian scan, for
which an ideal disc of radius r peaks exactly at sigma = r / sqrt(2).
Stage 3 measures the lens pitch directly as the median nearest-neighbor
spacing of blob maxima: tiling micro images bias the pure scale response
low by 10-15% (neighboring blobs leak into the kernel ring), while the
lattice spacing is unbiased and sub-pixel stable.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Tuple

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from plenokit.core import PipelineError, as_image
from plenokit.interp import resize_bilinear

SQRT2 = np.sqrt(2.0)
DOG_RATIO = SQRT2        # half-octave sigma ratio of the DoG band-pass
KERNEL_TRUNCATE = 4.0    # kernel support in sigmas
BASE_SIGMA = 1.0
MIN_LEVEL_DIM = 8        # stop the pyramid before kernels outgrow the level
NMS_REL_THRESHOLD = 0.2  # maxima below this fraction of the peak are noise


@dataclass
class ScaleSpacePyramid:
    """Half-octave band-pass pyramid with per-level peak bookkeeping."""

    levels: List[np.ndarray]
    max_intensity: np.ndarray          # per-level peak response
    argmax: List[Tuple[int, int]]      # per-level peak location
    nu_star: int = 0

    @property
    def nu_max(self) -> int:
        return len(self.levels) - 1

    def sigma_coarse(self) -> float:
        """Blob radius at the initial scale from the winning level index."""
        nu = self.nu_star
        return float(2 ** (nu // 2) * np.sqrt(2.0 ** (nu % 2)))


def _dog(img: np.ndarray, sigma: float = BASE_SIGMA) -> np.ndarray:
    fine = ndimage.gaussian_filter(img, sigma, truncate=KERNEL_TRUNCATE)
    coarse = ndimage.gaussian_filter(img, sigma * DOG_RATIO, truncate=KERNEL_TRUNCATE)
    return fine - coarse


def _downsample_half_octave(img: np.ndarray) -> np.ndarray:
    shape = (int(np.ceil(img.shape[0] / SQRT2)), int(np.ceil(img.shape[1] / SQRT2)))
    return resize_bilinear(img, shape)


def _downsample_n(img: np.ndarray, steps: int) -> np.ndarray:
    for _ in range(steps):
        img = _downsample_half_octave(img)
    return img


def build_pyramid(white: np.ndarray) -> ScaleSpacePyramid:
    levels, maxima, locs = [], [], []
    cur = white
    while min(cur.shape) >= MIN_LEVEL_DIM:
        resp = _dog(cur)
        levels.append(resp)
        flat = int(np.argmax(resp))
        locs.append(np.unravel_index(flat, resp.shape))
        maxima.append(resp.max())
        cur = _downsample_half_octave(cur)
    maxima = np.asarray(maxima)
    return ScaleSpacePyramid(levels, maxima, locs, nu_star=int(np.argmax(maxima)))


def _refine_sigma(white: np.ndarray, sigma_coarse: float) -> float:
    """Scale-normalized Laplacian scan inside the bracketing octave."""
    r_pred = SQRT2 * sigma_coarse
    down = max(0, int(np.floor(2 * np.log2(max(r_pred / 8.0, 1.0)))))
    work = _downsample_n(white, down)
    s_pred = sigma_coarse / SQRT2 ** down
    sigmas = s_pred * 2.0 ** np.linspace(-0.6, 0.6, 13)
    resp = np.array([
        (-ndimage.gaussian_laplace(work, s, truncate=KERNEL_TRUNCATE) * s * s).max()
        for s in sigmas
    ])
    i = int(np.argmax(resp))
    if 0 < i < len(resp) - 1:
        denom = resp[i - 1] - 2 * resp[i] + resp[i + 1]
        if denom < 0:
            shift = 0.5 * (resp[i - 1] - resp[i + 1]) / denom
            log_s = np.log(sigmas)
            return float(np.exp(log_s[i] + shift * (log_s[1] - log_s[0]))) * SQRT2 ** down
    return float(sigmas[i]) * SQRT2 ** down


def _spacing_pitch(white: np.ndarray, sigma_fine: float) -> float | None:
    """Median nearest-neighbor distance of blob maxima at the detected scale."""
    down = max(0, int(np.floor(2 * np.log2(max(sigma_fine / 6.0, 1.0)))))
    work = _downsample_n(white, down)
    s = sigma_fine / SQRT2 ** down
    from plenokit.calibrate.centroids import nms_maxima
    from plenokit.calibrate.sorting import _merge_duplicates

    resp = -ndimage.gaussian_laplace(work, s, truncate=KERNEL_TRUNCATE)
    pts = nms_maxima(resp)
    if len(pts) < 2:
        return None
    # plateau maxima of symmetric blobs land on 2x2 clusters; collapse them
    pts = _merge_duplicates(_subpixel_peaks(resp, pts), 2.0 * s)
    if len(pts) < 2:
        return None
    dist, _ = cKDTree(pts).query(pts, k=2)
    gaps = dist[:, 1]
    if len(gaps) == 0:
        return None
    return float(np.median(gaps)) * SQRT2 ** down


def _subpixel_peaks(resp: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Quadratic sub-pixel peak interpolation per axis on a 3x3 neighborhood."""
    out = pts.astype(np.float64).copy()
    for n, (k, l) in enumerate(pts.astype(int)):
        if 0 < k < resp.shape[0] - 1:
            denom = resp[k - 1, l] - 2 * resp[k, l] + resp[k + 1, l]
            if denom < 0:
                out[n, 0] = k + 0.5 * (resp[k - 1, l] - resp[k + 1, l]) / denom
        if 0 < l < resp.shape[1] - 1:
            denom = resp[k, l - 1] - 2 * resp[k, l] + resp[k, l + 1]
            if denom < 0:
                out[n, 1] = l + 0.5 * (resp[k, l - 1] - resp[k, l + 1]) / denom
    return out


def estimate_pitch(white: np.ndarray) -> Tuple[float, int, ScaleSpacePyramid]:
    """Estimate the dominant micro-image scale and pitch of a white image.

    Returns ``(sigma_star, M, pyramid)`` where ``sigma_star`` is the refined
    blob scale feeding the centroid extractor and ``M`` is the odd micro-image
    pitch in pixels.  Even spacing estimates are rounded up to odd so the
    centroid index (M - 1) / 2 stays integral.
    """
    white = as_image(white)
    if white.ndim != 2:
        raise ValueError("white image must be single channel")
    if min(white.shape) < 8:
        raise ValueError("white image too small (min dimension 8)")

    pyramid = build_pyramid(white)
    if pyramid.max_intensity.max() <= 1e-12:
        raise PipelineError("no dominant blob scale", stage="pitch")
    if pyramid.nu_star == pyramid.nu_max:
        raise PipelineError("no dominant blob scale (response monotone in scale)",
                            stage="pitch")

    sigma_fine = _refine_sigma(white, pyramid.sigma_coarse())
    spacing = _spacing_pitch(white, sigma_fine)
    m_est = spacing if spacing is not None else 2.0 * SQRT2 * sigma_fine
    m = int(round(m_est))
    if m % 2 == 0:
        m += 1
    m = max(m, 3)
    return sigma_fine, m, pyramid
