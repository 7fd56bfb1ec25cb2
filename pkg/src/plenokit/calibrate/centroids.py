"""Centroid extraction with non-maximum suppression, plus sub-pixel
refinement by intensity-weighted or thresholded-area means."""

from __future__ import annotations

import logging
import numpy as np
from scipy import ndimage

from plenokit.core import PipelineError, as_image
from plenokit.calibrate.pitch import KERNEL_TRUNCATE, NMS_REL_THRESHOLD

log = logging.getLogger(__name__)


def log_response(white: np.ndarray, sigma_star: float) -> np.ndarray:
    """Laplacian-of-Gaussian response, sign flipped so bright blobs are maxima."""
    return -ndimage.gaussian_laplace(as_image(white), sigma_star, truncate=KERNEL_TRUNCATE)


def extract_centroids(white: np.ndarray, sigma_star: float) -> np.ndarray:
    """Integer-coordinate micro-image centers from a 3x3 NMS scan.

    The white image is convolved with a Laplacian kernel matched to the
    detected blob scale; a pixel survives when it is not below any of its 8
    neighbors and carries a meaningful fraction of the peak response.
    Duplicates (several maxima per micro image on noisy inputs) are allowed;
    the sorter merges them.
    """
    if sigma_star <= 0:
        raise ValueError("sigma_star must be positive")
    resp = log_response(white, sigma_star)
    points = nms_maxima(resp)
    if len(points) == 0:
        raise PipelineError("no centroids found", stage="extract")
    return points


def nms_maxima(resp: np.ndarray) -> np.ndarray:
    """3x3 non-maximum suppression keeping positive, non-noise peaks.

    The noise gate is relative to the median peak value rather than the
    global maximum: blobs at the lattice edge see less neighbor interference
    and respond noticeably stronger than interior ones.
    """
    if resp.max() - resp.min() < 1e-9:
        # flat response: the kernel's small DC leak on constant inputs
        return np.empty((0, 2))
    foot = np.ones((3, 3), dtype=bool)
    foot[1, 1] = False
    neighbors = ndimage.maximum_filter(resp, footprint=foot, mode="constant", cval=-np.inf)
    mask = (resp >= neighbors) & (resp > 0)
    values = resp[mask]
    if values.size == 0:
        return np.empty((0, 2))
    floor = NMS_REL_THRESHOLD * np.median(values)
    points = np.argwhere(mask & (resp > floor)).astype(np.float64)
    return points


def refine_centroids(white_log: np.ndarray, seeds: np.ndarray, pitch: int,
                     mode: str = "area") -> np.ndarray:
    """Sub-pixel refinement over the M x M region around each seed.

    ``mode='peak'`` takes the response-weighted mean of the region (negative
    ring responses are clipped to zero so weights stay non-negative);
    ``mode='area'`` takes the unweighted mean of pixels above the region's
    75th percentile.  Edge seeds use clipped regions; a degenerate region
    falls back to the seed and is logged.
    """
    if mode not in ("peak", "area"):
        raise ValueError(f"unknown refinement mode {mode!r}")
    resp = np.asarray(white_log, dtype=np.float64)
    half = int(pitch) // 2
    out = np.empty((len(seeds), 2), dtype=np.float64)
    flagged = 0
    for n, (sk, sl) in enumerate(np.asarray(seeds, dtype=np.float64)):
        k0 = max(0, int(round(sk)) - half)
        k1 = min(resp.shape[0], int(round(sk)) + half + 1)
        l0 = max(0, int(round(sl)) - half)
        l1 = min(resp.shape[1], int(round(sl)) + half + 1)
        region = resp[k0:k1, l0:l1]
        kk, ll = np.meshgrid(np.arange(k0, k1, dtype=np.float64),
                             np.arange(l0, l1, dtype=np.float64), indexing="ij")
        if mode == "peak":
            w = np.clip(region, 0.0, None)
            total = w.sum()
            if total <= 0:
                out[n] = (sk, sl)
                flagged += 1
                continue
            out[n] = ((w * kk).sum() / total, (w * ll).sum() / total)
        else:
            thr = np.percentile(region, 75.0)
            mask = region > thr
            if not mask.any():
                out[n] = (sk, sl)
                flagged += 1
                continue
            out[n] = (kk[mask].mean(), ll[mask].mean())
    if flagged:
        log.warning("refine_centroids: %d of %d regions degenerate, seeds kept",
                    flagged, len(seeds))
    return out
