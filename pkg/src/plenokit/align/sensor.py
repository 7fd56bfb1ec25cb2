"""Color-filter-array processing: hot/dead pixel rectification on the raw
mosaic and gradient-corrected linear demosaicing."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from plenokit.core import as_image

PATTERNS = ("RGGB", "BGGR", "GRBG", "GBRG")

# channel offsets (row, col) of R, G1, G2, B within the 2x2 tile
_OFFSETS = {
    "RGGB": {"R": (0, 0), "G1": (0, 1), "G2": (1, 0), "B": (1, 1)},
    "BGGR": {"B": (0, 0), "G1": (0, 1), "G2": (1, 0), "R": (1, 1)},
    "GRBG": {"G1": (0, 0), "R": (0, 1), "B": (1, 0), "G2": (1, 1)},
    "GBRG": {"G1": (0, 0), "B": (0, 1), "R": (1, 0), "G2": (1, 1)},
}


@dataclass(frozen=True)
class BayerImage:
    """Single-channel mosaic with its color filter layout."""

    mosaic: np.ndarray
    pattern: str = "RGGB"

    def __post_init__(self):
        m = as_image(self.mosaic)
        if m.ndim != 2:
            raise ValueError("mosaic must be single channel")
        if m.shape[0] % 2 or m.shape[1] % 2:
            raise ValueError("mosaic dimensions must be even")
        if self.pattern not in PATTERNS:
            raise ValueError(f"unknown Bayer pattern {self.pattern!r}")
        object.__setattr__(self, "mosaic", m)

    def channel_offsets(self):
        return _OFFSETS[self.pattern]


def remove_cfa_outliers(bayer: BayerImage, n: int = 2) -> BayerImage:
    """Replace hot-pixel outliers per Bayer channel with the local median.

    Each channel sub-grid is compared against its 3x3-median-filtered
    version; a pixel is an outlier when this residual exceeds the local
    residual mean by four local standard deviations (window 2n + 1).
    Replacement is suppressed wherever more than ``n`` candidates share an
    n^2 x n^2 window, which keeps saturated areas untouched.  Non-outlier
    pixels pass through bit-identical.
    """
    if n < 1:
        raise ValueError("window parameter n must be >= 1")
    out = bayer.mosaic.copy()
    for dk, dl in _OFFSETS[bayer.pattern].values():
        ch = out[dk::2, dl::2]
        med = ndimage.median_filter(ch, size=3, mode="reflect")
        resid = ch - med
        win = 2 * n + 1
        mean = ndimage.uniform_filter(resid, size=win, mode="reflect")
        var = ndimage.uniform_filter(resid * resid, size=win, mode="reflect") - mean ** 2
        std = np.sqrt(np.clip(var, 0.0, None))
        cand = resid > mean + 4.0 * std
        # hot pixels are single-sensel events: corners of saturated regions
        # pass the residual test but are not strict local maxima
        ring = np.ones((3, 3), dtype=bool)
        ring[1, 1] = False
        cand &= ch > ndimage.maximum_filter(ch, footprint=ring, mode="reflect")
        if not cand.any():
            continue
        count_win = n * n + (1 - (n * n) % 2)  # odd size so the window is centered
        dense = ndimage.uniform_filter(cand.astype(np.float64), size=count_win,
                                       mode="constant") * count_win ** 2
        cand &= dense <= n + 0.5
        ch[cand] = med[cand]
    return BayerImage(out, bayer.pattern)


# Gradient-corrected linear interpolation kernels (5x5, eighths).
_K_G = np.array([
    [0, 0, -1, 0, 0],
    [0, 0, 2, 0, 0],
    [-1, 2, 4, 2, -1],
    [0, 0, 2, 0, 0],
    [0, 0, -1, 0, 0]], dtype=np.float64) / 8.0

_K_SAME_ROW = np.array([
    [0, 0, 0.5, 0, 0],
    [0, -1, 0, -1, 0],
    [-1, 4, 5, 4, -1],
    [0, -1, 0, -1, 0],
    [0, 0, 0.5, 0, 0]], dtype=np.float64) / 8.0

_K_SAME_COL = _K_SAME_ROW.T.copy()

_K_CROSS = np.array([
    [0, 0, -1.5, 0, 0],
    [0, 2, 0, 2, 0],
    [-1.5, 0, 6, 0, -1.5],
    [0, 2, 0, 2, 0],
    [0, 0, -1.5, 0, 0]], dtype=np.float64) / 8.0


def demosaic(bayer: BayerImage) -> np.ndarray:
    """Full-resolution RGB image by gradient-corrected linear interpolation.

    Measured samples pass through unchanged, so re-mosaicing the output at
    the original sites reproduces the input exactly.
    """
    m = bayer.mosaic
    off = _OFFSETS[bayer.pattern]
    masks = {}
    for name, (dk, dl) in off.items():
        mask = np.zeros(m.shape, dtype=bool)
        mask[dk::2, dl::2] = True
        masks[name] = mask
    r_mask, b_mask = masks["R"], masks["B"]
    g_mask = masks["G1"] | masks["G2"]

    conv = lambda k: ndimage.convolve(m, k, mode="mirror")
    est_g = conv(_K_G)
    est_same_row = conv(_K_SAME_ROW)
    est_same_col = conv(_K_SAME_COL)
    est_cross = conv(_K_CROSS)

    green = np.where(g_mask, m, est_g)

    # green sites split by whether the R column passes through them
    r_rows = np.zeros(m.shape, dtype=bool)
    r_rows[off["R"][0]::2, :] = True
    r_cols = np.zeros(m.shape, dtype=bool)
    r_cols[:, off["R"][1]::2] = True

    red = np.empty_like(m)
    red[r_mask] = m[r_mask]
    red[g_mask & r_rows] = est_same_row[g_mask & r_rows]
    red[g_mask & ~r_rows] = est_same_col[g_mask & ~r_rows]
    red[b_mask] = est_cross[b_mask]

    b_rows = np.zeros(m.shape, dtype=bool)
    b_rows[off["B"][0]::2, :] = True

    blue = np.empty_like(m)
    blue[b_mask] = m[b_mask]
    blue[g_mask & b_rows] = est_same_row[g_mask & b_rows]
    blue[g_mask & ~b_rows] = est_same_col[g_mask & ~b_rows]
    blue[r_mask] = est_cross[r_mask]

    return np.stack([red, green, blue], axis=-1)


def mosaic(rgb: np.ndarray, pattern: str = "RGGB") -> BayerImage:
    """Sample an RGB image down to a Bayer mosaic (inverse of demosaic at
    the measured sites)."""
    rgb = as_image(rgb)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ValueError("expected a 3-channel image")
    out = np.zeros(rgb.shape[:2], dtype=np.float64)
    plane = {"R": 0, "G1": 1, "G2": 1, "B": 2}
    for name, (dk, dl) in _OFFSETS[pattern].items():
        out[dk::2, dl::2] = rgb[dk::2, dl::2, plane[name]]
    return BayerImage(out, pattern)
