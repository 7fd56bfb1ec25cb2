"""De-vignetting by white-image division or per-micro-image polynomial fits.

Division propagates white-image noise into the light-field; the fit variant
replaces each white micro image with a smooth least-squares surface before
dividing, suppressing that propagation.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
import numpy as np

from plenokit.core import CalibModel, as_image

log = logging.getLogger(__name__)

DIV_FLOOR = 1e-3


@dataclass
class VignetteFit:
    """Per-lens polynomial coefficients and fit RMS (diagnostics)."""

    coeffs: np.ndarray      # (J, H, n_terms)
    rms: np.ndarray         # (J, H)
    order: int = 2


def devignette_divide(raw: np.ndarray, white: np.ndarray) -> np.ndarray:
    """Pixel-wise division by the max-normalized white image, floored at 1e-3."""
    raw = as_image(raw)
    white = as_image(white)
    if white.shape[:2] != raw.shape[:2]:
        raise ValueError(f"dimension mismatch: raw {raw.shape[:2]} vs white {white.shape[:2]}")
    peak = white.max()
    norm = white / peak if peak > 0 else white
    denom = np.maximum(norm, DIV_FLOOR)
    if raw.ndim == 3 and denom.ndim == 2:
        denom = denom[..., np.newaxis]
    return raw / denom


def _basis(u: np.ndarray, v: np.ndarray, order: int) -> np.ndarray:
    if order == 2:
        cols = [np.ones_like(u), u, v, u * v, u * u, v * v, u * u * v * v]
    elif order == 3:
        cols = [u ** a * v ** b for a in range(4) for b in range(4)]
    else:
        raise ValueError("order must be 2 or 3")
    return np.stack(cols, axis=-1)


def devignette_fit(raw: np.ndarray, white: np.ndarray, calib: CalibModel,
                   order: int = 2, return_fit: bool = False):
    """Divide each micro image by its fitted white surface.

    The white micro image around each calibrated centroid is regressed on a
    2-D polynomial basis (seven terms at order 2) via the normal-equation
    pseudo-inverse; the raw micro image is divided by the fitted surface
    normalized to its own maximum.  Degenerate regions (fewer pixels than
    basis terms or a singular system) fall back to plain division; pixels
    outside every micro-image region keep the division result as well.
    """
    raw = as_image(raw)
    white = as_image(white)
    out = devignette_divide(raw, white)
    j_count, h_count = calib.counts
    half = calib.pitch // 2
    n_terms = 7 if order == 2 else 16
    coeffs = np.zeros((j_count, h_count, n_terms))
    rms = np.zeros((j_count, h_count))
    fallbacks = 0
    for j in range(j_count):
        for h in range(h_count):
            ck, cl = calib.grid.entries[j, h]
            k0 = max(0, int(round(ck)) - half)
            k1 = min(white.shape[0], int(round(ck)) + half + 1)
            l0 = max(0, int(round(cl)) - half)
            l1 = min(white.shape[1], int(round(cl)) + half + 1)
            win = white[k0:k1, l0:l1]
            if win.ndim == 3:
                win = win.mean(axis=2)
            if win.size < n_terms:
                fallbacks += 1
                continue
            uu, vv = np.meshgrid(np.linspace(-1.0, 1.0, k1 - k0),
                                 np.linspace(-1.0, 1.0, l1 - l0), indexing="ij")
            a = _basis(uu.ravel(), vv.ravel(), order)
            ata = a.T @ a
            try:
                w = np.linalg.solve(ata, a.T @ win.ravel())
            except np.linalg.LinAlgError:
                fallbacks += 1
                continue
            surface = (a @ w).reshape(win.shape)
            coeffs[j, h] = w
            rms[j, h] = float(np.sqrt(np.mean((surface - win) ** 2)))
            peak = surface.max()
            if peak <= 0:
                fallbacks += 1
                continue
            denom = np.maximum(surface / peak, DIV_FLOOR)
            if raw.ndim == 3:
                denom = denom[..., np.newaxis]
            out[k0:k1, l0:l1] = raw[k0:k1, l0:l1] / denom
    if fallbacks:
        log.warning("devignette_fit: %d lenses fell back to division", fallbacks)
    if return_fit:
        return out, VignetteFit(coeffs, rms, order)
    return out
