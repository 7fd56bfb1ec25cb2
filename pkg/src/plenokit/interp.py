"""Bilinear resampling helpers shared by alignment, rendering and synthesis.

Every resampler here uses bilinear weights with clamp-to-edge boundary
handling, so outputs are convex combinations of the input samples
(intensity-bounded by construction).
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage


def sample_bilinear(img: np.ndarray, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    """Sample ``img`` at fractional ``(rows, cols)``, clamping to the edge.

    Multi-channel images are sampled channel by channel; the output carries
    the coordinate arrays' shape (plus a trailing channel axis if present).
    """
    rows = np.asarray(rows, dtype=np.float64)
    cols = np.asarray(cols, dtype=np.float64)
    coords = np.stack([rows.ravel(), cols.ravel()])
    if img.ndim == 2:
        out = ndimage.map_coordinates(img, coords, order=1, mode="nearest")
        return out.reshape(rows.shape)
    chans = [
        ndimage.map_coordinates(img[..., c], coords, order=1, mode="nearest").reshape(rows.shape)
        for c in range(img.shape[2])
    ]
    return np.stack(chans, axis=-1)


def resize_bilinear(img: np.ndarray, out_shape: tuple) -> np.ndarray:
    """Resize so output pixel ``p`` samples input coordinate ``p * (in-1)/(out-1)``.

    Endpoints map to endpoints; upsampling by an integer factor ``f`` with
    the companion coordinate ``p / f`` is provided by :func:`upsample_views`.
    """
    k_out, l_out = int(out_shape[0]), int(out_shape[1])
    k_in, l_in = img.shape[0], img.shape[1]
    r = np.linspace(0.0, k_in - 1.0, k_out) if k_out > 1 else np.zeros(1)
    c = np.linspace(0.0, l_in - 1.0, l_out) if l_out > 1 else np.zeros(1)
    rr, cc = np.meshgrid(r, c, indexing="ij")
    return sample_bilinear(img, rr, cc)


def upsample_integer(img: np.ndarray, factor: int) -> np.ndarray:
    """Upsample by an integer factor; output pixel ``p`` samples ``p / factor``.

    Stride-``factor`` subsampling of the result returns the input exactly.
    """
    factor = int(factor)
    k, l = img.shape[0], img.shape[1]
    rr, cc = np.meshgrid(np.arange(k * factor) / factor,
                         np.arange(l * factor) / factor, indexing="ij")
    return sample_bilinear(img, rr, cc)


def warp_homography(img: np.ndarray, transfer: np.ndarray, out_shape: tuple) -> np.ndarray:
    """Warp ``img`` with transfer matrix ``P_t`` (output <- input coordinates).

    For each output pixel ``y`` the source location is ``P_t^-1 y`` in
    homogeneous ``(k, l, 1)`` coordinates, sampled bilinearly.
    """
    inv = np.linalg.inv(np.asarray(transfer, dtype=np.float64))
    k_out, l_out = int(out_shape[0]), int(out_shape[1])
    rr, cc = np.meshgrid(np.arange(k_out, dtype=np.float64),
                         np.arange(l_out, dtype=np.float64), indexing="ij")
    ones = np.ones_like(rr)
    src = np.tensordot(inv, np.stack([rr, cc, ones]), axes=(1, 0))
    w = src[2]
    rows, cols = src[0] / w, src[1] / w
    # matrix-inverse round-off would otherwise break exactness of identity warps
    rows = np.where(np.abs(rows - np.rint(rows)) < 1e-9, np.rint(rows), rows)
    cols = np.where(np.abs(cols - np.rint(cols)) < 1e-9, np.rint(cols), cols)
    return sample_bilinear(img, rows, cols)


def rotate_about_center(img: np.ndarray, angle: float) -> np.ndarray:
    """Rotate by ``angle`` (radians, k-l plane) about the image center."""
    k, l = img.shape[0], img.shape[1]
    ck, cl = (k - 1) / 2.0, (l - 1) / 2.0
    rr, cc = np.meshgrid(np.arange(k, dtype=np.float64),
                         np.arange(l, dtype=np.float64), indexing="ij")
    ca, sa = np.cos(angle), np.sin(angle)
    # inverse map: output pixel pulled from input rotated by -angle
    dk, dl = rr - ck, cc - cl
    src_r = ca * dk + sa * dl + ck
    src_c = -sa * dk + ca * dl + cl
    return sample_bilinear(img, src_r, src_c)


def shift_sum_window(acc: np.ndarray, cnt: np.ndarray, src: np.ndarray,
                     dk: int, dl: int) -> None:
    """Accumulate ``src`` into ``acc`` displaced by integer ``(dk, dl)``.

    Out-of-bounds samples contribute nothing; ``cnt`` tracks per-pixel
    contribution counts for later normalization.  ``acc[j] += src[j - dk]``.
    """
    k, l = acc.shape[0], acc.shape[1]
    r0, r1 = max(0, dk), min(k, k + dk)
    c0, c1 = max(0, dl), min(l, l + dl)
    if r0 >= r1 or c0 >= c1:
        return
    acc[r0:r1, c0:c1] += src[r0 - dk:r1 - dk, c0 - dl:c1 - dl]
    cnt[r0:r1, c0:c1] += 1.0
