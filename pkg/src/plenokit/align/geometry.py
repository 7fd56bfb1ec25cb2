"""Rotational alignment and micro-image resampling into aligned light-fields.

Two alignment routes exist: a single global homography warp placing every
centroid on exact pixel centers at integer pitch, and per-micro-image local
gathers honoring each lens's own detected center.  Hexagonal lattices are
rectangularized on the way: globally by absorbing the 2/sqrt(3) row stretch
into the warp, locally by the shift-and-stretch scheme that upsamples the
within-row lens dimension.
"""

from __future__ import annotations

import numpy as np

from plenokit.core import (
    HEXAGONAL,
    CalibModel,
    CentroidGrid,
    LightField4D,
    PipelineError,
    as_image,
    canonical_grid,
)
from plenokit.interp import rotate_about_center, sample_bilinear, warp_homography

SQRT3 = np.sqrt(3.0)


def estimate_rotation(grid: CentroidGrid) -> float:
    """MLA rotation about the optical axis from the central centroid row.

    Least-squares line through the row nearest the grid middle.  The sign
    convention matches the lattice rotation itself: feeding the result to
    :func:`apply_rotation` aligns the rows with the pixel rows.
    """
    j_count, h_count = grid.counts
    if h_count < 2:
        raise ValueError("need at least 2 centroids per row")
    row = grid.entries[int(round((j_count - 1) / 2))]
    l_span = row[:, 1].max() - row[:, 1].min()
    if l_span < 1e-9:
        raise PipelineError("central centroid row is vertical", stage="rotate")
    slope = np.polyfit(row[:, 1], row[:, 0], 1)[0]
    # a lattice rotated by +theta gives its rows slope -tan(theta)
    return float(-np.arctan(slope))


def apply_rotation(img: np.ndarray, grid: CentroidGrid, theta_z: float):
    """Rotate image and centroids about the image center by -theta_z.

    The same similarity transform T^-1 R T is applied to both, so image
    content under each centroid is preserved.  With theta_z from
    :func:`estimate_rotation`, the rotated grid rows run parallel to the
    pixel rows.
    """
    if abs(theta_z) >= np.deg2rad(10.0):
        raise ValueError("rotation angle must be below 10 degrees")
    img = as_image(img)
    if theta_z == 0.0:
        return img, grid
    ck, cl = (img.shape[0] - 1) / 2.0, (img.shape[1] - 1) / 2.0
    ca, sa = np.cos(-theta_z), np.sin(-theta_z)
    rot = np.array([[ca, -sa], [sa, ca]])
    pts = grid.entries - np.array([ck, cl])
    pts = pts @ rot.T + np.array([ck, cl])
    # rotate_about_center(img, a) turns the content by +a; match the points
    out = rotate_about_center(img, -theta_z)
    return out, CentroidGrid(pts, packing=grid.packing, hex_row_phase=grid.hex_row_phase)


def _target_homography(calib: CalibModel) -> np.ndarray:
    """Ideal target grid transform P_g: canonical lattice -> pixel centers.

    Lens (0, 0) lands at ((M-1)/2, (M-1)/2) with pitch exactly M.  For
    hexagonal lattices the row step is stretched to M (factor 2/sqrt(3))
    while the half-row shifts stay, expressed in the canonical lattice.
    """
    m = float(calib.pitch)
    j_count, h_count = calib.counts
    grid = canonical_grid(j_count, h_count, calib.packing, calib.grid.hex_row_phase)
    row_scale = m * 2.0 / SQRT3 if calib.packing == HEXAGONAL else m
    scale = np.array([[row_scale, 0.0, 0.0], [0.0, m, 0.0], [0.0, 0.0, 1.0]])
    first = scale @ grid[0, 0]
    base = (m - 1) / 2.0
    t = np.array([[1.0, 0.0, base - first[0]], [0.0, 1.0, base - first[1]],
                  [0.0, 0.0, 1.0]])
    return t @ scale


def _slice_lattice(warped: np.ndarray, calib: CalibModel) -> LightField4D:
    """Cut the warped raster into micro images on the ideal target lattice."""
    m = calib.pitch
    j_count, h_count = calib.counts
    if warped.ndim == 2:
        warped = warped[..., np.newaxis]
    micro = np.empty((j_count, h_count, m, m, warped.shape[2]), dtype=warped.dtype)
    shifted_parity = calib.grid.hex_row_phase
    half = (m - 1) // 2
    pad = np.pad(warped, ((0, 0), (0, half + 2), (0, 0)), mode="edge")
    for j in range(j_count):
        k0 = j * m
        row = warped[k0:k0 + m]
        if calib.packing == HEXAGONAL and j % 2 == shifted_parity:
            # shifted-row centroids sit at h*M + M/2 + (M-1)/2: gather the
            # window at the half-pixel offset with a two-tap average
            row_pad = pad[k0:k0 + m]
            for h in range(h_count):
                l0 = h * m + half
                micro[j, h] = 0.5 * (row_pad[:, l0:l0 + m] + row_pad[:, l0 + 1:l0 + m + 1])
        else:
            for h in range(h_count):
                micro[j, h] = row[:, h * m:(h + 1) * m]
    return LightField4D(micro)


def resample_global(img: np.ndarray, calib: CalibModel) -> LightField4D:
    """Align the whole capture with one homography warp, then slice.

    The transfer matrix maps the fitted lattice onto the ideal target grid;
    rotation and projective distortion are corrected implicitly.
    """
    img = as_image(img)
    p_star = calib.homography
    if abs(np.linalg.det(p_star)) <= 1e-12:
        raise PipelineError("calibration homography is singular", stage="resample")
    p_t = _target_homography(calib) @ np.linalg.inv(p_star)
    m = calib.pitch
    extra = (m + 1) // 2 + 1 if calib.packing == HEXAGONAL else 0
    out_shape = (calib.counts[0] * m, calib.counts[1] * m + extra)
    warped = warp_homography(img, p_t, out_shape)
    return _slice_lattice(warped, calib)


def resample_local(img: np.ndarray, calib: CalibModel) -> LightField4D:
    """Resample each micro image so its detected centroid hits the central
    pixel; hexagonal lattices are converted to rectangular afterwards."""
    img = as_image(img)
    m = calib.pitch
    c = (m - 1) // 2
    j_count, h_count = calib.counts
    entries = calib.grid.entries
    if (entries[..., 0].min() < 0 or entries[..., 1].min() < 0
            or entries[..., 0].max() > img.shape[0] - 1
            or entries[..., 1].max() > img.shape[1] - 1):
        raise PipelineError("centroid outside image", stage="resample")
    offs = np.arange(m, dtype=np.float64) - c
    rows = entries[:, :, 0, np.newaxis, np.newaxis] + offs[:, np.newaxis]
    cols = entries[:, :, 1, np.newaxis, np.newaxis] + offs[np.newaxis, :]
    rows = np.broadcast_to(rows, (j_count, h_count, m, m))
    cols = np.broadcast_to(cols, (j_count, h_count, m, m))
    micro = sample_bilinear(img, rows, cols)
    if micro.ndim == 4:
        micro = micro[..., np.newaxis]
    if calib.packing != HEXAGONAL:
        return LightField4D(micro)
    return LightField4D(_hex_to_rect(micro, calib.grid.hex_row_phase))


def _hex_to_rect(micro: np.ndarray, shifted_parity: int) -> np.ndarray:
    """Shift-and-stretch: interpolate micro images along the lens-row axis.

    Within-row positions of row j are h + 0.5 * shifted(j); output columns
    sit at sqrt(3)/2 spacing, giving H' = round(2 H / sqrt(3)) lens columns
    with square lens sampling.  Interpolation blends whole micro images, so
    matching (u, v) pixels stay angular neighbors.
    """
    j_count, h_count = micro.shape[0], micro.shape[1]
    h_out = int(round(h_count * 2.0 / SQRT3))
    out = np.empty((j_count, h_out) + micro.shape[2:], dtype=micro.dtype)
    positions = np.arange(h_out) * (SQRT3 / 2.0)
    for j in range(j_count):
        shift = 0.5 if j % 2 == shifted_parity else 0.0
        x = np.clip(positions - shift, 0.0, h_count - 1.0)
        lo = np.floor(x).astype(int)
        hi = np.minimum(lo + 1, h_count - 1)
        w = (x - lo).reshape(-1, *([1] * (micro.ndim - 2)))
        out[j] = (1.0 - w) * micro[j, lo] + w * micro[j, hi]
    return out
