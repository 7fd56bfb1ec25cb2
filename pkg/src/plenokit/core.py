"""Shared data model: rasters, 4-D light-fields, view stacks and the
spatial/angular reindexing every downstream stage relies on.

Conventions
-----------
* Images are numpy arrays of linear-light samples, shape ``(K, L)`` or
  ``(K, L, channels)`` with ``K`` rows and ``L`` columns.  Values live in
  ``[0, 1]`` nominally; clamping happens only at export, never mid-pipeline.
* A light-field is indexed ``[j, h, u, v, ch]``: lens row ``j``, lens column
  ``h``, micro-image pixel ``(u, v)``.  The micro-image pitch ``M`` is odd so
  the centroid index ``c = (M - 1) // 2`` is integral.
* A view stack is indexed ``[u, v, j, h, ch]``; the view at ``(u, v)`` is the
  sub-aperture image for the signed angular offset ``(i, g) = (u - c, v - c)``.
  Public helpers accept the signed convention; storage is zero-based.
* Angular index pairing is row-major: the first angular axis moves with the
  lens-row axis, the second with the lens-column axis.

All containers are treated as immutable after construction; reindexing ops
are pure, so the types are safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Tuple

import numpy as np

HEXAGONAL = "hexagonal"
RECTANGULAR = "rectangular"


class PipelineError(Exception):
    """Processing failure inside a pipeline stage."""

    def __init__(self, message: str, stage: str = ""):
        super().__init__(message)
        self.stage = stage


def as_image(img: np.ndarray) -> np.ndarray:
    """Validate an image array: finite samples, K, L >= 1, 1/3/4 channels."""
    img = np.asarray(img, dtype=np.float64) if img.dtype.kind != "f" else np.asarray(img)
    if img.ndim not in (2, 3):
        raise ValueError(f"image must be 2-D or 3-D, got shape {img.shape}")
    if img.ndim == 3 and img.shape[2] not in (1, 3, 4):
        raise ValueError(f"channel count must be 1, 3 or 4, got {img.shape[2]}")
    if img.shape[0] < 1 or img.shape[1] < 1:
        raise ValueError("image dimensions must be at least 1x1")
    if not np.all(np.isfinite(img)):
        raise ValueError("image contains non-finite samples")
    return img


def require_odd_pitch(m: int) -> int:
    m = int(m)
    if m % 2 != 1:
        raise ValueError(f"pitch must be odd, got {m}")
    return m


@dataclass(frozen=True)
class CentroidGrid:
    """2-D indexed micro-image centers with packing metadata.

    ``entries[j, h]`` holds the sub-pixel ``(k, l)`` center of lens ``(j, h)``.
    ``hex_row_phase`` states which row parity is shifted by half a pitch
    (hexagonal packing only; 0 means even rows are shifted).
    """

    entries: np.ndarray            # (J, H, 2) float
    packing: str = RECTANGULAR
    hex_row_phase: int = 0

    def __post_init__(self):
        e = np.asarray(self.entries, dtype=np.float64)
        if e.ndim != 3 or e.shape[2] != 2:
            raise ValueError(f"entries must have shape (J, H, 2), got {e.shape}")
        if self.packing not in (HEXAGONAL, RECTANGULAR):
            raise ValueError(f"unknown packing {self.packing!r}")
        object.__setattr__(self, "entries", e)

    @property
    def counts(self) -> Tuple[int, int]:
        return self.entries.shape[0], self.entries.shape[1]

    @property
    def points(self) -> np.ndarray:
        """Row-major flattened (N, 2) view of the entries."""
        return self.entries.reshape(-1, 2)

    def median_pitch(self) -> float:
        """Median within-row neighbor distance."""
        d = np.diff(self.entries, axis=1)
        return float(np.median(np.hypot(d[..., 0], d[..., 1])))


@dataclass(frozen=True)
class CalibModel:
    """Persisted calibration artifact.

    ``homography`` maps the canonical unit-pitch grid (see
    :func:`plenokit.calibrate.gridfit.canonical_grid`) onto sensor
    coordinates; its last entry is normalized to 1.
    """

    pitch: int
    packing: str
    counts: Tuple[int, int]
    homography: np.ndarray          # (3, 3), [2, 2] == 1
    rotation: float                 # theta_z, radians
    grid: CentroidGrid
    fit_residual: float = 0.0

    def __post_init__(self):
        require_odd_pitch(self.pitch)
        P = np.asarray(self.homography, dtype=np.float64)
        if P.shape != (3, 3):
            raise ValueError("homography must be 3x3")
        if abs(np.linalg.det(P)) <= 1e-12:
            raise ValueError("homography is singular")
        object.__setattr__(self, "homography", P / P[2, 2])
        object.__setattr__(self, "counts", (int(self.counts[0]), int(self.counts[1])))


@dataclass(frozen=True)
class LightField4D:
    """Aligned micro-image array, samples indexed ``[j, h, u, v, ch]``."""

    samples: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.samples)
        if s.ndim == 4:
            s = s[..., np.newaxis]
        if s.ndim != 5:
            raise ValueError(f"light-field must be 4-D or 5-D, got shape {s.shape}")
        if s.shape[2] != s.shape[3]:
            raise ValueError(f"micro images must be square, got {s.shape[2]}x{s.shape[3]}")
        require_odd_pitch(s.shape[2])
        object.__setattr__(self, "samples", s)

    @property
    def dims(self) -> Tuple[int, int, int, int, int]:
        return self.samples.shape

    @property
    def pitch(self) -> int:
        return self.samples.shape[2]

    @property
    def centroid_index(self) -> int:
        return (self.pitch - 1) // 2


@dataclass(frozen=True)
class ViewStack:
    """Sub-aperture images, views indexed ``[u, v, j, h, ch]``."""

    views: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.views)
        if v.ndim == 4:
            v = v[..., np.newaxis]
        if v.ndim != 5:
            raise ValueError(f"view stack must be 4-D or 5-D, got shape {v.shape}")
        if v.shape[0] != v.shape[1]:
            raise ValueError(f"angular dimensions must be square, got {v.shape[0]}x{v.shape[1]}")
        require_odd_pitch(v.shape[0])
        object.__setattr__(self, "views", v)

    @property
    def dims(self) -> Tuple[int, int, int, int, int]:
        return self.views.shape

    @property
    def pitch(self) -> int:
        return self.views.shape[0]

    @property
    def centroid_index(self) -> int:
        return (self.pitch - 1) // 2

    def view(self, i: int, g: int) -> np.ndarray:
        """Sub-aperture image at signed angular offset ``(i, g)``."""
        c = self.centroid_index
        if not (-c <= i <= c and -c <= g <= c):
            raise IndexError(f"angular offset ({i}, {g}) outside [-{c}, {c}]")
        return self.views[c + i, c + g]

    @property
    def central(self) -> np.ndarray:
        return self.view(0, 0)


def canonical_grid(j_count: int, h_count: int, packing: str = RECTANGULAR,
                   hex_row_phase: int = 0) -> np.ndarray:
    """Unit-pitch, centered, homogenized lattice points, shape (J, H, 3).

    Rectangular lattices place lens ``(j, h)`` at integer offsets; hexagonal
    lattices use a row step of sqrt(3)/2 and shift rows of parity
    ``hex_row_phase`` by +1/2 within the row.  The mean of the lattice is the
    origin and the homogeneous coordinate is 1, so a calibration homography
    applied to this grid carries offset, scale and tilt information alone.
    """
    j_idx, h_idx = np.meshgrid(np.arange(j_count, dtype=np.float64),
                               np.arange(h_count, dtype=np.float64), indexing="ij")
    if packing == HEXAGONAL:
        k = j_idx * (np.sqrt(3.0) / 2.0)
        l = h_idx + 0.5 * ((j_idx.astype(int) % 2) == hex_row_phase)
    elif packing == RECTANGULAR:
        k, l = j_idx, h_idx
    else:
        raise ValueError(f"unknown packing {packing!r}")
    k = k - k.mean()
    l = l - l.mean()
    return np.stack([k, l, np.ones_like(k)], axis=-1)


def apply_homography(points_h: np.ndarray, transform: np.ndarray) -> np.ndarray:
    """Map homogeneous (..., 3) points through a 3x3 matrix and dehomogenize."""
    out = points_h @ np.asarray(transform, dtype=np.float64).T
    return out[..., :2] / out[..., 2:3]


def lf_to_views(lf: LightField4D) -> ViewStack:
    """Rearrange a micro-image array into sub-aperture views.

    ``views[c+i, c+g][j, h] = lf[j, h, c+i, c+g]`` applied in both angular
    directions; a pure permutation of the samples.
    """
    return ViewStack(np.ascontiguousarray(lf.samples.transpose(2, 3, 0, 1, 4)))


def views_to_lf(vs: ViewStack) -> LightField4D:
    """Exact inverse of :func:`lf_to_views`."""
    return LightField4D(np.ascontiguousarray(vs.views.transpose(2, 3, 0, 1, 4)))
