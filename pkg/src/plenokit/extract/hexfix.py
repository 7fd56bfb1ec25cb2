"""Zipper-fringe detection and repair for views from hexagonal resampling.

The shift-and-stretch conversion displaces every other view row by half a
lens pitch, which shows up as zipper artifacts along edges crossing the
shift direction.  Affected pixels are found by comparing shifted rows
against their unshifted neighbors (discounting genuine vertical structure
via the row-to-row derivative), gated by a threshold and a minimum run
length along the row, then replaced by the mean of the adjacent unshifted
rows.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from plenokit.core import as_image

MIN_RUN = 4


@dataclass
class FringeMask:
    """Flag mask over de-interlaced (shifted) rows plus their row indices."""

    mask: np.ndarray          # (n_shifted_rows, L) bool
    rows: np.ndarray          # full-view row index per mask row
    threshold: float
    min_run: int = MIN_RUN

    def to_full(self, shape: Tuple[int, int]) -> np.ndarray:
        full = np.zeros(shape[:2], dtype=bool)
        full[self.rows] = self.mask
        return full


def _drop_short_runs(mask: np.ndarray, min_run: int) -> np.ndarray:
    """Keep only horizontal runs of at least ``min_run`` flagged pixels."""
    out = np.zeros_like(mask)
    for r in range(mask.shape[0]):
        row = mask[r]
        edges = np.flatnonzero(np.diff(np.concatenate(([0], row.view(np.int8), [0]))))
        for start, stop in zip(edges[0::2], edges[1::2]):
            if stop - start >= min_run:
                out[r, start:stop] = True
    return out


def correct_hex_artifacts(view: np.ndarray, threshold: float | None = None,
                          shifted_parity: int = 1) -> Tuple[np.ndarray, FringeMask]:
    """Detect and repair zipper fringes in one sub-aperture view.

    ``threshold`` defaults to a tenth of the view's dynamic range.  Rows of
    parity ``shifted_parity`` are treated as the shifted set.  Only pixels
    inside the returned mask are modified; their replacement is the mean of
    the vertically adjacent unshifted rows.
    """
    view = as_image(view)
    work = view.mean(axis=2) if view.ndim == 3 else view
    if threshold is None:
        threshold = 0.1 * float(work.max() - work.min())
    if threshold <= 0:
        threshold = np.inf  # constant view: nothing can exceed it

    shifted_rows = np.arange(shifted_parity, work.shape[0], 2)
    plain_rows = np.arange(1 - shifted_parity, work.shape[0], 2)
    # pair each shifted row with the unshifted row above it
    usable = shifted_rows[(shifted_rows - 1) >= 0]
    mask = np.zeros((len(shifted_rows), work.shape[1]), dtype=bool)
    for i, r in enumerate(shifted_rows):
        if r - 1 < 0:
            continue
        upper = work[r - 1]
        diff = work[r] - upper
        # genuine vertical structure: derivative across the unshifted rows
        lower_plain = work[r + 1] if r + 1 < work.shape[0] else upper
        deriv = lower_plain - upper
        v_bar = np.abs(diff) - np.abs(deriv)
        mask[i] = v_bar > threshold
    mask = _drop_short_runs(mask, MIN_RUN)

    out = view.copy()
    for i, r in enumerate(shifted_rows):
        cols = np.flatnonzero(mask[i])
        if len(cols) == 0:
            continue
        above = view[max(r - 1, 0)]
        below = view[min(r + 1, view.shape[0] - 1)]
        out[r, cols] = 0.5 * (above[cols] + below[cols])
    fringe = FringeMask(mask, shifted_rows, float(threshold))
    return out, fringe
