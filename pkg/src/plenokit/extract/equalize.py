"""View-stack color equalization toward the central view.

Every off-center view is mapped directly onto the central view's intensity
distribution.  The compound scheme runs channel-wise histogram matching,
then the closed-form Gaussian transport, then histogram matching again:
the outer HM stages fix the marginals the covariance transport cannot.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from plenokit.core import ViewStack
from plenokit.metrics import HIST_BINS, channel_histogram
from plenokit.extract.histogram import hist_match
from plenokit.extract.transfer import color_stats, mkl_transfer

log = logging.getLogger(__name__)

SCHEMES = ("hm", "mkl", "hm-mkl-hm")
RANGE_PERCENTILES = (0.005, 99.9)


def _match_channels(img: np.ndarray, target_cdfs: list) -> np.ndarray:
    out = np.empty_like(img)
    for ch in range(img.shape[-1]):
        out[..., ch] = hist_match(img[..., ch], target_cdfs[ch])
    return out


def equalize_colors(vs: ViewStack, scheme: str = "hm-mkl-hm",
                    threads: int = 1) -> ViewStack:
    """Equalize all views toward the central view; the central view itself
    passes through bit-exact.  Pure per-pixel intensity mapping: parallax is
    untouched."""
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; pick one of {SCHEMES}")
    views = vs.views
    c = vs.centroid_index
    central = views[c, c]
    target_cdfs = [channel_histogram(central[..., ch], HIST_BINS)[1]
                   for ch in range(central.shape[-1])]
    target_stats = color_stats(central)

    def process(uv):
        u, v = uv
        if u == c and v == c:
            return central.copy()
        view = views[u, v]
        if scheme == "hm":
            return _match_channels(view, target_cdfs)
        if scheme == "mkl":
            return mkl_transfer(view, target_stats)
        step = _match_channels(view, target_cdfs)
        step = mkl_transfer(step, target_stats)
        return _match_channels(step, target_cdfs)

    pitch = vs.pitch
    coords = [(u, v) for u in range(pitch) for v in range(pitch)]
    out = np.empty_like(views)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for (u, v), res in zip(coords, pool.map(process, coords)):
                out[u, v] = res
    else:
        # stream results straight into the output: buffering a full stack
        # of float64 views would double the peak footprint
        for u, v in coords:
            out[u, v] = process((u, v))
    return ViewStack(out)


def align_dynamic_range(vs: ViewStack) -> ViewStack:
    """Affine rescale of all views from the central view's extreme
    percentiles (0.005 and 99.9) to [0, 1]; gamma stays an export concern."""
    central = vs.views[vs.centroid_index, vs.centroid_index]
    lo, hi = np.percentile(central, RANGE_PERCENTILES)
    if hi - lo < 1e-12:
        log.warning("align_dynamic_range: degenerate percentile span, identity")
        return vs
    return ViewStack((vs.views - lo) / (hi - lo))
