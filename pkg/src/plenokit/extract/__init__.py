"""Sub-aperture view processing: hexagonal fringe removal and
color/illumination equalization across the view stack."""

from plenokit.extract.hexfix import FringeMask, correct_hex_artifacts
from plenokit.extract.histogram import hist_match
from plenokit.extract.transfer import ColorStats, color_stats, mkl_transfer
from plenokit.extract.equalize import equalize_colors, align_dynamic_range

__all__ = [
    "FringeMask", "correct_hex_artifacts",
    "hist_match",
    "ColorStats", "color_stats", "mkl_transfer",
    "equalize_colors", "align_dynamic_range",
]
