"""Sensor-level correction, rotational alignment and resampling of raw
captures into aligned 4-D light-fields."""

from plenokit.align.sensor import BayerImage, remove_cfa_outliers, demosaic, mosaic
from plenokit.align.vignette import VignetteFit, devignette_divide, devignette_fit
from plenokit.align.geometry import (
    estimate_rotation,
    apply_rotation,
    resample_global,
    resample_local,
)

__all__ = [
    "BayerImage", "remove_cfa_outliers", "demosaic", "mosaic",
    "VignetteFit", "devignette_divide", "devignette_fit",
    "estimate_rotation", "apply_rotation", "resample_global", "resample_local",
]
