"""Plenoptic camera decoding toolkit.

Turns raw plenoptic captures into calibrated 4-D light-fields, sub-aperture
view stacks, color-equalized views and computationally refocused images.
Every stage is verifiable against synthetic ground truth (see
:mod:`plenokit.synth`) and a metric suite (:mod:`plenokit.metrics`).
"""

__version__ = "0.1.0"

from plenokit.core import LightField4D, ViewStack, CentroidGrid, CalibModel

__all__ = ["LightField4D", "ViewStack", "CentroidGrid", "CalibModel", "__version__"]
