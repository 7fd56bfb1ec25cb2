"""White-image calibration: pitch estimation, centroid detection and
refinement, lattice sorting and global projective grid fitting."""

from plenokit.calibrate.pitch import ScaleSpacePyramid, estimate_pitch
from plenokit.calibrate.centroids import extract_centroids, refine_centroids
from plenokit.calibrate.sorting import PackingReport, sort_centroids
from plenokit.calibrate.gridfit import GridFitState, fit_grid

__all__ = [
    "ScaleSpacePyramid", "estimate_pitch",
    "extract_centroids", "refine_centroids",
    "PackingReport", "sort_centroids",
    "GridFitState", "fit_grid",
]
