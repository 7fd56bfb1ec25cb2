"""Shared fixtures and the staged-calibration harness used across tests."""

import numpy as np
import pytest

from plenokit.calibrate import (
    estimate_pitch,
    extract_centroids,
    fit_grid,
    refine_centroids,
    sort_centroids,
)
from plenokit.calibrate.centroids import log_response
from plenokit.metrics import deviation_unordered
from plenokit.synth import SynthSpec, synth_white


def staged_deviations(spec: SynthSpec, beta: float = 0.0, refine_mode: str = "area"):
    """Per-stage truth deviations: extractor, refiner, sorter, fitter."""
    img, truth = synth_white(spec)
    sigma, pitch, _ = estimate_pitch(img)
    seeds = extract_centroids(img, sigma)
    refined = refine_centroids(log_response(img, sigma), seeds, pitch, mode=refine_mode)
    grid, _ = sort_centroids(refined, img.shape)
    model, state = fit_grid(grid, pitch, beta=beta)
    tpts = truth.points
    assert grid.entries.shape == truth.entries.shape, "sorter lost lenses"
    return {
        "extractor": deviation_unordered(tpts, seeds),
        "refiner": deviation_unordered(tpts, refined),
        "sorter": float(np.mean(np.linalg.norm(grid.entries - truth.entries, axis=-1))),
        "fitter": float(np.mean(np.linalg.norm(state.fitted.entries - truth.entries, axis=-1))),
        "model": model,
        "truth": truth,
    }


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20260808)
