"""Global projective grid regression with Levenberg-Marquardt.

The sorted centroid grid is compared against a canonical unit-pitch lattice
mapped through a 3x3 homography (last entry pinned to 1, eight free
parameters).  The per-lens cost is the Euclidean distance plus an optional
regularizer that counteracts the inward centroid bias caused by asymmetric
vignetting of off-center micro images.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np

from plenokit.core import CalibModel, CentroidGrid, PipelineError, canonical_grid

M_HAT = 20.0            # micro image size divider gating the regularizer
MU_INIT = 1e-3
MU_FACTOR = 10.0
MAX_ITER = 100
REL_TOL = 1e-9
MAX_REJECTIONS = 10
SMOOTH_EPS = 1e-12      # keeps the per-lens norm differentiable at zero


@dataclass
class GridFitState:
    p: np.ndarray                      # 9-vector, p[8] == 1
    residuals: np.ndarray              # per-lens distances, (J, H)
    beta: float
    mu: float
    iterations: int
    history: List[float] = field(default_factory=list)
    fitted: CentroidGrid | None = None  # homography-regenerated lattice


def _project(p: np.ndarray, grid_h: np.ndarray) -> np.ndarray:
    P = np.append(p, 1.0).reshape(3, 3)
    proj = grid_h @ P.T
    return proj[:, :2] / proj[:, 2:3]


def _cost_vector(p: np.ndarray, grid_h: np.ndarray, measured: np.ndarray,
                 beta: float, pitch: float) -> np.ndarray:
    """Residual vector whose sum of squares the LM step minimizes.

    Without regularization the per-lens distances decompose into the
    coordinate deltas (same sum of squares, smooth at an exact fit, which
    keeps the numeric Jacobian meaningful near zero residual).  With
    regularization the per-lens form ||c_bar - c_hat|| + beta * R is used
    directly.
    """
    est = _project(p, grid_h)
    delta = (measured - est).ravel()
    if beta == 0.0:
        return delta
    # vignetting pulls measured off-center centroids toward the image
    # center; the regularizer is a per-coordinate hinge that goes silent
    # once the prediction sits at least pitch / M_HAT outside the
    # measurement, nudging the fitted lattice back outward.
    center = np.array([p[2], p[5]])
    d_bar = np.abs(measured - center) - np.abs(est - center)
    reg = beta * np.clip(d_bar + pitch / M_HAT, 0.0, None).ravel()
    return np.concatenate([delta, reg])


def _affine_init(grid_h: np.ndarray, measured: np.ndarray) -> np.ndarray:
    sol_k, *_ = np.linalg.lstsq(grid_h, measured[:, 0], rcond=None)
    sol_l, *_ = np.linalg.lstsq(grid_h, measured[:, 1], rcond=None)
    return np.array([sol_k[0], sol_k[1], sol_k[2],
                     sol_l[0], sol_l[1], sol_l[2], 0.0, 0.0])


def _jacobian(p: np.ndarray, grid_h: np.ndarray, measured: np.ndarray,
              beta: float, pitch: float) -> np.ndarray:
    """Central-difference Jacobian of the cost vector, step 1e-6 * max(1, |p_i|)."""
    n = len(p)
    base_len = len(_cost_vector(p, grid_h, measured, beta, pitch))
    jac = np.empty((base_len, n))
    for i in range(n):
        step = 1e-6 * max(1.0, abs(p[i]))
        hi, lo = p.copy(), p.copy()
        hi[i] += step
        lo[i] -= step
        jac[:, i] = (_cost_vector(hi, grid_h, measured, beta, pitch)
                     - _cost_vector(lo, grid_h, measured, beta, pitch)) / (2 * step)
    return jac


def fit_grid(grid: CentroidGrid, pitch: int, beta: float = 0.0
             ) -> Tuple[CalibModel, GridFitState]:
    """Fit a homography from the canonical lattice onto the sorted centroids.

    ``beta = 0`` disables the vignetting regularizer.  Convergence is a
    relative residual-sum change below 1e-9 on an accepted step, capped at
    100 iterations; ten consecutive rejected damping escalations raise an
    error carrying the last state.
    """
    if beta < 0:
        raise ValueError("beta must be non-negative")
    j_count, h_count = grid.counts
    grid_h = canonical_grid(j_count, h_count, grid.packing, grid.hex_row_phase).reshape(-1, 3)
    measured = grid.points

    p = _affine_init(grid_h, measured)
    f = _cost_vector(p, grid_h, measured, beta, pitch)
    cost = float(f @ f)
    history = [cost]
    mu = MU_INIT
    iterations = 0
    rejections = 0

    while iterations < MAX_ITER:
        iterations += 1
        jac = _jacobian(p, grid_h, measured, beta, pitch)
        jtj = jac.T @ jac
        grad = jac.T @ f
        damp = np.diag(np.clip(np.diag(jtj), 1e-12, None))
        try:
            step = np.linalg.solve(jtj + mu * damp, grad)
        except np.linalg.LinAlgError:
            raise PipelineError("grid fit normal equations singular", stage="fit")
        p_new = p - step
        f_new = _cost_vector(p_new, grid_h, measured, beta, pitch)
        cost_new = float(f_new @ f_new)
        if cost_new < cost:
            rel_change = (cost - cost_new) / max(cost, 1e-300)
            p, f, cost = p_new, f_new, cost_new
            history.append(cost)
            mu = max(mu / MU_FACTOR, 1e-12)
            rejections = 0
            if rel_change < REL_TOL:
                break
        else:
            mu *= MU_FACTOR
            rejections += 1
            if rejections >= MAX_REJECTIONS:
                # damping saturated: residual can no longer be reduced
                if cost <= history[0]:
                    break
                state = GridFitState(np.append(p, 1.0), f.reshape(j_count, h_count),
                                     beta, mu, iterations, history)
                raise PipelineError(
                    f"grid fit diverged after {rejections} damping escalations "
                    f"(residual {cost:.3g})", stage="fit") from None

    P = np.append(p, 1.0).reshape(3, 3)
    fitted = _project(p, grid_h).reshape(j_count, h_count, 2)
    fitted_grid = CentroidGrid(fitted, packing=grid.packing,
                               hex_row_phase=grid.hex_row_phase)
    residuals = np.linalg.norm(grid.entries - fitted, axis=2)
    state = GridFitState(np.append(p, 1.0), residuals, beta, mu, iterations,
                         history, fitted=fitted_grid)
    # the model keeps the measured grid: local resampling honors per-lens
    # deviations, which the homography reproduces within the fit residual
    model = CalibModel(
        pitch=pitch,
        packing=grid.packing,
        counts=(j_count, h_count),
        homography=P,
        rotation=0.0,
        grid=grid,
        fit_residual=float(residuals.mean()),
    )
    return model, state
