"""Linear color transfer between correlated-channel Gaussian models.

The closed-form optimal transport map between two zero-mean Gaussians is
M = S^-1/2 (S^1/2 T S^1/2)^1/2 S^-1/2 for source covariance S and target
covariance T; pixels move as t(x) = M (x - mu_src) + mu_tgt.  An analytic
pseudo-inverse variant on paired samples is kept for parity testing.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

COV_REG = 1e-8
EIG_FLOOR = 1e-10


@dataclass
class ColorStats:
    """Channel means and covariance; ``samples`` (C, N) kept only when the
    data-shaped analytic transfer is wanted."""

    mu: np.ndarray
    sigma: np.ndarray
    samples: Optional[np.ndarray] = None


def color_stats(img: np.ndarray, keep_samples: bool = False) -> ColorStats:
    img = np.asarray(img)
    flat = img.reshape(-1, img.shape[-1]) if img.ndim == 3 else img.reshape(-1, 1)
    mu = flat.mean(axis=0, dtype=np.float64)
    centered = flat - mu
    sigma = (centered.T @ centered) / max(flat.shape[0] - 1, 1)
    return ColorStats(mu, np.asarray(sigma, dtype=np.float64),
                      flat.T.astype(np.float64) if keep_samples else None)


def _sym_power(mat: np.ndarray, power: float) -> np.ndarray:
    vals, vecs = np.linalg.eigh(mat)
    vals = np.clip(vals, EIG_FLOOR, None)
    return (vecs * vals ** power) @ vecs.T


def transfer_matrix(sigma_src: np.ndarray, sigma_tgt: np.ndarray) -> np.ndarray:
    """Closed-form Monge-Kantorovich map between covariances."""
    s = np.asarray(sigma_src) + COV_REG * np.eye(len(sigma_src))
    t = np.asarray(sigma_tgt) + COV_REG * np.eye(len(sigma_tgt))
    root = _sym_power(s, 0.5)
    inv_root = _sym_power(s, -0.5)
    return inv_root @ _sym_power(root @ t @ root, 0.5) @ inv_root


def analytic_matrix(src: ColorStats, tgt: ColorStats) -> np.ndarray:
    """Data-shaped pseudo-inverse solution; requires paired samples."""
    if src.samples is None or tgt.samples is None:
        raise ValueError("analytic transfer needs sample matrices on both stats")
    if src.samples.shape != tgt.samples.shape:
        raise ValueError("analytic transfer needs paired samples of equal shape")
    s_inv = np.linalg.inv(src.sigma + COV_REG * np.eye(len(src.sigma)))
    t_inv = np.linalg.inv(tgt.sigma + COV_REG * np.eye(len(tgt.sigma)))
    z = (tgt.samples - tgt.mu[:, None]).T @ t_inv
    r = (src.samples - src.mu[:, None]).T @ s_inv
    return np.linalg.pinv(z) @ r


def mkl_transfer(src: np.ndarray, tgt_stats: ColorStats, method: str = "mkl") -> np.ndarray:
    """Transfer an image's color distribution toward the target statistics."""
    if not (np.all(np.isfinite(tgt_stats.mu)) and np.all(np.isfinite(tgt_stats.sigma))):
        raise ValueError("non-finite target covariance")
    img = np.asarray(src)
    stats = color_stats(img, keep_samples=(method == "analytic"))
    if method == "mkl":
        m = transfer_matrix(stats.sigma, tgt_stats.sigma)
    elif method == "analytic":
        m = analytic_matrix(stats, tgt_stats)
    else:
        raise ValueError(f"unknown transfer method {method!r}")
    shape = img.shape
    flat = img.reshape(-1, shape[-1]) if img.ndim == 3 else img.reshape(-1, 1)
    moved = (flat - stats.mu) @ m.T + tgt_stats.mu
    return moved.reshape(shape)
