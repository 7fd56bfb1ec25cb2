"""Lattice recovery: packing classification by neighbor angles and
row-by-row index assignment of unordered centroids."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import numpy as np
from scipy.spatial import cKDTree

from plenokit.core import HEXAGONAL, RECTANGULAR, CentroidGrid, PipelineError

log = logging.getLogger(__name__)

MAJORITY = 0.6
N_REFERENCES = 25  # neighbor sets pooled over this many central centroids


@dataclass
class PackingReport:
    packing: str
    neighbor_count: int
    pitch_estimate: float
    angle_votes: Dict[int, int] = field(default_factory=dict)


def _merge_duplicates(points: np.ndarray, radius: float) -> np.ndarray:
    """Average together clusters of points closer than ``radius``."""
    tree = cKDTree(points)
    pairs = tree.query_pairs(radius, output_type="ndarray")
    if len(pairs) == 0:
        return points
    from scipy.sparse import coo_matrix
    from scipy.sparse.csgraph import connected_components

    n = len(points)
    graph = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n))
    n_comp, labels = connected_components(graph, directed=False)
    merged = np.empty((n_comp, 2), dtype=np.float64)
    for comp in range(n_comp):
        merged[comp] = points[labels == comp].mean(axis=0)
    return merged


def _neighbor_vectors(points: np.ndarray, pitch: float, image_dims) -> np.ndarray:
    """Pooled difference vectors inside the [pitch/2, 3*pitch/2] distance band."""
    center = np.array([(image_dims[0] - 1) / 2.0, (image_dims[1] - 1) / 2.0])
    order = np.argsort(np.linalg.norm(points - center, axis=1))
    refs = points[order[:min(N_REFERENCES, len(points))]]
    tree = cKDTree(points)
    vectors: List[np.ndarray] = []
    for ref in refs:
        idx = tree.query_ball_point(ref, 1.5 * pitch)
        diffs = points[idx] - ref
        dist = np.linalg.norm(diffs, axis=1)
        keep = (dist > 0.5 * pitch) & (dist < 1.5 * pitch)
        vectors.append(diffs[keep])
    if not vectors:
        return np.empty((0, 2))
    return np.concatenate(vectors, axis=0)


def _angle_bins(vectors: np.ndarray) -> np.ndarray:
    """Angle of each vector to the 45-degree reference, folded to [0, pi/4].

    The fold uses the lattice's reflection symmetries, so hexagonal
    neighbors land in bin 1 (15 deg) and 3 (45 deg) while rectangular
    neighbors land in 0 (diagonals) and 3 (axes).
    """
    ref = np.array([1.0, 1.0]) / np.sqrt(2.0)
    norm = np.linalg.norm(vectors, axis=1)
    cosa = np.clip((vectors @ ref) / np.where(norm == 0, 1.0, norm), -1.0, 1.0)
    alpha = np.arccos(cosa)
    alpha = np.minimum(alpha, np.pi - alpha)            # fold to [0, 90 deg]
    alpha = np.minimum(alpha, np.pi / 2.0 - alpha)      # fold to [0, 45 deg]
    return np.rint(alpha * 12.0 / np.pi).astype(int)


def classify_packing(vectors: np.ndarray) -> Tuple[str, Dict[int, int]]:
    bins = _angle_bins(vectors)
    votes = {int(b): int(c) for b, c in zip(*np.unique(bins, return_counts=True))}
    hex_votes = votes.get(1, 0)
    # bin 0: lattice diagonals; bin 2 is the 22.5-degree boundary,
    # tie-broken toward rectangular; bin 3 (axes) occurs in both packings
    rect_votes = votes.get(0, 0) + votes.get(2, 0)
    total = hex_votes + rect_votes
    if total == 0:
        raise PipelineError("packing vote empty (no angled neighbors)", stage="sort")
    if hex_votes >= MAJORITY * total:
        return HEXAGONAL, votes
    if rect_votes >= MAJORITY * total:
        return RECTANGULAR, votes
    raise PipelineError(
        f"ambiguous packing vote: hexagonal={hex_votes}, rectangular={rect_votes}",
        stage="sort")


def _pick(points: np.ndarray, mask: np.ndarray, expect: np.ndarray) -> int | None:
    """Index of the masked point nearest to the expected location."""
    idx = np.flatnonzero(mask)
    if len(idx) == 0:
        return None
    d = np.linalg.norm(points[idx] - expect, axis=1)
    return int(idx[np.argmin(d)])


def sort_centroids(points: np.ndarray, image_dims: Tuple[int, int]) -> Tuple[CentroidGrid, PackingReport]:
    """Assign 2-D lattice indices to an unordered centroid set.

    The column count is first approximated from the sensor aspect ratio
    (H = sqrt(N * L / K)), giving a pitch estimate L / H that scales the
    duplicate-merge radius and the neighbor band.  Packing is voted from
    neighbor angles; rows are then walked from the most upper-left centroid
    (minimum distance to the origin) with search windows of half-pitch
    tolerance, swapping the window axes for the row-advance direction.
    """
    points = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if len(points) < 4:
        raise PipelineError("need at least 4 centroids", stage="sort")
    dims_k, dims_l = float(image_dims[0]), float(image_dims[1])

    h_est = np.sqrt(len(points) * dims_l / dims_k)
    pitch_est = dims_l / h_est
    points = _merge_duplicates(points, pitch_est / 2.0)

    h_est = np.sqrt(len(points) * dims_l / dims_k)
    pitch_est = dims_l / h_est
    vectors = _neighbor_vectors(points, pitch_est, (dims_k, dims_l))
    packing, votes = classify_packing(vectors)

    # measured within-band spacing is steadier than L/H under cropping
    dist = np.linalg.norm(vectors, axis=1)
    d_m = float(np.median(dist)) if len(dist) else pitch_est
    row_step = d_m * (np.sqrt(3.0) / 2.0) if packing == HEXAGONAL else d_m
    col_tol = 0.75 * d_m if packing == HEXAGONAL else 0.5 * d_m

    start = int(np.argmin(np.linalg.norm(points, axis=1)))
    rows: List[List[int]] = []
    row_start = start
    used = np.zeros(len(points), dtype=bool)
    while row_start is not None:
        row = [row_start]
        used[row_start] = True
        while True:
            cur = points[row[-1]]
            dk = points[:, 0] - cur[0]
            dl = points[:, 1] - cur[1]
            mask = (~used) & (dk > -d_m / 2) & (dk < d_m / 2) & (dl > d_m / 2) & (dl < 3 * d_m / 2)
            nxt = _pick(points, mask, cur + np.array([0.0, d_m]))
            if nxt is None:
                break
            row.append(nxt)
            used[nxt] = True
        rows.append(row)
        head = points[row[0]]
        dk = points[:, 0] - head[0]
        dl = points[:, 1] - head[1]
        mask = (~used) & (dk > row_step / 2) & (dk < 3 * row_step / 2) & (dl > -col_tol) & (dl < col_tol)
        idx = np.flatnonzero(mask)
        # hexagonal row heads sit +-d/2 from the previous head; the leftmost
        # band member is the true head either way
        row_start = int(idx[np.argmin(points[idx, 1])]) if len(idx) else None
        if row_start is not None:
            used[row_start] = True

    lengths = np.array([len(r) for r in rows])
    if lengths.max() - lengths.min() > 1:
        raise PipelineError(
            f"inconsistent lattice: row lengths {lengths.min()}..{lengths.max()}",
            stage="sort")
    h_count = int(lengths.min())
    if lengths.max() != lengths.min():
        log.warning("sort_centroids: truncating rows to %d columns", h_count)
    entries = np.array([[points[i] for i in row[:h_count]] for row in rows])

    phase = 0
    if packing == HEXAGONAL and len(rows) >= 2:
        mean_l = entries[:, :, 1].mean(axis=1)
        even = mean_l[0::2].mean()
        odd = mean_l[1::2].mean()
        phase = 1 if odd > even else 0

    grid = CentroidGrid(entries, packing=packing, hex_row_phase=phase)
    report = PackingReport(packing=packing, neighbor_count=len(vectors),
                           pitch_estimate=pitch_est, angle_votes=votes)
    return grid, report
