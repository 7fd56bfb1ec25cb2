"""Ground-truth generators: white calibration images and textured plenoptic
scenes, with exact centroid / light-field metadata for oracle tests.

All generators are deterministic under a fixed seed.  Micro images are
rendered as flat-top discs with a smooth cosine rim: blob diameter tracks the
lens pitch, which is what a flat-field capture of touching micro lenses looks
like and what keeps the scale-space pitch estimate physically meaningful.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from typing import Sequence, Tuple

import numpy as np

from plenokit.core import (
    RECTANGULAR,
    CentroidGrid,
    LightField4D,
    ViewStack,
    apply_homography,
    canonical_grid,
    views_to_lf,
)
from plenokit.interp import sample_bilinear


@dataclass
class SynthSpec:
    """Parameters of a synthetic plenoptic capture.

    ``tilt_deg`` is (theta_z, theta_x): in-plane rotation and an out-of-plane
    tilt realized as projective foreshortening along the lens-row axis.
    Vignette strengths are in [0, 1]: per-micro-image cosine-fourth falloff
    and a global image-level falloff.
    """

    pitch: int = 21
    counts: Tuple[int, int] = (5, 5)
    packing: str = RECTANGULAR
    tilt_deg: Tuple[float, float] = (0.0, 0.0)
    vignette_lens: float = 0.0
    vignette_global: float = 0.0
    noise_sigma: float = 0.0
    fill_factor: float = 0.5
    hex_row_phase: int = 0
    seed: int = 0

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "SynthSpec":
        d = dict(d)
        if "counts" in d:
            d["counts"] = tuple(d["counts"])
        if "tilt_deg" in d:
            d["tilt_deg"] = tuple(d["tilt_deg"])
        return cls(**d)


def true_homography(spec: SynthSpec) -> Tuple[np.ndarray, Tuple[int, int]]:
    """Homography taking the canonical unit-pitch grid to sensor coordinates.

    Composition: scale by pitch, rotate by theta_z, foreshorten by theta_x
    (bottom-row term), then translate so the lattice is centered on a canvas
    with a one-pitch margin.
    """
    m = float(spec.pitch)
    tz = np.deg2rad(spec.tilt_deg[0])
    tx = np.deg2rad(spec.tilt_deg[1])
    ca, sa = np.cos(tz), np.sin(tz)
    scale_rot = np.array([[m * ca, -m * sa, 0.0],
                          [m * sa, m * ca, 0.0],
                          [0.0, 0.0, 1.0]])
    j_count = spec.counts[0]
    # w = 1 + p7 * k_tilde: pitch varies by ~tan(theta_x) across the grid rows
    p7 = np.tan(tx) * 2.0 / max(j_count, 2)
    scale_rot[2, 0] = p7
    grid = canonical_grid(*spec.counts, spec.packing, spec.hex_row_phase)
    pos = apply_homography(grid, scale_rot)
    span_k = pos[..., 0].max() - pos[..., 0].min()
    span_l = pos[..., 1].max() - pos[..., 1].min()
    # sensor-like framing: outermost lens centers sit half a pitch from the
    # canvas edge, as if the MLA covered the whole sensor
    margin = (m - 1) / 2.0
    off_k = margin - pos[..., 0].min()
    off_l = margin - pos[..., 1].min()
    t = np.array([[1.0, 0.0, off_k], [0.0, 1.0, off_l], [0.0, 0.0, 1.0]])
    canvas = (int(np.ceil(span_k + m)), int(np.ceil(span_l + m)))
    return t @ scale_rot, canvas


def blob_profile(rho: np.ndarray, pitch: float, fill: float = 0.5) -> np.ndarray:
    """Flat-top disc with a cosine rim, diameter ``fill * pitch``.

    The rim is centered on the nominal radius so the effective blob radius
    stays at fill * pitch / 2 to first order.  The sub-unit fill leaves dark
    gaps between micro images the way aperture vignetting does on a real
    sensor; touching discs would push edge-blob band-pass peaks outward.
    """
    r0 = fill * pitch / 2.0
    w = max(2.0, r0 / 4.0)
    x = np.clip((rho - (r0 - w / 2.0)) / w, 0.0, 1.0)
    return 0.5 * (1.0 + np.cos(np.pi * x))


def synth_white(spec: SynthSpec) -> Tuple[np.ndarray, CentroidGrid]:
    """Render a flat-field white image plus exact sub-pixel truth centroids."""
    transform, (canvas_k, canvas_l) = true_homography(spec)
    grid = canonical_grid(*spec.counts, spec.packing, spec.hex_row_phase)
    centers = apply_homography(grid, transform)
    if (centers[..., 0].min() < 0 or centers[..., 1].min() < 0
            or centers[..., 0].max() >= canvas_k or centers[..., 1].max() >= canvas_l):
        raise ValueError("lens lattice exceeds canvas")

    img = np.zeros((canvas_k, canvas_l), dtype=np.float64)
    m = float(spec.pitch)
    half = int(np.ceil(spec.fill_factor * m / 2.0 + m / 8.0)) + 1
    cg_k = (canvas_k - 1) / 2.0
    cg_l = (canvas_l - 1) / 2.0
    r_glob = np.hypot(cg_k, cg_l)
    for (ck, cl) in centers.reshape(-1, 2):
        k0, k1 = max(0, int(ck) - half), min(canvas_k, int(ck) + half + 1)
        l0, l1 = max(0, int(cl) - half), min(canvas_l, int(cl) + half + 1)
        kk, ll = np.meshgrid(np.arange(k0, k1), np.arange(l0, l1), indexing="ij")
        rho = np.hypot(kk - ck, ll - cl)
        blob = blob_profile(rho, m, spec.fill_factor)
        if spec.vignette_lens > 0:
            local = np.cos(np.clip(rho / (m / 2.0), 0.0, 1.0) * (np.pi / 2.0) * 0.5) ** 4
            blob = blob * (1.0 - spec.vignette_lens * (1.0 - local))
        if spec.vignette_global > 0:
            g = np.cos((np.hypot(kk - cg_k, ll - cg_l) / r_glob) * (np.pi / 2.0) * 0.8) ** 4
            blob = blob * (1.0 - spec.vignette_global * (1.0 - g))
        img[k0:k1, l0:l1] = np.maximum(img[k0:k1, l0:l1], blob)

    if spec.noise_sigma > 0:
        img = add_noise(img, spec.noise_sigma, spec.seed)
    truth = CentroidGrid(centers, packing=spec.packing, hex_row_phase=spec.hex_row_phase)
    return img, truth


def synth_scene(spec: SynthSpec,
                planes: Sequence[Tuple[np.ndarray, float]]) -> Tuple[np.ndarray, LightField4D]:
    """Compose a multi-plane scene into a raw micro-image raster plus truth.

    Each plane is ``(texture, disparity)``: the texture (lens-resolution gray
    image, NaN marks transparency) shifts by ``disparity * (i, g)`` pixels per
    signed view offset.  Later planes paint over earlier ones.  The raw
    raster places micro images on an ideal integer-pitch rectangular lattice
    with optional per-lens vignetting, so a matching `synth_white` capture
    calibrates it exactly.
    """
    if len(planes) == 0:
        raise ValueError("at least one plane required")
    j_count, h_count = spec.counts
    m = spec.pitch
    c = (m - 1) // 2
    max_disp = max(abs(float(d)) for _, d in planes)
    if max_disp * c > min(j_count, h_count) / 2.0:
        import warnings
        warnings.warn("plane disparity large relative to field size")

    views = np.zeros((m, m, j_count, h_count, 1), dtype=np.float64)
    jj, hh = np.meshgrid(np.arange(j_count, dtype=np.float64),
                         np.arange(h_count, dtype=np.float64), indexing="ij")
    for u in range(m):
        for v in range(m):
            i, g = u - c, v - c
            canvas = None
            for tex, disp in planes:
                tex = np.asarray(tex, dtype=np.float64)
                mask = np.isfinite(tex)
                filled = np.where(mask, tex, 0.0)
                rows = jj + disp * i
                cols = hh + disp * g
                vals = sample_bilinear(filled, rows, cols)
                cover = sample_bilinear(mask.astype(np.float64), rows, cols) > 0.5
                if canvas is None:
                    canvas = vals
                else:
                    canvas = np.where(cover, vals, canvas)
            views[u, v, :, :, 0] = canvas
    vs = ViewStack(views)
    lf = views_to_lf(vs)

    raw = np.zeros((j_count * m, h_count * m), dtype=np.float64)
    uu, vv = np.meshgrid(np.arange(m), np.arange(m), indexing="ij")
    rho = np.hypot(uu - c, vv - c)
    vign = 1.0
    if spec.vignette_lens > 0:
        local = np.cos(np.clip(rho / (m / 2.0), 0.0, 1.0) * (np.pi / 2.0) * 0.5) ** 4
        vign = 1.0 - spec.vignette_lens * (1.0 - local)
    for j in range(j_count):
        for h in range(h_count):
            raw[j * m:(j + 1) * m, h * m:(h + 1) * m] = lf.samples[j, h, :, :, 0] * vign
    if spec.noise_sigma > 0:
        raw = add_noise(raw, spec.noise_sigma, spec.seed)
    return raw, lf


def scene_calibration_spec(spec: SynthSpec) -> SynthSpec:
    """White-image spec matching the lattice used by :func:`synth_scene`."""
    return SynthSpec(pitch=spec.pitch, counts=spec.counts, packing=RECTANGULAR,
                     tilt_deg=(0.0, 0.0), vignette_lens=spec.vignette_lens,
                     seed=spec.seed)


def add_noise(img: np.ndarray, sigma: float, seed: int = 0) -> np.ndarray:
    """Additive i.i.d. Gaussian noise, deterministic per seed, no clamping."""
    if sigma < 0:
        raise ValueError("noise sigma must be non-negative")
    if sigma == 0:
        return img
    rng = np.random.default_rng(seed)
    return img + rng.normal(0.0, sigma, size=img.shape)


def smooth_texture(shape: Tuple[int, int], seed: int = 0, smooth: float = 2.0,
                   low: float = 0.1, high: float = 0.9) -> np.ndarray:
    """Seeded band-limited random texture in [low, high]; handy test content."""
    from scipy import ndimage

    rng = np.random.default_rng(seed)
    t = rng.random(shape)
    if smooth > 0:
        t = ndimage.gaussian_filter(t, smooth)
    t = t - t.min()
    if t.max() > 0:
        t = t / t.max()
    return low + (high - low) * t
