"""Pipeline orchestration: the operations behind the service endpoints and
CLI subcommands.  Every run writes a manifest (config echo, stage wall
times, library version); all artifacts are deterministic for equal inputs,
so reruns are byte-identical apart from the timing entries.
"""

from __future__ import annotations

import csv
import json
import time
from contextlib import contextmanager
from pathlib import Path
from typing import Optional

import numpy as np

from plenokit import __version__
from plenokit.core import (
    HEXAGONAL,
    CalibModel,
    PipelineError,
    ViewStack,
    lf_to_views,
)
from plenokit import io as pio
from plenokit.align import (
    BayerImage,
    apply_rotation,
    demosaic,
    devignette_divide,
    devignette_fit,
    estimate_rotation,
    remove_cfa_outliers,
    resample_global,
    resample_local,
)
from plenokit.calibrate import (
    estimate_pitch,
    extract_centroids,
    fit_grid,
    refine_centroids,
    sort_centroids,
)
from plenokit.calibrate.centroids import log_response
from plenokit.config import (
    CalibrateRequest,
    CalibrateResult,
    DecodeRequest,
    DecodeResult,
    MetricsRequest,
    MetricsResult,
    MetricsRow,
    RenderRequest,
    RenderResult,
    SynthRequest,
    SynthResult,
)
from plenokit.extract import align_dynamic_range, correct_hex_artifacts, equalize_colors
from plenokit.metrics import (
    SharpnessConfig,
    deviation_unordered,
    hist_distance_d2,
    psnr,
    sharpness,
    wasserstein_w1_channels,
)
from plenokit.render import RefocusParams, ScheimpflugParams, refocus, refocus_refined, scheimpflug
from plenokit.synth import SynthSpec, smooth_texture, synth_scene, synth_white


class _Timer:
    def __init__(self):
        self.stages = {}

    @contextmanager
    def stage(self, name: str):
        t0 = time.perf_counter()
        yield
        self.stages[name] = round(time.perf_counter() - t0, 4)


def _write_manifest(out_dir: Path, command: str, config: dict, timings: dict) -> Path:
    manifest = {
        "command": command,
        "config": config,
        "timings_sec": timings,
        "version": __version__,
    }
    path = out_dir / f"{command}_manifest.json"
    path.write_text(json.dumps(manifest, sort_keys=True, indent=1))
    return path


def run_synth(req: SynthRequest) -> SynthResult:
    out_dir = Path(req.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    spec = SynthSpec(**req.spec.model_dump())
    if req.kind == "white":
        img, truth = synth_white(spec)
        truth_payload = {
            "kind": "white",
            "spec": req.spec.model_dump(),
            "centroids": [[float(k), float(l)] for k, l in truth.points],
            "J": truth.counts[0], "H": truth.counts[1],
            "packing": truth.packing, "hex_row_phase": truth.hex_row_phase,
        }
    else:
        planes = [(smooth_texture(spec.counts, seed=s), d) for s, d in req.planes]
        img, lf = synth_scene(spec, planes)
        truth_payload = {
            "kind": "scene",
            "spec": req.spec.model_dump(),
            "planes": [[s, d] for s, d in req.planes],
        }
    image_path = pio.save_image(out_dir / f"{req.name}.png", np.clip(img, 0, 1),
                                bit_depth=16, encode_srgb=False)
    if req.kind == "scene":
        np.savez_compressed(out_dir / f"{req.name}_truth.npz",
                            field=lf.samples.astype(np.float32))
    truth_path = out_dir / f"{req.name}_truth.json"
    truth_path.write_text(json.dumps(truth_payload, sort_keys=True, indent=1))
    return SynthResult(image_path=str(image_path), truth_path=str(truth_path),
                       dims=(img.shape[0], img.shape[1]))


def calibrate_stages(white: np.ndarray, beta: float = 0.0, refine_mode: str = "area"):
    """Run the calibration chain, returning the model plus stage artifacts."""
    timer = _Timer()
    with timer.stage("pitch"):
        sigma_star, pitch, pyramid = estimate_pitch(white)
    with timer.stage("extract"):
        seeds = extract_centroids(white, sigma_star)
    with timer.stage("refine"):
        resp = log_response(white, sigma_star)
        refined = refine_centroids(resp, seeds, pitch, mode=refine_mode)
    with timer.stage("sort"):
        grid, report = sort_centroids(refined, white.shape[:2])
    with timer.stage("fit"):
        model, state = fit_grid(grid, pitch, beta=beta)
    with timer.stage("rotation"):
        theta = estimate_rotation(state.fitted)
    model = CalibModel(pitch=model.pitch, packing=model.packing, counts=model.counts,
                       homography=model.homography, rotation=theta, grid=model.grid,
                       fit_residual=model.fit_residual)
    return model, {
        "seeds": seeds, "refined": refined, "grid": grid, "state": state,
        "report": report, "sigma_star": sigma_star, "pyramid": pyramid,
        "timings": timer.stages,
    }


def run_calibrate(req: CalibrateRequest) -> CalibrateResult:
    white = pio.load_image(req.white_path, assume_srgb=(False if req.linear else None),
                           as_gray=True)
    model, arts = calibrate_stages(white, beta=req.beta, refine_mode=req.refine_mode)
    out_path = Path(req.out_path) if req.out_path else Path(req.white_path).with_suffix(".calib.json")
    pio.save_calib(out_path, model)

    deviations = None
    if req.truth_path:
        truth = json.loads(Path(req.truth_path).read_text())
        tpts = np.asarray(truth["centroids"], dtype=np.float64)
        deviations = {
            "extractor": deviation_unordered(tpts, arts["seeds"]),
            "refiner": deviation_unordered(tpts, arts["refined"]),
        }
        tgrid = tpts.reshape(truth["J"], truth["H"], 2)
        if arts["grid"].entries.shape == tgrid.shape:
            deviations["sorter"] = float(np.mean(np.linalg.norm(arts["grid"].entries - tgrid, axis=-1)))
            deviations["fitter"] = float(np.mean(np.linalg.norm(arts["state"].fitted.entries - tgrid, axis=-1)))
    _write_manifest(out_path.parent, "calibrate", req.model_dump(), arts["timings"])
    return CalibrateResult(
        calib_path=str(out_path), pitch=model.pitch, packing=model.packing,
        counts=model.counts, fit_residual=model.fit_residual,
        rotation_rad=model.rotation, stage_deviations=deviations,
        timings=arts["timings"])


def decode_field(raw: np.ndarray, calib: CalibModel, req: DecodeRequest,
                 white: Optional[np.ndarray] = None, timer: Optional[_Timer] = None
                 ) -> ViewStack:
    """Align + extract chain on in-memory data (service/CLI-independent)."""
    timer = timer or _Timer()
    img = raw
    if req.pattern is not None:
        bayer = BayerImage(img, req.pattern)
        if req.outliers:
            with timer.stage("outliers"):
                bayer = remove_cfa_outliers(bayer, n=req.outlier_window)
        with timer.stage("demosaic"):
            img = demosaic(bayer)
    elif req.outliers:
        # grayscale sensors: treat the raster as one channel plane
        with timer.stage("outliers"):
            ch = BayerImage(np.pad(img, ((0, img.shape[0] % 2), (0, img.shape[1] % 2)),
                                   mode="edge") if (img.shape[0] % 2 or img.shape[1] % 2) else img)
            ch = remove_cfa_outliers(ch, n=req.outlier_window)
            img = ch.mosaic[:img.shape[0], :img.shape[1]]

    if req.devignette != "none":
        if white is None:
            raise PipelineError("de-vignetting requires a white image", stage="devignette")
        with timer.stage("devignette"):
            if req.devignette == "divide":
                img = devignette_divide(img, white)
            else:
                img = devignette_fit(img, white, calib)

    grid = calib.grid
    if req.rotate and abs(calib.rotation) > 0:
        with timer.stage("rotate"):
            img, grid = apply_rotation(img, grid, calib.rotation)
            calib = CalibModel(pitch=calib.pitch, packing=calib.packing,
                               counts=calib.counts, homography=calib.homography,
                               rotation=0.0, grid=grid,
                               fit_residual=calib.fit_residual)

    with timer.stage("resample"):
        lf = resample_global(img, calib) if req.resample == "global" else resample_local(img, calib)
    with timer.stage("views"):
        vs = lf_to_views(lf)

    if req.hexfix and calib.packing == HEXAGONAL and req.resample == "local":
        with timer.stage("hexfix"):
            fixed = np.empty_like(vs.views)
            for u in range(vs.pitch):
                for v in range(vs.pitch):
                    fixed[u, v], _ = correct_hex_artifacts(vs.views[u, v])
            vs = ViewStack(fixed)

    if req.coloreq != "none":
        with timer.stage("coloreq"):
            vs = equalize_colors(vs, scheme=req.coloreq, threads=req.threads)
    if req.range_align:
        with timer.stage("range"):
            vs = align_dynamic_range(vs)
    return vs


def run_decode(req: DecodeRequest) -> DecodeResult:
    timer = _Timer()
    raw = pio.load_image(req.raw_path, assume_srgb=(False if req.linear else None))
    calib = pio.load_calib(req.calib_path)
    white = None
    if req.devignette != "none" and req.white_path:
        white = pio.load_image(req.white_path, assume_srgb=(False if req.linear else None),
                               as_gray=True)
    if req.devignette != "none" and white is None:
        raise PipelineError("decode: devignette enabled but no white image given",
                            stage="devignette")
    if raw.ndim == 3 and req.pattern is not None:
        raise PipelineError("Bayer pattern given for a multi-channel input", stage="decode")

    vs = decode_field(raw, calib, req, white=white, timer=timer)
    out_dir = Path(req.out_dir)
    with timer.stage("export"):
        info = pio.save_viewstack(out_dir, vs, bit_depth=req.bit_depth,
                                  write_pngs=req.write_views)
    manifest = _write_manifest(out_dir, "decode", req.model_dump(), timer.stages)
    return DecodeResult(views_dir=info["dir"], stitched_path=info["stitched"],
                        manifest_path=str(manifest), pitch=vs.pitch,
                        counts=(vs.dims[2], vs.dims[3]), timings=timer.stages)


def run_render(req: RenderRequest) -> RenderResult:
    timer = _Timer()
    vs = pio.load_viewstack(req.field_dir)
    out_dir = Path(req.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    images = []
    if req.refocus is not None:
        rf = req.refocus
        for a in rf.a_values:
            params = RefocusParams(a=a, variant=rf.variant,
                                   refine_factor=rf.refine_factor, normalize=rf.normalize)
            with timer.stage(f"refocus_a{a}"):
                if rf.refine_factor > 1:
                    img = refocus_refined(vs, params)
                elif rf.variant == "micro":
                    from plenokit.core import views_to_lf
                    from plenokit.render import refocus_micro

                    img = refocus_micro(views_to_lf(vs), params)
                else:
                    img = refocus(vs, params)
            name = f"refocus_a{a:g}.png"
            images.append(str(pio.save_image(out_dir / name, img, bit_depth=req.bit_depth)))
    if req.scheimpflug is not None:
        sp = req.scheimpflug
        with timer.stage("scheimpflug"):
            img = scheimpflug(vs, ScheimpflugParams(sp.a_start, sp.a_stop, sp.direction),
                              RefocusParams(refine_factor=sp.refine_factor))
        name = f"scheimpflug_{sp.direction}_a{sp.a_start:g}_{sp.a_stop:g}.png"
        images.append(str(pio.save_image(out_dir / name, img, bit_depth=req.bit_depth)))
    if not images:
        raise PipelineError("render: neither refocus nor scheimpflug requested",
                            stage="render")
    _write_manifest(out_dir, "render", req.model_dump(), timer.stages)
    return RenderResult(images=images, timings=timer.stages)


def _metric_pairs(test_path: Path, ref_path: Path):
    if test_path.is_dir() and ref_path.is_dir():
        names = sorted(p.name for p in test_path.glob("view_*.png"))
        for name in names:
            if (ref_path / name).exists():
                yield name, test_path / name, ref_path / name
    else:
        yield test_path.name, test_path, ref_path


def run_metrics(req: MetricsRequest) -> MetricsResult:
    rows = []
    cfg = SharpnessConfig(crop=req.crop)
    for name, t_path, r_path in _metric_pairs(Path(req.test_path), Path(req.reference_path)):
        test = pio.load_image(t_path)
        ref = pio.load_image(r_path)
        w1 = wasserstein_w1_channels(test, ref)
        w1 = np.broadcast_to(w1, (3,)) if w1.size == 1 else w1
        rows.append(MetricsRow(
            name=name, W1_r=float(w1[0]), W1_g=float(w1[1]), W1_b=float(w1[2]),
            D2=hist_distance_d2(test, ref), PSNR=psnr(test, ref),
            S=sharpness(test, cfg)))
    csv_path = None
    if req.out_csv:
        csv_path = Path(req.out_csv)
        csv_path.parent.mkdir(parents=True, exist_ok=True)
        with csv_path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["name", "W1_r", "W1_g", "W1_b", "D2", "PSNR", "S"])
            for r in rows:
                writer.writerow([r.name, r.W1_r, r.W1_g, r.W1_b, r.D2, r.PSNR, r.S])
    return MetricsResult(rows=rows, csv_path=str(csv_path) if csv_path else None)
