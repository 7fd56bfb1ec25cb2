"""Image and calibration file IO.

Pipeline math runs in linear light; gamma is applied only here.  PNG input
defaults to sRGB decoding, TIFF to linear, both overridable.  Exports clamp
to [0, 1], encode sRGB (unless disabled) and quantize; 16-bit RGB goes to
TIFF since PNG writers only take 16-bit grayscale.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Optional

import imageio.v3 as iio
import numpy as np
import tifffile

from plenokit.core import CalibModel, CentroidGrid, ViewStack

CALIB_SCHEMA = 1


def srgb_encode(linear: np.ndarray) -> np.ndarray:
    linear = np.asarray(linear, dtype=np.float64)
    low = linear <= 0.0031308
    out = np.where(low, 12.92 * linear,
                   1.055 * np.power(np.maximum(linear, 1e-12), 1.0 / 2.4) - 0.055)
    return out


def srgb_decode(encoded: np.ndarray) -> np.ndarray:
    encoded = np.asarray(encoded, dtype=np.float64)
    low = encoded <= 0.04045
    return np.where(low, encoded / 12.92, np.power((encoded + 0.055) / 1.055, 2.4))


def load_image(path, assume_srgb: Optional[bool] = None, as_gray: bool = False) -> np.ndarray:
    """Load PNG/TIFF (8 or 16 bit) into linear-light floats in [0, 1]."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(str(path))
    arr = np.asarray(iio.imread(path))
    if arr.dtype == np.uint8:
        img = arr.astype(np.float64) / 255.0
    elif arr.dtype == np.uint16:
        img = arr.astype(np.float64) / 65535.0
    else:
        img = arr.astype(np.float64)
    if assume_srgb is None:
        assume_srgb = path.suffix.lower() in (".png", ".jpg", ".jpeg", ".bmp")
    if img.ndim == 3 and img.shape[2] == 4:
        img = img[..., :3]
    if assume_srgb:
        img = srgb_decode(img)
    if as_gray and img.ndim == 3:
        img = img @ np.array([0.2126, 0.7152, 0.0722])
    return img


def save_image(path, img: np.ndarray, bit_depth: int = 8, encode_srgb: bool = True) -> Path:
    """Clamp, optionally gamma-encode, quantize and write an image.

    Returns the actual path written: 16-bit multi-channel output switches
    the suffix to .tiff.
    """
    path = Path(path)
    img = np.clip(np.asarray(img, dtype=np.float64), 0.0, 1.0)
    if img.ndim == 3 and img.shape[2] == 1:
        img = img[..., 0]
    if encode_srgb:
        img = srgb_encode(img)
    if bit_depth == 8:
        data = np.rint(img * 255.0).astype(np.uint8)
        iio.imwrite(path, data)
        return path
    if bit_depth == 16:
        data = np.rint(img * 65535.0).astype(np.uint16)
        if data.ndim == 2 and path.suffix.lower() == ".png":
            iio.imwrite(path, data)
            return path
        path = path.with_suffix(".tiff")
        tifffile.imwrite(path, data)
        return path
    raise ValueError("bit_depth must be 8 or 16")


def save_calib(path, model: CalibModel) -> Path:
    """Persist a calibration as a stable-keyed JSON sidecar."""
    path = Path(path)
    payload = {
        "schema": CALIB_SCHEMA,
        "pitch": int(model.pitch),
        "packing": model.packing,
        "J": int(model.counts[0]),
        "H": int(model.counts[1]),
        "homography": [float(x) for x in model.homography.ravel()],
        "rotation_rad": float(model.rotation),
        "hex_row_phase": int(model.grid.hex_row_phase),
        "centroids": [[float(k), float(l)] for k, l in model.grid.points],
        "fit_residual": float(model.fit_residual),
    }
    path.write_text(json.dumps(payload, sort_keys=True, indent=1))
    return path


def load_calib(path) -> CalibModel:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(str(path))
    d = json.loads(path.read_text())
    if d.get("schema") != CALIB_SCHEMA:
        raise ValueError(f"unsupported calibration schema {d.get('schema')!r}")
    entries = np.asarray(d["centroids"], dtype=np.float64).reshape(d["J"], d["H"], 2)
    grid = CentroidGrid(entries, packing=d["packing"],
                        hex_row_phase=d.get("hex_row_phase", 0))
    return CalibModel(
        pitch=d["pitch"], packing=d["packing"], counts=(d["J"], d["H"]),
        homography=np.asarray(d["homography"], dtype=np.float64).reshape(3, 3),
        rotation=d["rotation_rad"], grid=grid, fit_residual=d["fit_residual"])


def stitch_views(vs: ViewStack) -> np.ndarray:
    """Tile all views into one (M*J) x (M*H) overview raster."""
    m, _, j_count, h_count, channels = vs.dims
    out = np.empty((m * j_count, m * h_count, channels), dtype=vs.views.dtype)
    for u in range(m):
        for v in range(m):
            out[u * j_count:(u + 1) * j_count, v * h_count:(v + 1) * h_count] = vs.views[u, v]
    return out


def save_viewstack(out_dir, vs: ViewStack, bit_depth: int = 8,
                   encode_srgb: bool = True, write_pngs: bool = True) -> dict:
    """Write per-view images, a stitched overview and a lossless field dump.

    ``field.npz`` keeps full precision for downstream rendering; the PNGs
    are the human-facing export.  View filenames carry the signed angular
    offsets.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    c = vs.centroid_index
    view_files = []
    if write_pngs:
        for u in range(vs.pitch):
            for v in range(vs.pitch):
                name = f"view_{u - c}_{v - c}.png"
                p = save_image(out_dir / name, vs.views[u, v],
                               bit_depth=bit_depth, encode_srgb=encode_srgb)
                view_files.append(p.name)
    stitched = save_image(out_dir / "stitched.png", stitch_views(vs),
                          bit_depth=8, encode_srgb=encode_srgb)
    np.savez_compressed(out_dir / "field.npz", views=vs.views.astype(np.float32))
    meta = {"pitch": vs.pitch, "J": vs.dims[2], "H": vs.dims[3],
            "channels": vs.dims[4], "views": view_files}
    (out_dir / "field.json").write_text(json.dumps(meta, sort_keys=True, indent=1))
    return {"stitched": str(stitched), "dir": str(out_dir), "n_views": vs.pitch ** 2}


def load_viewstack(path) -> ViewStack:
    """Load a view stack from a decode output directory (or field.npz)."""
    path = Path(path)
    npz = path if path.suffix == ".npz" else path / "field.npz"
    if not npz.exists():
        raise FileNotFoundError(f"no decoded field at {npz}")
    with np.load(npz) as data:
        return ViewStack(data["views"].astype(np.float64))
