"""Request/response models shared by the pipeline runners, the HTTP service
and the CLI.  Defaults encode the pipeline's documented behavior: outlier
removal on, de-vignetting by division, no rotation pre-pass (resampling
covers it), global resampling, hex fringe fix on, compound color
equalization, dynamic-range alignment on.
"""

from __future__ import annotations

from typing import List, Literal, Optional, Tuple

from pydantic import BaseModel, Field

from plenokit import __version__


class SynthSpecModel(BaseModel):
    pitch: int = 21
    counts: Tuple[int, int] = (5, 5)
    packing: Literal["rectangular", "hexagonal"] = "rectangular"
    tilt_deg: Tuple[float, float] = (0.0, 0.0)
    vignette_lens: float = 0.0
    vignette_global: float = 0.0
    noise_sigma: float = 0.0
    fill_factor: float = 0.5
    hex_row_phase: int = 0
    seed: int = 0


class SynthRequest(BaseModel):
    kind: Literal["white", "scene"] = "white"
    spec: SynthSpecModel = Field(default_factory=SynthSpecModel)
    out_dir: str
    name: str = "synth"
    # scene planes: (texture seed, disparity) pairs rendered as smooth noise
    planes: List[Tuple[int, float]] = Field(default_factory=lambda: [(0, 0.0)])


class SynthResult(BaseModel):
    image_path: str
    truth_path: str
    dims: Tuple[int, int]


class CalibrateRequest(BaseModel):
    white_path: str
    out_path: Optional[str] = None
    truth_path: Optional[str] = None   # synth truth JSON for per-stage deviations
    beta: float = 0.0
    refine_mode: Literal["area", "peak"] = "area"
    linear: bool = False               # input already linear (skip sRGB decode)


class CalibrateResult(BaseModel):
    calib_path: str
    pitch: int
    packing: str
    counts: Tuple[int, int]
    fit_residual: float
    rotation_rad: float
    stage_deviations: Optional[dict] = None
    timings: dict = Field(default_factory=dict)


class DecodeRequest(BaseModel):
    raw_path: str
    calib_path: str
    out_dir: str
    white_path: Optional[str] = None
    pattern: Optional[Literal["RGGB", "BGGR", "GRBG", "GBRG"]] = None  # demosaic when set
    outliers: bool = True
    outlier_window: int = 2
    devignette: Literal["none", "divide", "fit"] = "divide"
    rotate: bool = False
    resample: Literal["global", "local"] = "global"
    hexfix: bool = True
    coloreq: Literal["none", "hm", "mkl", "hm-mkl-hm"] = "hm-mkl-hm"
    range_align: bool = True
    bit_depth: Literal[8, 16] = 8
    linear: bool = False
    threads: int = 1
    write_views: bool = True


class DecodeResult(BaseModel):
    views_dir: str
    stitched_path: str
    manifest_path: str
    pitch: int
    counts: Tuple[int, int]
    timings: dict = Field(default_factory=dict)


class RefocusModel(BaseModel):
    a_values: List[float] = Field(default_factory=lambda: [0.0])
    refine_factor: int = 1
    normalize: bool = True
    variant: Literal["sai", "micro"] = "sai"


class ScheimpflugModel(BaseModel):
    a_start: float = 0.0
    a_stop: float = 1.0
    direction: Literal["horizontal", "vertical", "diag-main", "diag-anti"] = "horizontal"
    refine_factor: int = 1


class RenderRequest(BaseModel):
    field_dir: str
    out_dir: str
    refocus: Optional[RefocusModel] = None
    scheimpflug: Optional[ScheimpflugModel] = None
    bit_depth: Literal[8, 16] = 8


class RenderResult(BaseModel):
    images: List[str]
    timings: dict = Field(default_factory=dict)


class MetricsRequest(BaseModel):
    test_path: str                      # image file or decode dir
    reference_path: str
    out_csv: Optional[str] = None
    crop: Optional[Tuple[int, int, int, int]] = None


class MetricsRow(BaseModel):
    name: str
    W1_r: float
    W1_g: float
    W1_b: float
    D2: float
    PSNR: float
    S: float


class MetricsResult(BaseModel):
    rows: List[MetricsRow]
    csv_path: Optional[str] = None


class HealthResult(BaseModel):
    status: str = "ok"
    version: str = __version__
