"""FastAPI application exposing the pipeline runners.

The service and its clients share a filesystem: requests carry input and
output paths, responses carry result paths and summaries.  Error mapping:
missing files and bad configuration come back as 400 with ``kind`` set to
``io`` or ``config``; processing failures as 500 with ``kind`` set to
``processing`` and the failing stage named.
"""

from __future__ import annotations

from fastapi import FastAPI, HTTPException

from plenokit.config import (
    CalibrateRequest,
    CalibrateResult,
    DecodeRequest,
    DecodeResult,
    HealthResult,
    MetricsRequest,
    MetricsResult,
    RenderRequest,
    RenderResult,
    SynthRequest,
    SynthResult,
)
from plenokit.core import PipelineError
from plenokit import pipeline


def _run(fn, req):
    try:
        return fn(req)
    except FileNotFoundError as exc:
        raise HTTPException(status_code=400,
                            detail={"kind": "io", "message": str(exc)}) from exc
    except (ValueError, KeyError) as exc:
        raise HTTPException(status_code=400,
                            detail={"kind": "config", "message": str(exc)}) from exc
    except PipelineError as exc:
        raise HTTPException(status_code=500,
                            detail={"kind": "processing", "stage": exc.stage,
                                    "message": str(exc)}) from exc


def create_app() -> FastAPI:
    app = FastAPI(title="plenokit", description="Plenoptic camera decoding service")

    @app.get("/health", response_model=HealthResult)
    def health():
        return HealthResult()

    @app.post("/v1/synth", response_model=SynthResult)
    def synth(req: SynthRequest):
        return _run(pipeline.run_synth, req)

    @app.post("/v1/calibrate", response_model=CalibrateResult)
    def calibrate(req: CalibrateRequest):
        return _run(pipeline.run_calibrate, req)

    @app.post("/v1/decode", response_model=DecodeResult)
    def decode(req: DecodeRequest):
        return _run(pipeline.run_decode, req)

    @app.post("/v1/render", response_model=RenderResult)
    def render(req: RenderRequest):
        return _run(pipeline.run_render, req)

    @app.post("/v1/metrics", response_model=MetricsResult)
    def metrics(req: MetricsRequest):
        return _run(pipeline.run_metrics, req)

    return app
