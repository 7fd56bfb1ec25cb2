"""Command-line interface: a thin client over the HTTP service.

Without ``--server`` the CLI mounts the service in-process (no network),
so the exact same request/response contract is exercised either way.
Options may come from a JSON config file; precedence is command line over
file over defaults.  Exit codes: 0 ok, 1 processing error, 2 IO/config
error.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path
from typing import Optional

import click
import httpx

from plenokit import __version__
from plenokit.config import (
    CalibrateRequest,
    DecodeRequest,
    MetricsRequest,
    RefocusModel,
    RenderRequest,
    ScheimpflugModel,
    SynthRequest,
    SynthSpecModel,
)

EXIT_PROCESSING = 1
EXIT_IO = 2


class _InProcessClient:
    """Synchronous shim over the ASGI app: same wire contract, no sockets."""

    def __init__(self):
        from plenokit.service import create_app

        self._transport = httpx.ASGITransport(app=create_app())

    def post(self, path: str, json: dict) -> httpx.Response:
        import asyncio

        async def _go():
            async with httpx.AsyncClient(transport=self._transport,
                                         base_url="http://plenokit.local",
                                         timeout=600.0) as client:
                return await client.post(path, json=json)

        return asyncio.run(_go())


class Client:
    def __init__(self, server: Optional[str] = None):
        if server:
            self._client = httpx.Client(base_url=server, timeout=600.0)
        else:
            self._client = _InProcessClient()

    def post(self, path: str, payload: dict) -> dict:
        resp = self._client.post(path, json=payload)
        if resp.status_code == 200:
            return resp.json()
        detail = {}
        try:
            detail = resp.json().get("detail", {})
        except Exception:
            pass
        kind = detail.get("kind", "processing") if isinstance(detail, dict) else "processing"
        message = detail.get("message", resp.text) if isinstance(detail, dict) else str(detail)
        click.echo(f"error ({kind}): {message}", err=True)
        sys.exit(EXIT_IO if kind in ("io", "config") else EXIT_PROCESSING)


def _load_config_file(path: Optional[str]) -> dict:
    if not path:
        return {}
    p = Path(path)
    if not p.exists():
        click.echo(f"error (io): config file not found: {path}", err=True)
        sys.exit(EXIT_IO)
    return json.loads(p.read_text())


def _merge(file_cfg: dict, section: str, cli_values: dict) -> dict:
    merged = dict(file_cfg.get(section, {}))
    for key, val in cli_values.items():
        if val is not None:
            merged[key] = val
    return merged


@click.group()
@click.option("--server", default=None, help="Remote service URL (default: in-process).")
@click.option("--config", "config_path", default=None, help="JSON config file.")
@click.version_option(__version__)
@click.pass_context
def main(ctx, server, config_path):
    """Plenoptic camera decoding pipeline."""
    ctx.ensure_object(dict)
    ctx.obj["client"] = Client(server)
    ctx.obj["config"] = _load_config_file(config_path)


@main.command()
@click.argument("white_path", type=click.Path())
@click.option("-o", "--out", "out_path", default=None, help="Calibration JSON output path.")
@click.option("--truth", "truth_path", default=None, help="Synth truth JSON for per-stage deviations.")
@click.option("--beta", type=float, default=None, help="Grid-fit regularization weight.")
@click.option("--refine-mode", type=click.Choice(["area", "peak"]), default=None)
@click.option("--linear", is_flag=True, default=None, help="Input is linear (skip sRGB decode).")
@click.pass_context
def calibrate(ctx, white_path, out_path, truth_path, beta, refine_mode, linear):
    """Estimate pitch, detect centroids and fit the lens grid of a white image."""
    if not Path(white_path).exists():
        click.echo(f"error (io): missing file {white_path}", err=True)
        sys.exit(EXIT_IO)
    values = _merge(ctx.obj["config"], "calibrate", {
        "white_path": white_path, "out_path": out_path, "truth_path": truth_path,
        "beta": beta, "refine_mode": refine_mode, "linear": linear})
    req = CalibrateRequest(**values)
    result = ctx.obj["client"].post("/v1/calibrate", req.model_dump())
    click.echo(json.dumps(result, indent=1, sort_keys=True))


@main.command()
@click.argument("raw_path", type=click.Path())
@click.option("-c", "--calib", "calib_path", required=True, help="Calibration JSON.")
@click.option("-o", "--out", "out_dir", required=True, help="Output directory.")
@click.option("--white", "white_path", default=None, help="White image for de-vignetting.")
@click.option("--pattern", type=click.Choice(["RGGB", "BGGR", "GRBG", "GBRG"]), default=None,
              help="Bayer pattern of the raw mosaic (enables demosaicing).")
@click.option("--outliers/--no-outliers", default=None)
@click.option("--devignette", type=click.Choice(["none", "divide", "fit"]), default=None)
@click.option("--rotate/--no-rotate", default=None)
@click.option("--resample", type=click.Choice(["global", "local"]), default=None)
@click.option("--hexfix/--no-hexfix", default=None)
@click.option("--coloreq", type=click.Choice(["none", "hm", "mkl", "hm-mkl-hm"]), default=None)
@click.option("--range-align/--no-range-align", default=None)
@click.option("--bit-depth", type=click.Choice(["8", "16"]), default=None)
@click.option("--linear", is_flag=True, default=None)
@click.option("--threads", type=int, default=None)
@click.pass_context
def decode(ctx, raw_path, calib_path, out_dir, white_path, pattern, outliers, devignette,
           rotate, resample, hexfix, coloreq, range_align, bit_depth, linear, threads):
    """Decode a raw capture into sub-aperture views."""
    for p in (raw_path, calib_path):
        if not Path(p).exists():
            click.echo(f"error (io): missing file {p}", err=True)
            sys.exit(EXIT_IO)
    values = _merge(ctx.obj["config"], "decode", {
        "raw_path": raw_path, "calib_path": calib_path, "out_dir": out_dir,
        "white_path": white_path, "pattern": pattern, "outliers": outliers,
        "devignette": devignette, "rotate": rotate, "resample": resample,
        "hexfix": hexfix, "coloreq": coloreq, "range_align": range_align,
        "bit_depth": int(bit_depth) if bit_depth else None,
        "linear": linear, "threads": threads})
    req = DecodeRequest(**values)
    result = ctx.obj["client"].post("/v1/decode", req.model_dump())
    click.echo(json.dumps(result, indent=1, sort_keys=True))


@main.command()
@click.argument("field_dir", type=click.Path())
@click.option("-o", "--out", "out_dir", required=True)
@click.option("--refocus", "refocus_spec", default=None,
              help="Comma-separated focus scales, e.g. '-1,0,0.5,1'.")
@click.option("--refine", type=int, default=None, help="Sub-pixel refinement factor.")
@click.option("--scheimpflug", "scheimpflug_spec", default=None,
              help="a0,a1,direction (horizontal|vertical|diag-main|diag-anti).")
@click.option("--bit-depth", type=click.Choice(["8", "16"]), default=None)
@click.pass_context
def render(ctx, field_dir, out_dir, refocus_spec, refine, scheimpflug_spec, bit_depth):
    """Refocus or Scheimpflug-render a decoded light-field."""
    if not Path(field_dir).exists():
        click.echo(f"error (io): missing field directory {field_dir}", err=True)
        sys.exit(EXIT_IO)
    refocus_model = None
    if refocus_spec:
        a_values = [float(x) for x in refocus_spec.split(",") if x.strip()]
        refocus_model = RefocusModel(a_values=a_values, refine_factor=refine or 1)
    scheimpflug_model = None
    if scheimpflug_spec:
        parts = scheimpflug_spec.split(",")
        if len(parts) != 3:
            click.echo("error (config): --scheimpflug expects a0,a1,direction", err=True)
            sys.exit(EXIT_IO)
        scheimpflug_model = ScheimpflugModel(
            a_start=float(parts[0]), a_stop=float(parts[1]), direction=parts[2],
            refine_factor=refine or 1)
    req = RenderRequest(field_dir=field_dir, out_dir=out_dir, refocus=refocus_model,
                        scheimpflug=scheimpflug_model,
                        bit_depth=int(bit_depth) if bit_depth else 8)
    result = ctx.obj["client"].post("/v1/render", req.model_dump())
    click.echo(json.dumps(result, indent=1, sort_keys=True))


@main.command()
@click.argument("test_path", type=click.Path())
@click.argument("reference_path", type=click.Path())
@click.option("-o", "--out", "out_csv", default=None, help="CSV output path.")
@click.pass_context
def metrics(ctx, test_path, reference_path, out_csv):
    """Image metrics (W1, D2, PSNR, sharpness) for a pair or two view dirs."""
    req = MetricsRequest(test_path=test_path, reference_path=reference_path,
                         out_csv=out_csv)
    result = ctx.obj["client"].post("/v1/metrics", req.model_dump())
    click.echo(json.dumps(result, indent=1, sort_keys=True))


@main.command()
@click.argument("out_dir", type=click.Path())
@click.option("--kind", type=click.Choice(["white", "scene"]), default="white")
@click.option("--spec", "spec_json", default=None,
              help="SynthSpec JSON (inline or @file), e.g. '{\"pitch\": 21}'.")
@click.option("--name", default="synth")
@click.pass_context
def synth(ctx, out_dir, kind, spec_json, name):
    """Generate a synthetic white image or scene with ground truth."""
    spec_values = {}
    if spec_json:
        if spec_json.startswith("@"):
            spec_values = json.loads(Path(spec_json[1:]).read_text())
        else:
            spec_values = json.loads(spec_json)
    file_cfg = ctx.obj["config"].get("synth", {})
    spec_values = {**file_cfg.get("spec", {}), **spec_values}
    req = SynthRequest(kind=kind, spec=SynthSpecModel(**spec_values), out_dir=out_dir,
                       name=name, planes=file_cfg.get("planes", [(0, 0.0)]))
    result = ctx.obj["client"].post("/v1/synth", req.model_dump())
    click.echo(json.dumps(result, indent=1, sort_keys=True))


@main.command()
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8116)
def serve(host, port):
    """Run the decoding service."""
    import uvicorn

    from plenokit.service import create_app

    uvicorn.run(create_app(), host=host, port=port)


if __name__ == "__main__":
    main()
