"""HTTP face of the toolkit.

Each endpoint decodes the request payload, runs the corresponding operation
through the runner into a scratch directory, and streams every produced
artifact back in the response.  Attacks run synchronously: a request is a
job, and the service is meant for one trusted operator (the ``cmd`` oracle
kind launches a subprocess on the server host).
"""

from __future__ import annotations

import base64
import tempfile
from pathlib import Path

from fastapi import FastAPI, HTTPException

from .. import __version__
from ..core import EvoAttackError
from ..imagefiles import png_from_bytes
from ..optimize import RunConfig
from ..runner import BatchRow, OracleSpec, run_ablation, run_attack_to_dir, run_batch
from .schemas import (
    AblateRequest,
    AblateResponse,
    ArtifactFile,
    AttackOptions,
    AttackRequest,
    AttackResponse,
    BatchRequest,
    BatchResponse,
    HealthResponse,
    OracleSpecModel,
)

app = FastAPI(title="evoattack service", version=__version__)


def _decode_b64(data: str, what: str) -> bytes:
    try:
        return base64.b64decode(data.encode("ascii"), validate=True)
    except Exception as exc:
        raise HTTPException(status_code=400, detail=f"bad base64 in {what}: {exc}") from exc


def _oracle_spec(model: OracleSpecModel) -> OracleSpec:
    return OracleSpec(
        kind=model.kind,
        weights_text=model.weights_text,
        command=model.command,
        replay_text=model.replay_jsonl,
        class_count=model.class_count,
    )


def _run_config(options: AttackOptions) -> RunConfig:
    try:
        return RunConfig(
            population_size=options.pop,
            generations=options.gens,
            alpha=options.alpha,
            seed=options.seed,
            optimizer=options.optimizer,
            select_norm=options.select_norm,
            rho_fixed=options.rho_fixed,
        )
    except ValueError as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc


def _collect_artifacts(root: Path) -> list[ArtifactFile]:
    files = []
    for path in sorted(p for p in root.rglob("*") if p.is_file()):
        files.append(
            ArtifactFile(
                name=str(path.relative_to(root)),
                content_b64=base64.b64encode(path.read_bytes()).decode("ascii"),
            )
        )
    return files


def _decode_image(request: AttackRequest):
    image_bytes = _decode_b64(request.image_png_b64, "image_png_b64")
    mask_bytes = (
        _decode_b64(request.mask_pgm_b64, "mask_pgm_b64")
        if request.mask_pgm_b64 is not None
        else None
    )
    try:
        image = png_from_bytes(image_bytes)
    except EvoAttackError as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc
    return image, mask_bytes


@app.get("/health", response_model=HealthResponse)
def health() -> HealthResponse:
    return HealthResponse(status="ok", version=__version__)


@app.post("/attack", response_model=AttackResponse)
def attack(request: AttackRequest) -> AttackResponse:
    image, mask_bytes = _decode_image(request)
    config = _run_config(request.options)
    with tempfile.TemporaryDirectory(prefix="evoattack-") as scratch:
        out_dir = Path(scratch) / "out"
        try:
            outcome = run_attack_to_dir(
                image,
                mask_bytes,
                request.label,
                _oracle_spec(request.oracle),
                config,
                out_dir,
                threshold=request.options.threshold,
                record_queries=request.options.record_queries,
            )
        except (EvoAttackError, ValueError) as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        return AttackResponse(
            status=outcome.status,
            report=outcome.report,
            artifacts=_collect_artifacts(out_dir),
        )


@app.post("/ablate", response_model=AblateResponse)
def ablate(request: AblateRequest) -> AblateResponse:
    image, mask_bytes = _decode_image(request)
    config = _run_config(request.options)
    with tempfile.TemporaryDirectory(prefix="evoattack-") as scratch:
        out_dir = Path(scratch) / "out"
        try:
            summary = run_ablation(
                image,
                mask_bytes,
                request.label,
                _oracle_spec(request.oracle),
                config,
                request.sweep,
                request.seeds,
                out_dir,
                threshold=request.options.threshold,
            )
        except (EvoAttackError, ValueError) as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        return AblateResponse(summary=summary, artifacts=_collect_artifacts(out_dir))


@app.post("/batch", response_model=BatchResponse)
def batch(request: BatchRequest) -> BatchResponse:
    config = _run_config(request.options)
    rows = [
        BatchRow(
            name=row.name,
            image_png=_decode_b64(row.image_png_b64, f"row {i} image"),
            mask_pgm=(
                _decode_b64(row.mask_pgm_b64, f"row {i} mask")
                if row.mask_pgm_b64 is not None
                else None
            ),
            label=row.label,
        )
        for i, row in enumerate(request.rows)
    ]
    with tempfile.TemporaryDirectory(prefix="evoattack-") as scratch:
        out_dir = Path(scratch) / "out"
        try:
            report = run_batch(
                rows,
                _oracle_spec(request.oracle),
                config,
                out_dir,
                threshold=request.options.threshold,
            )
        except (EvoAttackError, ValueError) as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        return BatchResponse(report=report, artifacts=_collect_artifacts(out_dir))
