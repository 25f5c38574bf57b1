"""Request/response models for the attack service.

File inputs travel base64-encoded inside the request body (the server never
sees the client's filesystem); artifacts come back the same way and the
client writes them out locally.
"""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field


class OracleSpecModel(BaseModel):
    kind: Literal["toy", "cmd", "replay"]
    weights_text: Optional[str] = None
    command: Optional[str] = None
    replay_jsonl: Optional[str] = None
    class_count: Optional[int] = None


class AttackOptions(BaseModel):
    pop: int = 50
    gens: int = 200
    alpha: float = 0.2
    seed: int = 0
    optimizer: Literal["psl", "nsga2"] = "psl"
    threshold: float = Field(default=0.2, ge=0.0, le=1.0)
    select_norm: Literal["l1", "l2"] = "l1"
    rho_fixed: Optional[float] = None
    record_queries: bool = False


class AttackRequest(BaseModel):
    image_png_b64: str
    mask_pgm_b64: Optional[str] = None
    label: int
    oracle: OracleSpecModel
    options: AttackOptions = AttackOptions()


class ArtifactFile(BaseModel):
    name: str
    content_b64: str


class AttackResponse(BaseModel):
    status: Literal["success", "no_adversarial", "oracle_failure"]
    report: dict
    artifacts: list[ArtifactFile]


class AblateRequest(AttackRequest):
    sweep: Literal["attention", "alpha", "optimizer"]
    seeds: list[int] = [0]


class AblateResponse(BaseModel):
    summary: dict
    artifacts: list[ArtifactFile]


class BatchRowModel(BaseModel):
    name: str
    image_png_b64: str
    mask_pgm_b64: Optional[str] = None
    label: int


class BatchRequest(BaseModel):
    rows: list[BatchRowModel]
    oracle: OracleSpecModel
    options: AttackOptions = AttackOptions()


class BatchResponse(BaseModel):
    report: dict
    artifacts: list[ArtifactFile]


class HealthResponse(BaseModel):
    status: Literal["ok"]
    version: str
