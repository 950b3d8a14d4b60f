"""Request/response models for the HTTP service."""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, Field


class HealthResponse(BaseModel):
    status: Literal["ok"]
    version: str


class ValidateManifestRequest(BaseModel):
    manifest: str = Field(description="Path to a corpus manifest on the service host")


class ValidateManifestResponse(BaseModel):
    valid: bool
    sample_ids: list[str] = []
    class_set: list[str] = []
    error: str | None = None


class ExclusionCheckRequest(BaseModel):
    n_frames: int = Field(ge=0)
    clip_length: int = Field(default=16, ge=1)
    min_frames: int = Field(default=16, ge=1)


class ExclusionCheckResponse(BaseModel):
    included: bool
    reason: str | None = None


class ParseScoreRequest(BaseModel):
    raw: str


class ParseScoreResponse(BaseModel):
    value: float


class ScorePairRequest(BaseModel):
    sequence_a: list[str] = Field(min_length=1)
    sequence_b: list[str] = Field(min_length=1)
    id_a: str = "A1"
    id_b: str = "B1"


class ScorePairResponse(BaseModel):
    value: float
    raw_response: str
    backend_id: str


class EvaluateRequest(BaseModel):
    matrix: dict
    class_sets: dict[str, list[int]]
    self_mode: Literal["include_self", "leave_one_out"] = "include_self"


class EvaluateResponse(BaseModel):
    evaluation: dict


class TablesRequest(BaseModel):
    summary: dict


class TablesResponse(BaseModel):
    markdown: str


class StartRunRequest(BaseModel):
    config: str = Field(description="Path to a run configuration on the service host")
    overrides: dict = Field(default_factory=dict)


class RunStatusResponse(BaseModel):
    run_id: str
    status: Literal["running", "completed", "failed"]
    run_dir: str | None = None
    summary: dict | None = None
    error: str | None = None
