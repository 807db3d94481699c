"""Request/response models for the HTTP service."""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field


class ToleranceOverrides(BaseModel):
    identity: Optional[float] = None
    decision: Optional[float] = None
    genericity: Optional[float] = None
    scalar: Optional[float] = None

    def as_dict(self):
        return self.model_dump()


class VerifyRequest(BaseModel):
    manifold: str = Field(description="manifold description file text")
    tolerances: Optional[ToleranceOverrides] = None


class CheckRequest(BaseModel):
    manifold: str
    mode: Literal["qe", "soliton", "static", "rank"]
    tolerances: Optional[ToleranceOverrides] = None


class PotentialRequest(BaseModel):
    manifold: str
    path: str = Field(description="polyline, e.g. '(0,0,0) -> (1,0,0)'")
    subdivisions: int = 64
    tolerances: Optional[ToleranceOverrides] = None


class HarnackRequest(BaseModel):
    manifold: str
    m_values: list[float]
    trials: int = 3
    tolerances: Optional[ToleranceOverrides] = None


class Summary(BaseModel):
    decision: str
    exit_code: int
    worst: dict
    model_config = {"extra": "allow"}


class Report(BaseModel):
    schema_id: str = Field(alias="schema")
    tool: str
    version: str
    generated_at: Optional[str]
    digest: str
    mode: str
    input: dict
    tolerances: dict
    summary: Summary
    points: Optional[list] = None
    path: Optional[dict] = None
    model_config = {"populate_by_name": True}


class Health(BaseModel):
    status: str
    version: str
