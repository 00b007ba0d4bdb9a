"""Wire models for the session service."""

from __future__ import annotations

from typing import Any, Optional, Union

from pydantic import BaseModel, Field


class CreateSessionRequest(BaseModel):
    problem: dict = Field(description="gai-model/1 problem document")
    mode: str = Field(default="evoi", description="'evoi' or 'exact'")
    random_fallback: bool = False


class CreateSessionResponse(BaseModel):
    session_id: str
    summary: dict


class SubmitResponseRequest(BaseModel):
    query_id: str
    response: Union[str, float] = Field(
        description="'yes'/'no' for comparison queries, a number for gambles"
    )


class NextQueryResponse(BaseModel):
    complete: bool
    query: Optional[dict] = None


class RestoreSessionRequest(BaseModel):
    document: dict = Field(description="gai-session/1 transcript document")


class HealthResponse(BaseModel):
    status: str
    sessions: int
    version: str


class ProblemSummary(BaseModel):
    id: str
    name: str
    attributes: int
    factors: int


class ValidationReport(BaseModel):
    valid: bool
    problems: list[str]


class ErrorBody(BaseModel):
    detail: str
    error: Optional[str] = None
    extra: Optional[Any] = None
