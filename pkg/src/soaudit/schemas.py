"""Pydantic request/response models for the audit service.

The CLI builds the same models and either executes them in process or posts
them to a running service, so the wire format and the library surface never
drift apart.
"""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field

from .neighborhood import DEFAULT_DELTA, DEFAULT_ENUM_CAP, DEFAULT_KAPPA


class ExampleIn(BaseModel):
    text: str
    label: int = Field(ge=0, le=1)


class OracleEndpointsIn(BaseModel):
    classifier: str = "builtin:linear"
    fillmask: str = "builtin:ngram"
    perplexity: str = "builtin:ngram"
    batch_size: int = Field(default=64, ge=1)
    timeout_s: float = Field(default=30.0, gt=0)
    retries: int = Field(default=2, ge=0)


class SettingsIn(BaseModel):
    k: int = Field(default=2, ge=0)
    beam_width: int = Field(default=20, ge=1)
    kappa: int = Field(default=DEFAULT_KAPPA, ge=1)
    delta: float = Field(default=DEFAULT_DELTA, ge=0)
    epsilon: float = Field(default=0.005, gt=0)
    sample_budget: Optional[int] = Field(default=None, ge=1)
    enum_cap: int = Field(default=DEFAULT_ENUM_CAP, ge=0)
    trials: int = Field(default=50, ge=1)
    seed: int = 0
    workers: int = Field(default=1, ge=1)
    blacklist: list[str] = Field(default_factory=list)


class AttackRequest(BaseModel):
    dataset: list[ExampleIn]
    synonyms: list[tuple[str, str]]
    method: Literal["so-enum", "so-beam", "random"] = "so-beam"
    settings: SettingsIn = Field(default_factory=SettingsIn)
    oracles: OracleEndpointsIn = Field(default_factory=OracleEndpointsIn)


class BiasRequest(BaseModel):
    dataset: list[ExampleIn]
    pairs: list[tuple[str, str]]
    settings: SettingsIn = Field(default_factory=SettingsIn)
    oracles: OracleEndpointsIn = Field(default_factory=OracleEndpointsIn)


class NeighborsRequest(BaseModel):
    dataset: list[ExampleIn]
    settings: SettingsIn = Field(default_factory=SettingsIn)
    oracles: OracleEndpointsIn = Field(default_factory=OracleEndpointsIn)


class ValidateRequest(BaseModel):
    report: dict
    dataset: list[ExampleIn]
    oracles: Optional[OracleEndpointsIn] = None


class RunReportOut(BaseModel):
    """The standard report envelope every audit returns."""

    config: dict
    examples: list[dict]
    aggregate: dict
    version: str
    started_at: str
    finished_at: str


class ValidateOut(BaseModel):
    ok: bool
    checked: int
    failures: list[str]


class HealthOut(BaseModel):
    status: str
    version: str
