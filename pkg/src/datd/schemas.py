"""Request/response models for the HTTP service.

Pydantic mirrors of the plain dataclasses: ``ScenarioModel`` round-trips with
``ScenarioConfig``, the row models mirror the CSV schemas column for column,
and the endpoint payloads compose them. Validation here is shape-level;
domain rules live in ``ScenarioConfig.__post_init__`` and are re-applied by
``ScenarioModel.to_config``.
"""

from __future__ import annotations

import dataclasses
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field

from .config import ScenarioConfig

Scheme = Literal["datd", "baseline"]
SchemeSelection = Literal["datd", "baseline", "both"]
SweepParameter = Literal["beta", "omega", "gamma", "tau"]
Stage = Literal["first", "second"]


class ScenarioModel(BaseModel):
    """JSON face of ``ScenarioConfig``; field names match one to one."""

    model_config = ConfigDict(extra="forbid")

    seed: int = Field(ge=0)
    n_sources: int = Field(default=20, ge=1)
    n_nodes: int = Field(default=20, ge=1)
    alpha: float = Field(default=0.4, ge=0.0, lt=1.0)
    beta: float = Field(default=0.3, ge=0.0, lt=1.0)
    gamma: float = Field(default=0.5, ge=0.0, le=1.0)
    omega: float = Field(default=0.5, ge=0.0)
    tau: float = Field(default=0.1, ge=0.0, le=1.0)
    n_tasks: int = Field(default=100, ge=1)
    truth_range: tuple[float, float] = (0.0, 100.0)
    low_value_range: tuple[float, float] = (1.0, 100.0)
    high_value_range: tuple[float, float] = (100.0, 10000.0)
    noise_fraction: float = Field(default=0.01, ge=0.0)
    dropout: float = Field(default=0.0, ge=0.0, lt=1.0)
    coordinated: bool = False
    direction: Literal["down", "symmetric"] = "down"
    high_value_threshold: float = 100.0

    def to_config(self) -> ScenarioConfig:
        return ScenarioConfig(**self.model_dump())

    @classmethod
    def from_config(cls, config: ScenarioConfig) -> "ScenarioModel":
        return cls(**dataclasses.asdict(config))


class TaskRow(BaseModel):
    """One task's outcome per scheme; null where a scheme did not run or the
    round failed."""

    task_id: int
    task_value: float
    is_high_value: bool
    truth: float
    estimate_datd: Optional[float] = None
    estimate_baseline: Optional[float] = None
    deviation_datd: Optional[float] = None
    deviation_baseline: Optional[float] = None
    loss_datd: Optional[float] = None
    loss_baseline: Optional[float] = None
    weight_ratio_datd: Optional[float] = None
    weight_ratio_baseline: Optional[float] = None


class CredibilityRow(BaseModel):
    task_id: int
    stage: Stage
    entity_id: str
    is_malicious: bool
    scheme: Scheme
    credibility: float
    cpec: float


class WeightRow(BaseModel):
    task_id: int
    stage: Stage
    entity_id: str
    scheme: Scheme
    weight: float


class SchemeSummary(BaseModel):
    """Run-level aggregates for one scheme; high-value fields are null when
    the stream produced no high-value tasks."""

    scheme: Scheme
    total_deviation: float
    rmse: float
    total_loss: float
    high_value_rmse: Optional[float] = None
    high_value_loss: Optional[float] = None


class RunRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    config: ScenarioModel
    scheme: SchemeSelection = "both"


class RunResponse(BaseModel):
    config: ScenarioModel
    scheme: SchemeSelection
    summaries: list[SchemeSummary]
    per_task: list[TaskRow]
    credibility: list[CredibilityRow]
    weights: list[WeightRow]


class SweepRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    config: ScenarioModel
    param: SweepParameter
    values: list[float] = Field(min_length=1)
    seeds: int = Field(default=20, ge=1)


class SweepRow(BaseModel):
    """Aggregate metrics for one (parameter value, scheme) cell."""

    param: SweepParameter
    value: float
    scheme: Scheme
    seeds: int
    total_deviation_mean: float
    total_deviation_q25: float
    total_deviation_median: float
    total_deviation_q75: float
    rmse_mean: float
    rmse_q25: float
    rmse_median: float
    rmse_q75: float
    total_loss_mean: float
    total_loss_q25: float
    total_loss_median: float
    total_loss_q75: float


class SweepResponse(BaseModel):
    rows: list[SweepRow]


class GoldenCheckModel(BaseModel):
    name: str
    expected: float
    actual: float
    tolerance: float
    passed: bool


class Table2Response(BaseModel):
    checks: list[GoldenCheckModel]
    all_passed: bool


class HealthResponse(BaseModel):
    status: Literal["ok"]
    version: str


class ErrorBody(BaseModel):
    """Wire form of a domain error: stable code plus human-readable detail."""

    error: str
    detail: str
