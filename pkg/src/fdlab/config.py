"""Experiment configuration: JSON schema, defaults and conversion to the
numerical types."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .domain import DomainSpec, ReactionSpec
from .errors import ConfigError
from .solver import StepConfig

RUN_KINDS = ("eigen", "bounds", "sweep", "nonlinear", "validate")


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class HarmonicModel(_Strict):
    k: int = Field(ge=1)
    cos: float = 0.0
    sin: float = 0.0


class PeriodicModel(_Strict):
    mean: float = 0.0
    harmonics: list[HarmonicModel] = []


class DomainModel(_Strict):
    L0: float = Field(gt=0)
    A0: float = Field(default=0.0, ge=0)
    omega: float = Field(default=1.0, gt=0)
    l: PeriodicModel = PeriodicModel(mean=1.0)
    a: PeriodicModel = PeriodicModel(mean=0.0)


class ReactionModel(_Strict):
    kind: Literal["linear", "logistic"] = "logistic"
    fprime0: float = Field(default=1.0, ge=0)
    K: float = Field(default=1.0, gt=0)
    D: float = Field(default=1.0, gt=0)


class NumericsModel(_Strict):
    M: int = Field(default=200, ge=8)
    Nt: int = Field(default=800, ge=32)
    theta: float = Field(default=0.5, ge=0.5, le=1.0)
    tol: float = Field(default=1e-10, gt=0)
    max_periods: int = Field(default=400, ge=16)


class RunModel(_Strict):
    kind: Literal["eigen", "bounds", "sweep", "nonlinear", "validate"] = "eigen"
    omegas: Optional[list[float]] = None
    horizon_periods: Optional[int] = Field(default=None, ge=2)
    seeds: Optional[list[int]] = None

    @field_validator("omegas")
    @classmethod
    def _increasing(cls, v):
        if v is not None:
            if not v or any(w <= 0 for w in v) or any(b <= a for a, b in zip(v, v[1:])):
                raise ValueError("omegas must be positive and strictly increasing")
        return v


class ExperimentConfig(_Strict):
    domain: DomainModel
    reaction: ReactionModel = ReactionModel()
    numerics: NumericsModel = NumericsModel()
    run: RunModel = RunModel()

    @model_validator(mode="after")
    def _consistent(self):
        if self.run.kind == "sweep" and not self.run.omegas:
            raise ValueError("run.omegas is required for a sweep")
        return self

    def domain_spec(self) -> DomainSpec:
        try:
            return DomainSpec.from_dict(self.domain.model_dump())
        except ValueError as exc:
            raise ConfigError(f"domain: {exc}") from exc

    def reaction_spec(self) -> ReactionSpec:
        try:
            return ReactionSpec(**self.reaction.model_dump())
        except ValueError as exc:
            raise ConfigError(f"reaction: {exc}") from exc

    def step_config(self, refine: int = 0) -> StepConfig:
        cfg = StepConfig(self.numerics.Nt, self.numerics.theta, self.numerics.M)
        return cfg.refined(refine) if refine else cfg

    def resolved(self) -> dict:
        return self.model_dump()


def _field_path(err: dict) -> str:
    return ".".join(str(p) for p in err["loc"]) or "<root>"


def parse_config(data: dict) -> ExperimentConfig:
    """Validate a config mapping; ConfigError names the first bad field."""
    try:
        cfg = ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        err = exc.errors()[0]
        raise ConfigError(f"{_field_path(err)}: {err['msg']}") from None
    cfg.domain_spec()
    cfg.reaction_spec()
    return cfg


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise ConfigError("<root>: config must be a JSON object")
    return parse_config(data)

