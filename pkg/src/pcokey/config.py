"""Experiment configuration: one JSON document, validated before any run."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .errors import ConfigError

_STRICT = ConfigDict(extra="forbid")


class PhaseFunctionConfig(BaseModel):
    model_config = _STRICT
    kind: Literal["peskin", "custom-tabulated"] = "peskin"
    gamma: float = Field(2.0, gt=0.0)
    table: list[float] | None = None

    @model_validator(mode="after")
    def _table_needed(self):
        if self.kind == "custom-tabulated" and not self.table:
            raise ValueError("custom-tabulated phase function needs a table")
        return self


class Tolerances(BaseModel):
    model_config = _STRICT
    boundary: float = Field(1e-10, gt=0.0)
    fixed_point: float = Field(1e-12, gt=0.0)


class ExperimentConfig(BaseModel):
    model_config = _STRICT

    phase_function: PhaseFunctionConfig = PhaseFunctionConfig()
    epsilon: float = 0.02
    n: int = Field(2, ge=2)
    m_tilde: int = Field(10, ge=1)
    p_grid: list[float] = [0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45]
    d: int = Field(1, ge=1)
    trials: int = Field(10_000, ge=1)
    mc_trials: int = Field(100_000, ge=100)
    seed: int = Field(0, ge=0, lt=2 ** 64)
    jammer: Literal["none", "uniform-random", "adversarial-grid"] = "none"
    jam_strategies: list[Literal["none", "uniform-random", "adversarial-grid"]] = [
        "none", "uniform-random", "adversarial-grid"]
    jam_grid_points: int = Field(512, ge=2)
    jam_sessions: int = Field(200, ge=1)
    tau_buckets: int = Field(10, ge=1)
    cycle_cap: int = Field(1000, ge=1)
    rho: float = Field(0.0, ge=0.0)
    delay: list[list[float]] | None = None
    phase_sampling: Literal["difference", "iid"] = "difference"
    keyrate_exact: bool = True
    out_dir: str = "out"
    tolerances: Tolerances = Tolerances()

    @field_validator("epsilon")
    @classmethod
    def _eps(cls, v):
        if not (0.0 < v < 1.0):
            raise ValueError("must lie in the open interval (0, 1)")
        return v

    @field_validator("p_grid")
    @classmethod
    def _pgrid(cls, v):
        if not v:
            raise ValueError("must not be empty")
        for p in v:
            if not (0.0 < p < 0.5):
                raise ValueError(f"entry {p!r} outside (0, 0.5)")
        return v

    @model_validator(mode="after")
    def _cross(self):
        if self.jammer == "adversarial-grid" and self.n != 2:
            raise ValueError("adversarial-grid jammer requires n = 2")
        if self.delay is not None:
            if len(self.delay) != self.n or any(len(r) != self.n for r in self.delay):
                raise ValueError(f"delay must be an {self.n}x{self.n} matrix")
        return self


def _path(err) -> str:
    return ".".join(str(x) for x in err["loc"]) or "config"


def parse_config(doc: dict) -> ExperimentConfig:
    """Validate a decoded JSON document; errors name the offending field."""
    try:
        return ExperimentConfig.model_validate(doc)
    except ValidationError as exc:
        first = exc.errors()[0]
        path = _path(first)
        msg = first["msg"]
        if first["type"] == "extra_forbidden":
            msg = "unknown key"
        raise ConfigError(msg, path) from None


def load_config(path: str | Path | None) -> ExperimentConfig:
    if path is None:
        return parse_config({})
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}", "config") from None
    if not isinstance(doc, dict):
        raise ConfigError("top level must be an object", "config")
    return parse_config(doc)
