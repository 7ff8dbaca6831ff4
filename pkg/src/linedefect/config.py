"""Run configuration: a flat JSON object validated field by field."""
from __future__ import annotations

import json
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .cone import ConeParams
from .energy import PotentialSpec
from .grid import Grid


class ConfigError(ValueError):
    pass


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    kappa: float = Field(4.0, gt=1.0)
    n: int = Field(65, ge=9, le=513)
    domain_lo: float = -1.0
    domain_hi: float = 1.0

    preset: Literal["constant", "cylindrical", "perturbed-cylindrical", "from-file"] = "cylindrical"
    amplitude: float = Field(1.0, gt=0.0)
    perturb_amplitude: float = Field(0.1, ge=0.0, le=0.5)
    perturb_mode: int = Field(2, ge=0, le=64)
    field_path: Optional[str] = None
    field_source: Literal["oracle", "relaxed", "file"] = "oracle"

    potential: bool = False
    potential_a: float = Field(0.0, ge=0.0)
    potential_s_star: float = Field(0.5, gt=0.0, lt=1.0)
    potential_M: Optional[float] = Field(None, ge=0.0)
    Lambda: Optional[float] = Field(None, ge=0.0)

    max_sweeps: int = Field(20000, ge=1)
    tol: float = Field(1e-10, gt=0.0, lt=1.0)
    multilevel: bool = True
    initial: Literal["auto", "apex", "preset"] = "auto"

    radii: list[float] = Field(default_factory=lambda: [0.125, 0.25, 0.5])
    points: list[list[float]] = Field(default_factory=lambda: [[0.0, 0.0, 0.0]])
    tau: Optional[float] = Field(None, gt=0.0)
    gap: Optional[float] = Field(None, gt=0.0)
    s_min: Optional[float] = Field(None, gt=0.0)
    delta: float = Field(0.05, ge=0.0)
    defect_radius_h: float = Field(8.0, ge=4.0)
    minkowski_r: float = Field(0.5, gt=0.0)
    pinch_inner: float = Field(0.125, gt=0.0, le=1.0)
    pinch_outer: float = Field(4.0, ge=1.0)
    cover_depth: int = Field(3, ge=1, le=6)
    n_pairs: int = Field(20, ge=0)
    sphere_points: int = Field(2000, ge=50)
    verify_level: Literal["quick", "full"] = "quick"

    out: str = "out"
    seed: int = 0
    threads: int = Field(1, ge=1)

    @field_validator("radii")
    @classmethod
    def _radii_positive(cls, v):
        if not v or any(not r > 0 for r in v):
            raise ValueError("radii must be a nonempty list of positive numbers")
        return sorted(v)

    @field_validator("points")
    @classmethod
    def _points_3d(cls, v):
        if any(len(p) != 3 for p in v):
            raise ValueError("every point needs three coordinates")
        return v

    @model_validator(mode="after")
    def _consistent(self):
        if not self.domain_hi > self.domain_lo:
            raise ValueError("domain_hi must exceed domain_lo")
        if (self.preset == "from-file" or self.field_source == "file") and not self.field_path:
            raise ValueError("field_path is required for file input")
        return self

    @property
    def params(self) -> ConeParams:
        return ConeParams(self.kappa)

    @property
    def grid(self) -> Grid:
        return Grid.cube(self.n, self.domain_lo, self.domain_hi)

    @property
    def pot(self) -> PotentialSpec:
        return PotentialSpec(self.potential, self.potential_a, self.potential_s_star, self.potential_M, self.Lambda)


def _format_errors(err: ValidationError) -> str:
    lines = []
    for e in err.errors():
        path = ".".join(str(p) for p in e["loc"]) or "<config>"
        lines.append(f"{path}: {e['msg']}")
    return "; ".join(lines)


def make_config(data: dict | None = None, **overrides) -> RunConfig:
    merged = dict(data or {})
    merged.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return RunConfig(**merged)
    except ValidationError as err:
        raise ConfigError(_format_errors(err)) from None


def load_config(path, **overrides) -> RunConfig:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as err:
            raise ConfigError(f"{path}: not valid JSON ({err.msg} at line {err.lineno})") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object of key/value pairs")
    return make_config(data, **overrides)
