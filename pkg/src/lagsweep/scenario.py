"""JSON scenario files: model descriptions plus command parameters."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .errors import InputError
from .lagrangian import LagrangianModel, model_from_json
from .planar import PlaneCurve, SweepRegion
from .symplectic import DarbouxPoint


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class Box(_Strict):
    lo: list[float]
    hi: list[float]


class Region(_Strict):
    s_min: float = 0.0
    s_max: float = 1.0
    t_min: float = 0.0
    t_max: float = 2.0 * np.pi

    def build(self) -> SweepRegion:
        return SweepRegion(self.s_min, self.s_max, self.t_min, self.t_max)


class Scenario(_Strict):
    """Every field is optional; each command reads the ones it needs."""

    model: Optional[dict] = None
    curve: Optional[dict] = None
    seed: Optional[int] = None
    tol: Optional[float] = Field(default=None, gt=0)
    box: Optional[Box] = None
    grid: int = Field(default=12, ge=8)
    frames: list[dict] = Field(default_factory=list)
    samples: int = Field(default=20, ge=1)
    step: float = Field(default=1e-5, gt=0)
    point: Optional[list[float]] = None
    partner: Optional[list[float]] = None
    k: int = Field(default=3, ge=3)
    starts: int = Field(default=200, ge=1)
    branch: Literal["forward", "backward"] = "forward"
    iterations: int = Field(default=1, ge=1)
    region: Region = Region()
    mc_samples: int = Field(default=1_000_000, ge=1)

    @model_validator(mode="after")
    def _box_shape(self) -> "Scenario":
        if self.box is not None and len(self.box.lo) != len(self.box.hi):
            raise ValueError("box lo and hi must have the same length")
        return self

    def lagrangian(self) -> LagrangianModel:
        if self.model is None:
            raise InputError("scenario needs a 'model'")
        return model_from_json(self.model)

    def plane_curve(self) -> PlaneCurve:
        if self.curve is None:
            raise InputError("scenario needs a 'curve'")
        return PlaneCurve.from_json(self.curve)

    def box_pair(self):
        return None if self.box is None else (self.box.lo, self.box.hi)

    def test_point(self, name: str = "point") -> DarbouxPoint:
        v = getattr(self, name)
        if v is None:
            raise InputError(f"scenario needs '{name}'")
        if len(v) % 2:
            raise InputError(f"'{name}' must have even length (x then y)")
        return DarbouxPoint.from_flat(v)


def parse_scenario(text: str) -> Scenario:
    try:
        return Scenario.model_validate(json.loads(text))
    except json.JSONDecodeError as exc:
        raise InputError(f"invalid JSON: {exc}") from exc
    except ValidationError as exc:
        raise InputError(str(exc)) from exc


def load_scenario(path: str | Path | None) -> Scenario:
    if path is None:
        return Scenario()
    return parse_scenario(Path(path).read_text())
