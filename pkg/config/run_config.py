#!/usr/bin/env python3
"""
Run Configuration

Schema of a single verification run: the command, the curve (inline spec or
corpus name), the parameter interval, tolerances, sample counts, the 64-bit
seed and command-specific params. Curve coefficients are exact rationals
written as "p/q" strings (ints and decimal strings are accepted).
Validation failures are raised as ConfigError carrying the dotted path of
the offending field.
"""

import json
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from arclength_lab.errors import ConfigError, CurveSpecError
from arclength_lab.poly_core import PolyCurve, format_rational, parse_rational
from arclength_lab.sampling import MAX_SEED


class Command(str, Enum):
    """Commands that run() dispatches"""
    DECOMPOSE = "decompose"
    VERIFY_IDENTITY = "verify-identity"
    VERIFY_VANDERMONDE = "verify-vandermonde"
    VERIFY_DERIVATIVE_BOUNDS = "verify-derivative-bounds"
    VERIFY_GEOMETRIC = "verify-geometric"
    VERIFY_LBJ = "verify-lbj"
    BANDS_BUILD = "bands-build"
    BANDS_VERIFY = "bands-verify"
    TOWER_BUILD = "tower-build"
    OPERATOR_RATIO = "operator-ratio"
    OPERATOR_SWEEP_KNAPP = "operator-sweep-knapp"
    OPERATOR_CHECK_MLE = "operator-check-mle"
    OPERATOR_CHECK_MLF = "operator-check-mlf"
    CORPUS_LIST = "corpus-list"


SAMPLING_COMMANDS = {
    Command.VERIFY_IDENTITY,
    Command.VERIFY_GEOMETRIC,
    Command.VERIFY_LBJ,
    Command.BANDS_VERIFY,
    Command.TOWER_BUILD,
    Command.OPERATOR_RATIO,
    Command.OPERATOR_SWEEP_KNAPP,
    Command.OPERATOR_CHECK_MLE,
    Command.OPERATOR_CHECK_MLF,
}

CURVELESS_COMMANDS = {Command.VERIFY_VANDERMONDE, Command.BANDS_BUILD, Command.BANDS_VERIFY, Command.CORPUS_LIST}


class CurveSpecModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    dim: int = Field(..., ge=2, description="Ambient dimension d")
    coeffs: List[List[Union[str, int]]] = Field(..., description="Coefficient of s^k at position k, per component")
    name: str = ""

    @field_validator("coeffs")
    @classmethod
    def _normalize_coeffs(cls, value: List[List[Union[str, int]]]) -> List[List[str]]:
        normalized = []
        for component in value:
            row = []
            for coefficient in component:
                try:
                    row.append(format_rational(parse_rational(coefficient)))
                except CurveSpecError as exc:
                    raise ValueError(str(exc)) from exc
            normalized.append(row)
        return normalized

    @model_validator(mode="after")
    def _dim_matches(self) -> "CurveSpecModel":
        if len(self.coeffs) != self.dim:
            raise ValueError(f"dim={self.dim} but {len(self.coeffs)} coefficient lists")
        return self

    def to_curve(self) -> PolyCurve:
        return PolyCurve.from_spec({"dim": self.dim, "coeffs": self.coeffs}, name=self.name)


class IntervalModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    lo: float
    hi: float

    @model_validator(mode="after")
    def _ordered(self) -> "IntervalModel":
        if not self.lo < self.hi:
            raise ValueError(f"interval needs lo < hi, got [{self.lo}, {self.hi}]")
        return self


class Tolerances(BaseModel):
    model_config = ConfigDict(extra="forbid")

    root_tol: float = Field(1e-10, gt=0)
    quad_rel_tol: float = Field(1e-9, gt=0)
    comparability_ratio: float = Field(1e4, gt=1)
    identity_rel_tol: float = Field(1e-6, gt=0)


class RunConfig(BaseModel):
    """One verification run"""
    model_config = ConfigDict(extra="forbid", use_enum_values=False)

    command: Command
    curve: Optional[CurveSpecModel] = None
    corpus: Optional[str] = None
    interval: Optional[IntervalModel] = None
    tolerances: Tolerances = Field(default_factory=Tolerances)
    samples: Optional[int] = Field(None, gt=0)
    seed: Optional[int] = Field(None, ge=0, le=MAX_SEED)
    K: int = Field(0, ge=0)
    params: Dict[str, Any] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _command_requirements(self) -> "RunConfig":
        if self.curve is not None and self.corpus is not None:
            raise ValueError("give either an inline curve or a corpus name, not both")
        if self.command not in CURVELESS_COMMANDS and self.curve is None and self.corpus is None:
            raise ValueError(f"command {self.command.value} needs a curve or a corpus name")
        if self.command in SAMPLING_COMMANDS and self.seed is None:
            raise ValueError(f"command {self.command.value} samples and needs a seed")
        return self

    @property
    def is_sampling(self) -> bool:
        return self.command in SAMPLING_COMMANDS

    def echo(self) -> Dict[str, Any]:
        """Canonical config echo for reports"""
        return self.model_dump(mode="json", exclude_none=True)


def _field_path(error: Dict[str, Any]) -> str:
    return ".".join(str(part) for part in error.get("loc", ()))


def load_run_config(data: Dict[str, Any]) -> RunConfig:
    """Validate a raw mapping; raises ConfigError (CurveSpecError under 'curve') with the field path"""
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        first = exc.errors()[0]
        path = _field_path(first)
        message = first.get("msg", "invalid value")
        if path.startswith("curve"):
            raise CurveSpecError(message, path) from exc
        raise ConfigError(message, path) from exc


def load_run_config_file(filepath: Union[str, Path]) -> RunConfig:
    try:
        data = json.loads(Path(filepath).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read run config {filepath}: {exc}") from exc
    return load_run_config(data)


if __name__ == "__main__":
    example = load_run_config({
        "command": "decompose",
        "curve": {"dim": 3, "coeffs": [["0", "1"], ["0", "0", "1"], ["0", "0", "0", "1"]]},
    })
    print(json.dumps(example.echo(), indent=2))
