"""Declarative experiment configuration (TOML) with dotted-key overrides."""
from __future__ import annotations

import enum
import math
from pathlib import Path
from typing import Any, Optional, Union

import numpy as np
import tomli
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .blocks import CouplingForm, ModelParams
from .fock import DEFAULT_CEILING, DEFAULT_EPSILON, FieldKind, FieldSpec


class ConfigError(ValueError):
    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class Experiment(str, enum.Enum):
    EVOLVE = "evolve"
    EIT = "eit"
    KAPPA_SWEEP = "kappa_sweep"
    VALIDATE = "validate"


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


Number = Union[float, list[float]]


class FieldConfig(_Strict):
    kind: FieldKind
    alpha: Optional[Number] = None
    alpha_sq: Optional[float] = Field(default=None, ge=0)
    added_photons: int = Field(default=0, ge=0)
    xi: Optional[Number] = None
    fock_n: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def _one_alpha(self):
        if self.alpha is not None and self.alpha_sq is not None:
            raise ValueError("give either alpha or alpha_sq, not both")
        return self

    def to_spec(self) -> FieldSpec:
        return FieldSpec(self.kind, alpha=_complex(self.alpha, self.alpha_sq),
                         added_photons=self.added_photons, xi=_complex(self.xi), fock_n=self.fock_n)


def _complex(value, squared=None) -> complex:
    if squared is not None:
        return complex(math.sqrt(squared))
    if value is None:
        return 0j
    if isinstance(value, list):
        if len(value) != 2:
            raise ConfigError(["complex values are written as [re, im]"])
        return complex(value[0], value[1])
    return complex(value)


class ParamsConfig(_Strict):
    delta1: float = 0.0
    delta2: float = 0.0
    lambda1: float = 1.0
    lambda2: float = 1.0
    chi1: float = Field(default=0.0, ge=0)
    chi2: float = Field(default=0.0, ge=0)
    coupling: CouplingForm = CouplingForm.CONSTANT
    kappa1: float = Field(default=0.0, ge=0, le=1)
    kappa2: float = Field(default=0.0, ge=0, le=1)
    vacuum_emission: bool = False

    def to_params(self) -> ModelParams:
        return ModelParams(**self.model_dump())


class GridConfig(_Strict):
    start: float
    stop: float
    samples: int = Field(ge=2)

    @model_validator(mode="after")
    def _ordered(self):
        if self.stop <= self.start:
            raise ValueError("stop must exceed start")
        return self

    def array(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.samples)


class DetectorConfig(_Strict):
    window: float = Field(default=5.0, gt=0)
    rel_threshold: float = Field(default=0.15, gt=0, lt=1)
    min_length: float = Field(default=0.0, ge=0)


class ScanConfig(_Strict):
    """Run once per value; every dotted key in ``key`` receives the same value."""

    key: Union[str, list[str]]
    values: list[Any] = Field(min_length=1)

    @property
    def keys(self) -> list[str]:
        return [self.key] if isinstance(self.key, str) else list(self.key)


class EitConfig(_Strict):
    delta1: GridConfig
    collapse_times: GridConfig = GridConfig(start=0.0, stop=40.0, samples=801)
    reference_field2: FieldConfig = FieldConfig(kind=FieldKind.FOCK, fock_n=0)
    t_star: Optional[float] = None
    t_star_from_endpoints: bool = False
    scan: Optional[ScanConfig] = None


class KappaConfig(_Strict):
    kappas: list[float] = Field(min_length=1)


class ValidateConfig(_Strict):
    seed: int = 42
    cases: int = Field(default=100, ge=1)
    max_cutoff: int = Field(default=20, ge=1, le=30)
    max_time: float = Field(default=20.0, gt=0)
    threshold: float = Field(default=1e-8, gt=0)


class ExperimentConfig(_Strict):
    experiment: Experiment
    name: Optional[str] = None
    description: str = ""
    cutoff_epsilon: float = Field(default=DEFAULT_EPSILON, gt=0, lt=1)
    cutoff_ceiling: int = Field(default=DEFAULT_CEILING, ge=1)
    field1: Optional[FieldConfig] = None
    field2: Optional[FieldConfig] = None
    params: ParamsConfig = ParamsConfig()
    times: Optional[GridConfig] = None
    detector: DetectorConfig = DetectorConfig()
    eit: Optional[EitConfig] = None
    kappa_sweep: Optional[KappaConfig] = None
    validate_: Optional[ValidateConfig] = Field(default=None, alias="validate")
    seed: Optional[int] = None

    model_config = ConfigDict(extra="forbid", populate_by_name=True)


REQUIRED = {
    Experiment.EVOLVE: ("field1", "field2", "times"),
    Experiment.EIT: ("field1", "field2", "eit"),
    Experiment.KAPPA_SWEEP: ("field1", "field2", "times", "kappa_sweep"),
    Experiment.VALIDATE: (),
}


def _format(err) -> str:
    loc = ".".join(str(p) for p in err["loc"]) or "<root>"
    if err["type"] == "extra_forbidden":
        return f"{loc}: unknown key"
    if err["type"] == "missing":
        return f"{loc}: missing required key"
    return f"{loc}: {err['msg']}"


def validate_dict(raw: dict) -> ExperimentConfig:
    """Validate ``raw`` and report every problem at once."""
    errors = []
    exp = raw.get("experiment")
    try:
        exp = Experiment(exp)
    except ValueError:
        exp = None
    if exp is not None:
        errors += [f"{k}: missing required key for experiment '{exp.value}'"
                   for k in REQUIRED[exp] if k not in raw]
    try:
        cfg = ExperimentConfig.model_validate(raw)
    except ValidationError as exc:
        errors += [_format(e) for e in exc.errors()]
        raise ConfigError(errors) from None
    if errors:
        raise ConfigError(errors)
    return cfg


def parse_value(text: str):
    """Interpret an override value as a TOML literal, else as a bare string."""
    try:
        return tomli.loads(f"v = {text}")["v"]
    except tomli.TOMLDecodeError:
        return text


def apply_overrides(raw: dict, overrides: list[str]) -> dict:
    out = _deepcopy(raw)
    for item in overrides:
        if "=" not in item:
            raise ConfigError([f"override '{item}' is not of the form key=value"])
        key, value = item.split("=", 1)
        parts = key.strip().split(".")
        node = out
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ConfigError([f"override '{key}': '{p}' is not a table"])
        node[parts[-1]] = parse_value(value.strip())
    return out


def _deepcopy(d):
    return {k: _deepcopy(v) if isinstance(v, dict) else v for k, v in d.items()}


def load_raw(path) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomli.load(fh)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError([f"{path}: {exc}"]) from None


def load_config(path=None, overrides: list[str] = ()) -> tuple[ExperimentConfig, dict]:
    """Resolved configuration and the raw dict it came from (for provenance)."""
    raw = load_raw(path) if path is not None else {}
    raw = apply_overrides(raw, list(overrides))
    cfg = validate_dict(raw)
    if cfg.name is None and path is not None:
        cfg = cfg.model_copy(update={"name": Path(path).stem})
    return cfg, raw
