"""Declarative experiment configuration."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from splitkit.errors import SplitkitError
from splitkit.problems import ProblemKind

EXPERIMENTS = ("dh-scan", "longtime", "order", "work-precision", "verify-coeffs", "catalog-dump")


class ConfigError(SplitkitError, ValueError):
    """Malformed configuration; the message names the offending field."""


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ProblemConfig(_Strict):
    kind: ProblemKind
    n: int = Field(gt=1, le=64, description="matrix size; 2N for Hamiltonian problems")
    seed: int = Field(0, ge=0)
    options: dict[str, Any] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _even_for_hamiltonian(self):
        if self.kind is ProblemKind.HAMILTONIAN and self.n % 2:
            raise ValueError("Hamiltonian problems need an even size n = 2N")
        return self


class GridConfig(_Strict):
    start: float = Field(gt=0)
    stop: float = Field(gt=0)
    points: int = Field(ge=1, le=10_000)
    spacing: Literal["geometric", "linear"] = "geometric"

    @model_validator(mode="after")
    def _ordered(self):
        if self.stop < self.start:
            raise ValueError("stop must not be below start")
        return self

    def values(self) -> list[float]:
        f = np.geomspace if self.spacing == "geometric" else np.linspace
        return [float(x) for x in f(self.start, self.stop, self.points)]


class ExperimentConfig(_Strict):
    experiment: Literal[EXPERIMENTS]  # type: ignore[valid-type]
    description: str = ""
    schemes: list[str] = Field(default_factory=list)
    problem: ProblemConfig | None = None
    h: list[float] | None = None
    h_grid: GridConfig | None = None
    n_steps: int | None = Field(None, ge=0)
    t_final: float | None = Field(None, gt=0)
    observables: list[str] = Field(default_factory=list)
    record_every: int = Field(1, ge=1)
    dps: int | None = Field(None, ge=16, le=200)
    output: str | None = None

    @field_validator("h")
    @classmethod
    def _positive_steps(cls, v):
        if v is not None and any(not (x > 0) for x in v):
            raise ValueError("step sizes must be positive")
        return v

    @field_validator("schemes")
    @classmethod
    def _known_schemes(cls, v):
        from splitkit.schemes import parse_scheme

        for expr in v:
            if expr == "exact":
                continue
            try:
                parse_scheme(expr)
            except SplitkitError as exc:
                raise ValueError(f"{expr!r}: {exc}") from None
        return v

    @model_validator(mode="after")
    def _required_fields(self):
        e = self.experiment
        needs_problem = e in ("dh-scan", "longtime", "order", "work-precision")
        if needs_problem and self.problem is None:
            raise ValueError(f"experiment {e!r} needs a 'problem'")
        if needs_problem and not self.schemes:
            raise ValueError(f"experiment {e!r} needs a non-empty 'schemes' list")
        if needs_problem and not self.steps():
            raise ValueError(f"experiment {e!r} needs 'h' or 'h_grid'")
        if self.h is not None and self.h_grid is not None:
            raise ValueError("give either 'h' or 'h_grid', not both")
        if e == "longtime" and self.n_steps is None:
            raise ValueError("experiment 'longtime' needs 'n_steps'")
        if e == "work-precision" and self.t_final is None:
            raise ValueError("experiment 'work-precision' needs 't_final'")
        if "exact" in self.schemes and e != "longtime":
            raise ValueError("the exact flow is only available to 'longtime'")
        return self

    def steps(self) -> list[float]:
        if self.h is not None:
            return list(self.h)
        if self.h_grid is not None:
            return self.h_grid.values()
        return []

    def to_json(self) -> str:
        return self.model_dump_json(indent=2, exclude_none=True) + "\n"


def _describe(err: ValidationError) -> str:
    lines = []
    for item in err.errors():
        loc = ".".join(str(x) for x in item["loc"]) or "<root>"
        lines.append(f"{loc}: {item['msg']}")
    return "; ".join(lines)


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{source}: top level must be a JSON object")
    try:
        return ExperimentConfig.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(f"{source}: {_describe(exc)}") from None


def make_config(**fields) -> ExperimentConfig:
    """Build a config from keyword fields, reporting errors as :class:`ConfigError`."""
    try:
        return ExperimentConfig.model_validate(fields)
    except ValidationError as exc:
        raise ConfigError(_describe(exc)) from None


def load_config(path: str | Path) -> ExperimentConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"{p}: cannot read ({exc.strerror})") from None
    return parse_config(text, str(p))


def bundled_configs() -> dict[str, Path]:
    """Reference configs shipped with the package, keyed by stem."""
    root = Path(__file__).with_name("configs")
    return {p.stem: p for p in sorted(root.glob("*.json"))}
