"""Scenario files: the JSON configuration read by every command."""

import json
from pathlib import Path
from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .tonelli import Model, build_model
from .types import ScenarioError

Task = Literal["alpha", "beta", "rotvec", "cycle", "diameter", "verify-graph", "lp-measure", "oracle"]
ModelName = Literal["integrable", "pendulum", "two_dof_pendulum", "magnetic"]
OracleName = Literal["pendulum_alpha", "pendulum_beta", "pendulum_period", "pendulum_momentum"]

Vector = float | list[float]

# (N, dt, v_max) for value iteration; v_max * dt * N stays below N / 2
VALUE_ITERATION_DEFAULTS: dict[str, tuple[int, float, float]] = {
    "integrable": (256, 0.2, 2.4),
    "magnetic": (256, 0.2, 2.4),
    "pendulum": (256, 0.05, 3.0),
    "two_dof_pendulum": (32, 0.1, 3.0),
}

ORACLE_ARGUMENT: dict[str, str] = {
    "pendulum_alpha": "c",
    "pendulum_beta": "h",
    "pendulum_period": "E",
    "pendulum_momentum": "c",
}


class ModelParams(BaseModel):
    """Overrides of a registry model's parameters."""

    model_config = ConfigDict(extra="forbid")

    dim: int | None = Field(default=None, ge=1, le=2)
    amplitude: float | None = None
    offset: float = 0.0
    kinetic: float | list[float] | list[list[float]] | None = None
    magnetic: Vector | None = None
    modulation: Vector | None = None


class Scenario(BaseModel):
    """One run of one task on one model.

    Numeric fields left unset fall back to per-model defaults at run time; the
    echo written into result files is `model_dump(mode="json")`.
    """

    model_config = ConfigDict(extra="forbid")

    model: ModelName
    task: Task
    params: ModelParams = Field(default_factory=ModelParams)

    # Value iteration
    N: int | None = Field(default=None, ge=16)
    dt: float | None = Field(default=None, gt=0)
    tol: float = Field(default=1e-4, gt=0)
    v_max: float | None = Field(default=None, gt=0)
    relaxation: float = Field(default=0.5, gt=0, le=1)
    max_sweeps: int = Field(default=50_000, ge=1)

    # Class and rotation-vector grids
    c_min: Vector = -2.0
    c_max: Vector = 2.0
    steps: int = Field(default=257, ge=2)
    h_min: Vector = -1.5
    h_max: Vector = 1.5
    h_steps: int = Field(default=121, ge=2)

    # Single-point queries
    c: Vector | None = None
    h: Vector | None = None
    E: float | None = None
    x: float | None = None
    oracle: OracleName | None = None

    # Orbits and ensembles
    T: float = Field(default=1000.0, gt=0)
    orbit_dt: float = Field(default=0.05, gt=0)
    window: float | None = Field(default=None, gt=0)
    burn_in: float | None = Field(default=None, ge=0)
    x0: Vector | None = None
    p0: Vector | None = None
    flow: list[float] | None = None
    starts: list[list[float]] | None = None
    energies: list[float] | None = None
    ensemble_size: int = Field(default=8, ge=1)

    # Graph checks
    graph: str | None = None
    smoothing: int = Field(default=0, ge=0)
    curves: int = Field(default=100, ge=0)

    # Linear program
    N_x: int = Field(default=64, ge=2)
    N_v: int = Field(default=33, ge=2)
    lp_v_max: float = Field(default=2.0, gt=0)
    lp_dt: float = Field(default=0.05, gt=0)

    seed: int | None = None
    output: str | None = None

    @model_validator(mode="after")
    def _task_fields(self) -> "Scenario":
        missing: list[str] = []
        if self.task == "oracle":
            if self.oracle is None:
                missing.append("oracle")
            elif getattr(self, ORACLE_ARGUMENT[self.oracle]) is None:
                missing.append(ORACLE_ARGUMENT[self.oracle])
            if self.oracle == "pendulum_momentum" and self.x is None:
                missing.append("x")
        elif self.task in ("rotvec",) or (self.task == "cycle" and self.flow is None):
            missing.extend(name for name in ("x0", "p0") if getattr(self, name) is None)
        elif self.task == "cycle" and self.x0 is None:
            missing.append("x0")
        elif self.task == "verify-graph" and self.c is None and self.graph is None:
            missing.append("c")
        elif self.task == "lp-measure" and self.h is None:
            missing.append("h")
        if missing:
            raise ValueError(f"task {self.task!r} requires {', '.join(missing)}")
        if self.randomized and self.seed is None:
            raise ValueError(f"task {self.task!r} draws random samples and requires a seed")
        return self

    @property
    def randomized(self) -> bool:
        """Whether the run draws random numbers (and so needs a seed)."""
        if self.task == "verify-graph":
            return self.curves > 0
        if self.task == "diameter":
            return self.starts is None and (self.flow is not None or self.energies is None)
        return False

    def build_model(self) -> Model:
        return build_model(self.model, **self.params.model_dump())

    def value_iteration(self) -> tuple[int, float, float]:
        """(N, dt, v_max) with per-model defaults filled in."""
        N, dt, v_max = VALUE_ITERATION_DEFAULTS[self.model]
        return self.N or N, self.dt or dt, self.v_max or v_max

    def echo(self) -> dict[str, Any]:
        return self.model_dump(mode="json")


def _describe(error: ValidationError) -> str:
    parts = []
    for item in error.errors():
        location = ".".join(str(part) for part in item["loc"])
        message = item["msg"].removeprefix("Value error, ")
        parts.append(f"{location}: {message}" if location else message)
    return "; ".join(parts)


def parse_scenario(data: Any, **overrides: Any) -> Scenario:
    """Validate a scenario object, applying non-None overrides first.

    Raises:
        ScenarioError: Naming every offending field
    """
    if not isinstance(data, dict):
        raise ScenarioError("A scenario must be a single JSON object")
    merged = {**data, **{k: v for k, v in overrides.items() if v is not None}}
    try:
        return Scenario.model_validate(merged)
    except ValidationError as e:
        raise ScenarioError(f"Invalid scenario: {_describe(e)}") from e


def load_scenario(path: Path | None, **overrides: Any) -> Scenario:
    """Read a scenario file (or start from an empty object) and validate it."""
    data: Any = {}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as f:
                data = json.load(f)
        except OSError as e:
            raise ScenarioError(f"Cannot read scenario {path}: {e}") from e
        except json.JSONDecodeError as e:
            raise ScenarioError(f"Scenario {path} is not valid JSON: {e}") from e
    return parse_scenario(data, **overrides)
