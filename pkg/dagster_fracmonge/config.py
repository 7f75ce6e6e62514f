import logging
import tomllib
import typing as t
from pathlib import Path

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from dagster_fracmonge.types import SuiteName

logger = logging.getLogger(__name__)

ALL_SUITES: tuple[SuiteName, ...] = (
    "constants",
    "geometry",
    "assemble",
    "eig",
    "fractional",
    "extension",
    "verification",
)

RouteName = t.Literal["spectral", "semigroup", "extension"]


class ConfigError(ValueError):
    """The experiment configuration could not be read or is invalid."""

    def __init__(self, message: str, source: str | None = None) -> None:
        super().__init__(message if source is None else f"{source}: {message}")
        self.source = source


def _check_order(value: float) -> float:
    if not 0.0 < value < 1.0:
        raise ValueError(f"s must lie in (0,1), got {value}")
    return value


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class PotentialConfig(_Section):
    preset: t.Literal["quad", "aniso", "power1d", "perturbed_quad"] = "quad"
    dim: t.Literal[1, 2] = 1
    c: float = 1.0
    a11: float = 1.0
    a12: float = 0.0
    a22: float = 1.0
    p: float = 4.0
    eps: float = 0.0

    @model_validator(mode="after")
    def check_preset(self) -> "PotentialConfig":
        match self.preset:
            case "quad":
                if self.c <= 0.0:
                    raise ValueError(f"quad requires c > 0, got {self.c}")
            case "aniso":
                if self.dim != 2:
                    raise ValueError("aniso requires dim = 2")
                eigenvalues = np.linalg.eigvalsh(np.array([[self.a11, self.a12], [self.a12, self.a22]]))
                if eigenvalues[0] <= 0.0:
                    raise ValueError("aniso requires a symmetric positive definite matrix")
            case "power1d":
                if self.dim != 1 or self.p <= 2.0:
                    raise ValueError("power1d requires dim = 1 and p > 2")
            case "perturbed_quad":
                if self.eps < 0.0:
                    raise ValueError(f"perturbed_quad requires eps >= 0, got {self.eps}")
        return self


class SectionConfig(_Section):
    center: list[float] = Field(default_factory=lambda: [0.0])
    height: float = 1.0
    resolution: int = 2000
    rings: int | None = None

    @field_validator("height")
    @classmethod
    def check_height(cls, value: float) -> float:
        if value <= 0.0:
            raise ValueError(f"section height must be positive, got {value}")
        return value

    @field_validator("resolution")
    @classmethod
    def check_resolution(cls, value: int) -> int:
        if value < 8:
            raise ValueError(f"resolution must be at least 8, got {value}")
        return value

    @field_validator("rings")
    @classmethod
    def check_rings(cls, value: int | None) -> int | None:
        if value is not None and value < 2:
            raise ValueError(f"rings must be at least 2, got {value}")
        return value


class FractionalConfig(_Section):
    s_values: list[float] = Field(default_factory=lambda: [0.25, 0.5, 0.75])
    equivalence_s_values: list[float] = Field(default_factory=lambda: [0.3, 0.5, 0.7])
    trace_s_values: list[float] = Field(default_factory=lambda: [0.3, 0.5, 0.7])
    routes: list[RouteName] = Field(default_factory=lambda: ["spectral", "semigroup", "extension"])
    modes: int | None = None
    input_csv: str | None = None
    samples: int = 5
    max_principle_trials: int = 20
    energy_modes: int = 50

    @field_validator("s_values", "equivalence_s_values", "trace_s_values")
    @classmethod
    def check_orders(cls, values: list[float]) -> list[float]:
        return [_check_order(v) for v in values]

    @field_validator("modes")
    @classmethod
    def check_modes(cls, value: int | None) -> int | None:
        if value is not None and value < 1:
            raise ValueError(f"modes must be positive, got {value}")
        return value

    @field_validator("samples", "max_principle_trials", "energy_modes")
    @classmethod
    def check_counts(cls, value: int) -> int:
        if value < 1:
            raise ValueError(f"counts must be positive, got {value}")
        return value


class VerificationConfig(_Section):
    kappas: list[float] = Field(default_factory=lambda: [0.25, 0.5])
    outer_ratio: float = 1.5
    inner_height_fraction: float = 0.25
    sigma: float = 0.5
    tau: float = 1.0
    eps: float = 0.25
    trials: int = 10_000
    poincare_samples: int = 20

    @field_validator("trials", "poincare_samples")
    @classmethod
    def check_counts(cls, value: int) -> int:
        if value < 1:
            raise ValueError(f"counts must be positive, got {value}")
        return value

    @field_validator("kappas")
    @classmethod
    def check_kappas(cls, values: list[float]) -> list[float]:
        if not values or any(not 0.0 < k <= 1.0 for k in values):
            raise ValueError("kappas must be a nonempty list of values in (0,1]")
        return values

    @field_validator("sigma", "eps")
    @classmethod
    def check_unit(cls, value: float) -> float:
        if not 0.0 < value < 1.0:
            raise ValueError(f"expected a value in (0,1), got {value}")
        return value

    @field_validator("tau")
    @classmethod
    def check_tau(cls, value: float) -> float:
        if value <= 0.0:
            raise ValueError(f"tau must be positive, got {value}")
        return value

    @model_validator(mode="after")
    def check_nesting(self) -> "VerificationConfig":
        if self.outer_ratio < max(self.kappas):
            raise ValueError("outer_ratio must be at least the largest kappa")
        if not 0.0 < self.inner_height_fraction * self.outer_ratio < 1.0:
            raise ValueError("inner_height_fraction * outer_ratio must lie in (0,1)")
        return self


class RunConfig(_Section):
    suites: list[SuiteName] = Field(default_factory=lambda: list(ALL_SUITES))
    seed: int = Field(default=0, ge=0, lt=2**64)
    output_dir: str = "fracmonge-out"


class ExperimentConfig(_Section):
    """A complete experiment. Every sub-model maps to one table of the TOML
    file:

    ```toml
    [potential]
    preset = "quad"
    dim = 1

    [section]
    center = [0.0]
    height = 1.0
    resolution = 2000

    [fractional]
    s_values = [0.25, 0.5, 0.75]

    [run]
    suites = ["constants", "geometry"]
    seed = 7
    ```
    """

    potential: PotentialConfig = Field(default_factory=PotentialConfig)
    section: SectionConfig = Field(default_factory=SectionConfig)
    fractional: FractionalConfig = Field(default_factory=FractionalConfig)
    verification: VerificationConfig = Field(default_factory=VerificationConfig)
    run: RunConfig = Field(default_factory=RunConfig)

    @model_validator(mode="after")
    def check_dimensions(self) -> "ExperimentConfig":
        if len(self.section.center) != self.potential.dim:
            raise ValueError(
                f"section center has {len(self.section.center)} coordinates, potential dim is {self.potential.dim}"
            )
        return self

    def with_overrides(
        self,
        *,
        output_dir: str | None = None,
        suites: t.Sequence[str] | None = None,
        seed: int | None = None,
    ) -> "ExperimentConfig":
        """Returns a validated copy with the given `[run]` values replaced."""
        run = self.run.model_dump()
        if output_dir is not None:
            run["output_dir"] = output_dir
        if suites is not None:
            run["suites"] = list(suites)
        if seed is not None:
            run["seed"] = seed
        data = self.model_dump()
        data["run"] = run
        try:
            return ExperimentConfig.model_validate(data)
        except ValidationError as e:
            raise ConfigError(_format_validation_error(e)) from e


def _format_validation_error(error: ValidationError) -> str:
    parts = []
    for item in error.errors():
        location = ".".join(str(p) for p in item["loc"]) or "config"
        parts.append(f"{location}: {item['msg']}")
    return "; ".join(parts)


def parse_experiment_config(data: dict[str, t.Any], source: str | None = None) -> ExperimentConfig:
    for header, table in data.items():
        if not isinstance(table, dict):
            raise ConfigError(f"top level key {header!r} must be a [section] header", source)
        for key, value in table.items():
            if isinstance(value, dict):
                raise ConfigError(f"nested table [{header}.{key}] is not supported", source)
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(_format_validation_error(e), source) from e


def load_experiment_config(path: str | Path) -> ExperimentConfig:
    """Reads and validates an experiment TOML file.

    Raises:
        ConfigError: the file is unreadable, is not valid TOML, nests tables
            or fails validation
    """
    path = Path(path)
    try:
        with path.open("rb") as f:
            data = tomllib.load(f)
    except OSError as e:
        raise ConfigError(f"cannot read config: {e.strerror}", str(path)) from e
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"invalid TOML: {e}", str(path)) from e
    config = parse_experiment_config(data, str(path))
    logger.debug(f"loaded experiment config from {path}")
    return config
