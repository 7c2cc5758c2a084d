"""Run configuration: a JSON document validated into pydantic models.

Unknown keys are rejected at every level. Fields left out are filled from
``psh_extension_lab.config.settings`` when the run starts.
"""

from __future__ import annotations

import json
import logging
from typing import Annotated, Literal, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from psh_extension_lab.config import settings
from psh_extension_lab.errors import LabError
from psh_extension_lab.functions import Expression
from psh_extension_lab.geometry import ComplexPoint
from psh_extension_lab.singular_sets import (
    SingularSet,
    cantor_product,
    empty_set,
    finite_union,
    generalized_cantor_product,
    hyperplane_re_z1,
    hypersurface_set,
    point_cloud,
    unit_sphere,
)

logger = logging.getLogger(__name__)

Command = Literal["certify", "envelope", "abp", "extend", "catalog", "demo-counterexample"]


class ConfigError(LabError):
    """Raised for malformed or out-of-range configuration; carries the field path."""

    exit_code = 3

    def __init__(self, field_path: str, detail: str):
        self.field_path = field_path
        self.detail = detail
        super().__init__(f"{field_path}: {detail}")


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class GridConfig(_Strict):
    n: int = Field(default=2, ge=1, le=3)
    delta: float | None = Field(default=None, gt=0)
    deltas: list[float] | None = None
    points_per_axis: int = Field(default_factory=lambda: settings.points_per_axis, ge=5)
    center: list[float] | None = None

    @field_validator("points_per_axis")
    @classmethod
    def _odd(cls, v: int) -> int:
        if v % 2 == 0:
            raise ValueError(f"points_per_axis must be odd so the grid center is a node, got {v}")
        return v

    @field_validator("deltas")
    @classmethod
    def _positive_deltas(cls, v: list[float] | None) -> list[float] | None:
        if v is not None and any(d <= 0 for d in v):
            raise ValueError("every delta must be > 0")
        return v

    @model_validator(mode="after")
    def _center_dimension(self) -> "GridConfig":
        if self.center is not None and len(self.center) != 2 * self.n:
            raise ValueError(f"center needs {2 * self.n} coordinates, got {len(self.center)}")
        return self


class EmptySetConfig(_Strict):
    kind: Literal["empty"]


class HyperplaneConfig(_Strict):
    kind: Literal["hyperplane"]
    offset: float = 0.0


class SphereConfig(_Strict):
    kind: Literal["sphere"]
    center: list[float] | None = None
    radius: float = Field(default=1.0, gt=0)


class CantorConfig(_Strict):
    kind: Literal["cantor"]
    depth: int = Field(default=3, ge=0, le=8)
    offset: list[float] | None = None
    ratio: float = Field(default=1.0 / 3.0, gt=0, lt=0.5)


class GeneralizedCantorConfig(_Strict):
    kind: Literal["generalized_cantor"]
    levels: int = Field(default=3, ge=1, le=12)
    depth: int = Field(default=3, ge=0, le=8)


class LevelSetConfig(_Strict):
    kind: Literal["level_set"]
    g: str
    lipschitz: float = Field(gt=0)

    @field_validator("g")
    @classmethod
    def _parses(cls, v: str) -> str:
        Expression(v)
        return v


class PointsConfig(_Strict):
    kind: Literal["points"]
    points: list[list[float]] = Field(min_length=1)


class UnionConfig(_Strict):
    kind: Literal["union"]
    members: list[SetConfig] = Field(min_length=1)


SetConfig = Annotated[
    Union[
        EmptySetConfig,
        HyperplaneConfig,
        SphereConfig,
        CantorConfig,
        GeneralizedCantorConfig,
        LevelSetConfig,
        PointsConfig,
        UnionConfig,
    ],
    Field(discriminator="kind"),
]
UnionConfig.model_rebuild()


def build_set(config: SetConfig, n: int, path: str = "exclude") -> SingularSet:
    if isinstance(config, EmptySetConfig):
        return empty_set()
    if isinstance(config, HyperplaneConfig):
        return hyperplane_re_z1(n, config.offset)
    if isinstance(config, SphereConfig):
        return unit_sphere(n, config.center, config.radius)
    if isinstance(config, CantorConfig):
        return cantor_product(config.depth, n, config.offset, config.ratio)
    if isinstance(config, GeneralizedCantorConfig):
        return generalized_cantor_product(config.levels, config.depth, n)
    if isinstance(config, PointsConfig):
        for i, coords in enumerate(config.points):
            if len(coords) != 2 * n:
                raise ConfigError(f"{path}.points.{i}", f"needs {2 * n} coordinates, got {len(coords)}")
        return point_cloud([ComplexPoint(tuple(coords)) for coords in config.points])
    if isinstance(config, UnionConfig):
        return finite_union(*(build_set(m, n, f"{path}.members.{i}") for i, m in enumerate(config.members)))
    return hypersurface_set(Expression(config.g), config.lipschitz)


class ParamsConfig(_Strict):
    radius_factors: list[float] | None = None
    certify_radius_factors: list[float] | None = None
    certify_tol: float | None = Field(default=None, ge=0)
    margin_factor: float | None = Field(default=None, ge=0)
    psh_margin_factor: float | None = Field(default=None, ge=0)
    quadrature_nodes: int | None = Field(default=None, ge=8)
    direction_count: int | None = Field(default=None, ge=1)
    seed: int | None = None
    envelope_tol: float | None = Field(default=None, gt=0)
    contact_tol: float | None = Field(default=None, ge=0)
    chain_tol: float | None = Field(default=None, ge=0)
    final_tol: float | None = Field(default=None, ge=0)
    oracle: bool = False


class OutputConfig(_Strict):
    json_path: str | None = Field(default=None, alias="json")
    csv_path: str | None = Field(default=None, alias="csv")
    verbosity: Literal["DEBUG", "INFO", "WARNING", "ERROR"] | None = None

    model_config = ConfigDict(extra="forbid", populate_by_name=True)


class RunConfig(_Strict):
    command: Command
    target: str | None = None
    grid: GridConfig = Field(default_factory=GridConfig)
    exclude: SetConfig | None = None
    params: ParamsConfig = Field(default_factory=ParamsConfig)
    output: OutputConfig = Field(default_factory=OutputConfig)

    def seed(self) -> int:
        return settings.seed if self.params.seed is None else self.params.seed


_DISCRIMINATOR_TAGS = {
    "empty", "hyperplane", "sphere", "cantor", "generalized_cantor", "level_set", "points", "union",
}


def _field_path(loc: tuple) -> str:
    parts = [str(p) for p in loc if not (isinstance(p, str) and p in _DISCRIMINATOR_TAGS)]
    return ".".join(parts) or "$"


def config_from_dict(data: dict) -> RunConfig:
    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        path = _field_path(tuple(first["loc"]))
        logger.error("Invalid run configuration at %s: %s", path, first["msg"])
        raise ConfigError(path, first["msg"]) from e


def parse_config(text: str) -> RunConfig:
    """Validate a UTF-8 JSON document into a RunConfig."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError("$", f"malformed JSON: {e.msg} (line {e.lineno})") from e
    if not isinstance(data, dict):
        raise ConfigError("$", "configuration must be a JSON object")
    return config_from_dict(data)
