"""Scenario files: YAML documents validated against a strict schema.

Keys are camelCase; unknown keys are rejected. Money amounts are integer
microcredits (YAML allows ``50_000_000``). Rates (``commissionRate``,
``reputationFloor``, ``initialMarkup``) accept a number or a ``"p/q"`` string
and are held as exact fractions.
"""

from __future__ import annotations

import hashlib
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Any, Literal, Optional, Union

import pydantic
import yaml
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from pydantic.alias_generators import to_camel

from lunamarket import codec
from lunamarket.agents import ClientSpec, CoveragePlan, JobPlan, RobotSpec
from lunamarket.errors import ParseError, ValidationError
from lunamarket.marketplace import DEFAULT_COMMISSION, DEFAULT_REPUTATION_FLOOR, Requirements
from lunamarket.netsim import EARTH_LATENCY_MS, MESH_LATENCY_MS, LinkSpec
from lunamarket.selenography import (
    LUNAR_RADIUS_M,
    CellId,
    DistanceModel,
    MatrixDistances,
    TilingDistances,
    build_tiling,
)

RateLike = Union[int, float, str]


def to_fraction(v: Any) -> Fraction:
    if isinstance(v, bool):
        raise ValueError("expected a number or 'p/q' string")
    try:
        return Fraction(str(v).strip())
    except (ValueError, ZeroDivisionError):
        raise ValueError(f"not a rational number: {v!r}") from None


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid", alias_generator=to_camel, populate_by_name=True,
                              frozen=True)


class RequirementsConfig(_Model):
    min_resolution: Optional[float] = None
    required_sensors: list[str] = []
    allowed_algorithms: list[str] = []

    def build(self) -> Requirements:
        return Requirements(
            float("inf") if self.min_resolution is None else self.min_resolution,
            frozenset(self.required_sensors),
            frozenset(self.allowed_algorithms),
        )


class DistanceMatrixConfig(_Model):
    sites: list[str]
    meters: list[list[float]]

    @model_validator(mode="after")
    def _well_formed(self) -> DistanceMatrixConfig:
        MatrixDistances(self.sites, self.meters)
        return self


class GeographyConfig(_Model):
    tiling_frequency: Optional[int] = Field(default=None, ge=1)
    radius_m: float = Field(default=LUNAR_RADIUS_M, gt=0)
    explicit_distance_matrix: Optional[DistanceMatrixConfig] = None
    coverage_cells: Optional[list[str]] = None  # default: every site

    @model_validator(mode="after")
    def _exactly_one(self) -> GeographyConfig:
        if (self.tiling_frequency is None) == (self.explicit_distance_matrix is None):
            raise ValueError("exactly one of tilingFrequency / explicitDistanceMatrix is required")
        return self


class LinkConfig(_Model):
    a: str
    b: str
    latency_ms: int = Field(ge=0)
    jitter_ms: int = Field(default=0, ge=0)
    bandwidth_bytes_per_sec: Optional[int] = Field(default=None, gt=0)
    drop_prob: float = Field(default=0.0, ge=0.0, le=1.0)
    partitioned: bool = False

    def build(self) -> tuple[str, str, LinkSpec]:
        return self.a, self.b, LinkSpec(self.latency_ms, self.jitter_ms, self.bandwidth_bytes_per_sec,
                                        self.drop_prob, self.partitioned)


class FaultConfig(_Model):
    at_ms: int = Field(ge=0)
    kind: Literal["partition", "unpartition", "drop", "crash", "restore"]
    target: Union[str, list[str]]
    value: Optional[float] = None


class TopologyConfig(_Model):
    sequencer: str = "sequencer"
    mesh_latency_ms: int = Field(default=MESH_LATENCY_MS, ge=0)
    earth_latency_ms: int = Field(default=EARTH_LATENCY_MS, ge=EARTH_LATENCY_MS)
    jitter_ms: int = Field(default=0, ge=0)
    drop_prob: float = Field(default=0.0, ge=0.0, le=1.0)
    bandwidth_bytes_per_sec: Optional[int] = Field(default=None, gt=0)
    links: list[LinkConfig] = []
    faults: list[FaultConfig] = []


class RobotConfig(_Model):
    id: str
    home_cell: str
    speed_mps: float = Field(default=0.1, gt=0)
    cost_rate: int = Field(default=2_000_000, ge=0)
    initial_markup: RateLike = 0
    undercut_step: int = Field(default=1, ge=1)
    sensors: list[str] = ["camera"]
    map_resolution: float = Field(default=0.1, gt=0)
    mapping_sec_per_cell: float = Field(default=60.0, ge=0)
    algorithm: str = "visual-slam"
    planning_ms: int = Field(default=0, ge=0)
    blob_bytes_per_cell: int = Field(default=256 * 1024, ge=1)
    initial_balance: int = Field(default=0, ge=0)

    @field_validator("initial_markup")
    @classmethod
    def _markup(cls, v: RateLike) -> RateLike:
        if to_fraction(v) < 0:
            raise ValueError("markup must be non-negative")
        return v

    def build(self) -> RobotSpec:
        return RobotSpec(
            id=self.id, home_cell=self.home_cell, speed_mps=self.speed_mps, cost_rate=self.cost_rate,
            initial_markup=to_fraction(self.initial_markup), undercut_step=self.undercut_step,
            sensors=frozenset(self.sensors), map_resolution=self.map_resolution,
            mapping_sec_per_cell=self.mapping_sec_per_cell, algorithm=self.algorithm,
            planning_ms=self.planning_ms, blob_bytes_per_cell=self.blob_bytes_per_cell,
            initial_balance=self.initial_balance,
        )


class JobConfig(_Model):
    target_cells: list[str] = Field(min_length=1)
    max_price: int = Field(gt=0)
    post_at_ms: int = Field(default=0, ge=0)
    bidding_window_ms: int = Field(default=20_000, gt=0)
    execution_window_ms: int = Field(default=600_000, gt=0)
    requirements: RequirementsConfig = RequirementsConfig()


class CoverageConfig(_Model):
    cells: Union[Literal["all"], list[str]] = "all"
    max_price: int = Field(gt=0)
    max_open: int = Field(default=1_000_000, ge=1)
    start_ms: int = Field(default=0, ge=0)
    bidding_window_ms: int = Field(default=20_000, gt=0)
    execution_window_ms: int = Field(default=600_000, gt=0)
    requirements: RequirementsConfig = RequirementsConfig()


class ClientConfig(_Model):
    id: str
    initial_balance: int = Field(default=0, ge=0)
    jobs: list[JobConfig] = []
    coverage: Optional[CoverageConfig] = None

    @model_validator(mode="after")
    def _active(self) -> ClientConfig:
        if not self.jobs and self.coverage is None:
            raise ValueError("a client needs at least one job or a coverage plan")
        return self


class ScenarioConfig(_Model):
    name: str = "scenario"
    seed: int = Field(ge=0, lt=2**64)
    mode: Literal["coordinated", "baseline", "both"] = "both"
    duration_ms: int = Field(gt=0)
    block_time_ms: int = Field(default=4000, gt=0)
    commission_rate: RateLike = str(DEFAULT_COMMISSION)
    reputation_floor: RateLike = str(DEFAULT_REPUTATION_FLOOR)
    genesis_supply: int = Field(default=10**15, gt=0)
    geography: GeographyConfig
    topology: TopologyConfig = TopologyConfig()
    robots: list[RobotConfig] = Field(min_length=1)
    clients: list[ClientConfig] = []

    @field_validator("commission_rate", "reputation_floor")
    @classmethod
    def _unit_rate(cls, v: RateLike) -> RateLike:
        if not 0 <= to_fraction(v) <= 1:
            raise ValueError("must lie in [0, 1]")
        return v

    @model_validator(mode="after")
    def _cross_checks(self) -> ScenarioConfig:
        ids = [r.id for r in self.robots] + [c.id for c in self.clients] + [self.topology.sequencer]
        dup = sorted({i for i in ids if ids.count(i) > 1})
        if dup:
            raise ValueError(f"duplicate node ids: {', '.join(dup)}")
        sites = set(self.sites())
        for r in self.robots:
            if r.home_cell not in sites:
                raise ValueError(f"robot {r.id} home cell {r.home_cell} is not a known site")
        wanted: list[str] = list(self.geography.coverage_cells or [])
        for c in self.clients:
            for j in c.jobs:
                wanted += j.target_cells
            if c.coverage is not None and c.coverage.cells != "all":
                wanted += c.coverage.cells
        unknown = sorted(set(wanted) - sites)
        if unknown:
            raise ValueError(f"unknown cells: {', '.join(unknown)}")
        return self

    # derived views ------------------------------------------------------

    @property
    def commission(self) -> Fraction:
        return to_fraction(self.commission_rate)

    @property
    def floor(self) -> Fraction:
        return to_fraction(self.reputation_floor)

    def sites(self) -> list[str]:
        geo = self.geography
        if geo.explicit_distance_matrix is not None:
            return list(geo.explicit_distance_matrix.sites)
        assert geo.tiling_frequency is not None
        return [str(CellId(geo.tiling_frequency, i)) for i in range(10 * geo.tiling_frequency ** 2 + 2)]

    def distance_model(self) -> DistanceModel:
        geo = self.geography
        if geo.explicit_distance_matrix is not None:
            m = geo.explicit_distance_matrix
            return MatrixDistances(m.sites, m.meters)
        assert geo.tiling_frequency is not None
        return TilingDistances(build_tiling(geo.tiling_frequency, geo.radius_m))

    def coverage_cells(self) -> list[str]:
        """Cells whose mapping counts toward coverage, in site order."""
        geo = self.geography
        sites = self.sites()
        if geo.coverage_cells is not None:
            chosen = set(geo.coverage_cells)
            return [s for s in sites if s in chosen]
        return sites

    def robot_specs(self) -> list[RobotSpec]:
        return [r.build() for r in self.robots]

    def client_specs(self) -> list[ClientSpec]:
        out = []
        for c in self.clients:
            jobs = tuple(JobPlan(tuple(j.target_cells), j.max_price, j.post_at_ms, j.bidding_window_ms,
                                 j.execution_window_ms, j.requirements.build()) for j in c.jobs)
            cov = None
            if c.coverage is not None:
                cv = c.coverage
                cells = tuple(self.coverage_cells()) if cv.cells == "all" else tuple(cv.cells)
                cov = CoveragePlan(cells, cv.max_price, cv.max_open, cv.start_ms, cv.bidding_window_ms,
                                   cv.execution_window_ms, cv.requirements.build())
            out.append(ClientSpec(c.id, jobs, cov, c.initial_balance))
        return out

    def links(self) -> list[tuple[str, str, LinkSpec]]:
        return [link.build() for link in self.topology.links]

    def resolved(self) -> dict[str, Any]:
        """The full configuration with every default filled in."""
        return self.model_dump(mode="json", by_alias=True)

    def digest(self) -> str:
        return hashlib.sha256(codec.canonical_json(self.resolved())).hexdigest()

    def with_overrides(self, **changes: Any) -> ScenarioConfig:
        data = self.model_dump(by_alias=False)
        data.update(changes)
        return parse_scenario(data)


def _field_path(loc: tuple) -> str:
    names = {name: f.alias or name for name, f in ScenarioConfig.model_fields.items()}
    parts = []
    for item in loc:
        if isinstance(item, int):
            parts.append(str(item))
        elif item in ("int", "float", "str", "list[str]", "literal['all']", "function-after", "function-before"):
            continue  # union branch tags
        else:
            parts.append(names.get(item, item))
    return ".".join(parts)


def parse_scenario(data: Any) -> ScenarioConfig:
    if not isinstance(data, dict):
        raise ValidationError("", "scenario must be a mapping")
    try:
        return ScenarioConfig.model_validate(data)
    except pydantic.ValidationError as exc:
        err = exc.errors()[0]
        path = _field_path(tuple(err["loc"]))
        raise ValidationError(path, err["msg"]) from None


def load_scenario(path: str | Path) -> ScenarioConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ParseError(f"{path}: {exc}") from None
    return parse_scenario(data)


def bundled_scenario(name: str) -> Path:
    """Path of a scenario shipped with the package (``table1``, ``reference``, ...)."""
    ref = resources.files("lunamarket") / "scenarios" / f"{name}.scenario"
    return Path(str(ref))


def bundled_names() -> list[str]:
    folder = resources.files("lunamarket") / "scenarios"
    return sorted(p.name[:-len(".scenario")] for p in folder.iterdir() if p.name.endswith(".scenario"))
