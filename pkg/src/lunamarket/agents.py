"""Robot and client decision policies, plus the independent-robots baseline.

Robot cost model: ``cost_rate`` microcredits per meter of travel from the
robot's current cell through the job's target cells (nearest-neighbor order).
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from lunamarket import codec
from lunamarket.errors import DeadlineExceeded
from lunamarket.marketplace import JobContract, JobRequest, MapMetadata, Requirements
from lunamarket.selenography import CellId, DistanceModel, TilingDistances

DEFAULT_COST_RATE = 2_000_000  # microcredits per meter
DEFAULT_BLOB_BYTES_PER_CELL = 256 * 1024


@dataclass(frozen=True)
class RobotSpec:
    id: str
    home_cell: str
    speed_mps: float = 0.1
    cost_rate: int = DEFAULT_COST_RATE
    initial_markup: Fraction = Fraction(0)
    undercut_step: int = 1
    sensors: frozenset[str] = frozenset({"camera"})
    map_resolution: float = 0.1
    mapping_sec_per_cell: float = 60.0
    algorithm: str = "visual-slam"
    planning_ms: int = 0
    blob_bytes_per_cell: int = DEFAULT_BLOB_BYTES_PER_CELL
    initial_balance: int = 0

    def __post_init__(self) -> None:
        if self.speed_mps <= 0:
            raise ValueError("robot speed must be positive")
        if self.cost_rate < 0:
            raise ValueError("cost rate must be non-negative")
        if self.undercut_step < 1:
            raise ValueError("undercut step must be at least one microcredit")


@dataclass
class Robot:
    spec: RobotSpec
    account: str
    current_cell: str
    busy: bool = False
    distance_m: float = 0.0
    known_mapped: set[str] = field(default_factory=set)  # baseline only

    @property
    def id(self) -> str:
        return self.spec.id


@dataclass(frozen=True)
class AuctionView:
    standing_low: int | None = None
    standing_bidder: str | None = None


@dataclass(frozen=True)
class BidDecision:
    cost_floor: int
    price: int | None
    reason: str
    route_m: float

    @property
    def abstained(self) -> bool:
        return self.price is None


@dataclass(frozen=True)
class MapArtifact:
    blob: bytes
    metadata: MapMetadata


@dataclass(frozen=True)
class MappingPlan:
    artifact: MapArtifact
    route: tuple[str, ...]
    route_m: float
    travel_ms: int
    mapping_ms: int
    finish_ms: int


def plan_route(start: str, targets: Iterable[str], distances: DistanceModel) -> tuple[list[str], float]:
    """Greedy nearest-neighbor visit order and its length in meters."""
    remaining = sorted(set(targets), key=lambda s: site_key(distances, s))
    route, total, here = [], 0.0, start
    while remaining:
        nxt = min(remaining, key=lambda s: (distances.distance(here, s), site_key(distances, s)))
        total += distances.distance(here, nxt)
        route.append(nxt)
        remaining.remove(nxt)
        here = nxt
    return route, total


def site_key(distances: DistanceModel, site: str) -> int:
    index = getattr(distances, "index", None)
    return index(site) if index else 0


def cost_floor(rate: int, meters: float) -> int:
    # rounding to the microcredit first keeps 2e6 * 5.0 from ceiling to 10_000_001
    return math.ceil(round(rate * meters, 6))


def requirements_met(spec: RobotSpec, req: Requirements) -> bool:
    return (
        spec.sensors >= req.required_sensors
        and spec.map_resolution <= req.min_resolution
        and (not req.allowed_algorithms or spec.algorithm in req.allowed_algorithms)
    )


def execution_ms(spec: RobotSpec, route_m: float, n_cells: int) -> tuple[int, int]:
    travel = math.ceil(round(route_m / spec.speed_mps * 1000, 6))
    mapping = math.ceil(round(n_cells * spec.mapping_sec_per_cell * 1000, 6))
    return travel, mapping


def decide_bid(robot: Robot, job: JobRequest, view: AuctionView, distances: DistanceModel,
               start_ms: int | None = None) -> BidDecision:
    """First bid ``min(max_price, floor * (1 + markup))``; when that does not
    undercut the standing low, rebid ``standing_low - undercut_step`` if that
    still covers the cost floor, otherwise abstain."""
    spec = robot.spec
    _, route_m = plan_route(robot.current_cell, job.target_cells, distances)
    floor = cost_floor(spec.cost_rate, route_m)

    def abstain(reason: str) -> BidDecision:
        return BidDecision(floor, None, reason, route_m)

    if not requirements_met(spec, job.requirements):
        return abstain("requirements unsatisfiable")
    if view.standing_bidder == robot.account:
        return abstain("already holds the standing low")
    if floor > job.max_price:
        return abstain("cost floor above max price")
    if start_ms is not None:
        travel, mapping = execution_ms(spec, route_m, len(job.target_cells))
        if start_ms + travel + mapping > job.execution_deadline_ms:
            return abstain("cannot finish before the execution deadline")
    price = max(1, min(job.max_price, math.ceil(floor * (1 + spec.initial_markup))))
    low = view.standing_low
    if low is not None and price >= low:
        if low <= floor or low - spec.undercut_step < max(floor, 1):
            return abstain("cannot undercut standing low above cost floor")
        price = low - spec.undercut_step
    return BidDecision(floor, price, "bid", route_m)


def synthetic_blob(seed: int, cells: Sequence[str], resolution: float, size: int) -> bytes:
    """Seeded occupancy-grid bytes (0 free, 100 occupied, 255 unknown)."""
    key = codec.canonical_json([seed, sorted(cells), resolution])
    rng = np.random.Generator(np.random.PCG64(int.from_bytes(hashlib.sha256(key).digest()[:8], "big")))
    return np.array([0, 100, 255], dtype=np.uint8)[rng.integers(0, 3, size)].tobytes()


def execute_mapping(robot: Robot, contract: JobContract, distances: DistanceModel, seed: int,
                    start_ms: int, claimed: Iterable[str] = ()) -> MappingPlan:
    """Travel to and map the contract's cells, producing the deliverable.

    Raises DeadlineExceeded (and leaves the robot where it is) when the work
    cannot finish by the execution deadline.
    """
    job = contract.job
    spec = robot.spec
    route, route_m = plan_route(robot.current_cell, job.target_cells, distances)
    travel, mapping = execution_ms(spec, route_m, len(route))
    finish = start_ms + travel + mapping
    if finish > job.execution_deadline_ms:
        raise DeadlineExceeded(f"{robot.id} would finish at {finish}, due {job.execution_deadline_ms}")
    blob = synthetic_blob(seed, job.target_cells, spec.map_resolution,
                          spec.blob_bytes_per_cell * len(job.target_cells))
    claimed = set(claimed)
    coords: list[tuple[float, float]] = []
    if isinstance(distances, TilingDistances):
        for cell in job.target_cells:
            c = distances.tiling.center(CellId.parse(cell))
            coords.append((c.lat, c.lon))
    meta = MapMetadata(
        cells=tuple(job.target_cells),
        bounding_coords=tuple(coords),
        resolution=spec.map_resolution,
        sensors=tuple(sorted(spec.sensors)),
        algorithm=spec.algorithm,
        price=contract.price or 0,
        content_hash=codec.hexdigest(blob),
        explorer=robot.account,
        pioneer_of=tuple(c for c in job.target_cells if c not in claimed),
    )
    robot.current_cell = route[-1]
    robot.distance_m += route_m
    return MappingPlan(MapArtifact(blob, meta), tuple(route), route_m, travel, mapping, finish)


# --------------------------------------------------------------------------
# clients


@dataclass(frozen=True)
class JobPlan:
    target_cells: tuple[str, ...]
    max_price: int
    post_at_ms: int = 0
    bidding_window_ms: int = 20_000
    execution_window_ms: int = 600_000
    requirements: Requirements = Requirements()


@dataclass(frozen=True)
class CoveragePlan:
    """Keep up to ``max_open`` single-cell jobs outstanding until every cell is mapped."""

    cells: tuple[str, ...]
    max_price: int
    max_open: int = 1_000_000
    start_ms: int = 0
    bidding_window_ms: int = 20_000
    execution_window_ms: int = 600_000
    requirements: Requirements = Requirements()


@dataclass(frozen=True)
class ClientSpec:
    id: str
    jobs: tuple[JobPlan, ...] = ()
    coverage: CoveragePlan | None = None
    initial_balance: int = 0


@dataclass
class ClientState:
    spec: ClientSpec
    account: str
    posted_plans: set[int] = field(default_factory=set)
    outstanding: dict[str, tuple[str, ...]] = field(default_factory=dict)  # ref -> cells
    done_cells: set[str] = field(default_factory=set)
    next_ref: int = 0


@dataclass(frozen=True)
class PostJob:
    ref: str
    request: JobRequest


@dataclass(frozen=True)
class Accept:
    contract_id: str


@dataclass(frozen=True)
class Decline:
    contract_id: str


@dataclass(frozen=True)
class Finalized:
    contract_id: str
    ref: str
    price: int
    max_price: int


def client_step(client: ClientState, finalized: Sequence[Finalized], now: int) -> list[PostJob | Accept | Decline]:
    """Post due jobs and answer finalized auctions (accept iff price <= cap)."""
    actions: list[PostJob | Accept | Decline] = []
    for f in finalized:
        actions.append(Accept(f.contract_id) if f.price <= f.max_price else Decline(f.contract_id))

    def post(cells: tuple[str, ...], max_price: int, bid_ms: int, exec_ms: int, req: Requirements) -> None:
        ref = f"{client.spec.id}-{client.next_ref}"
        client.next_ref += 1
        client.outstanding[ref] = cells
        actions.append(PostJob(ref, JobRequest(client.account, cells, max_price, now + bid_ms,
                                               now + bid_ms + exec_ms, req)))

    for i, plan in enumerate(client.spec.jobs):
        if i not in client.posted_plans and plan.post_at_ms <= now:
            client.posted_plans.add(i)
            post(tuple(plan.target_cells), plan.max_price, plan.bidding_window_ms,
                 plan.execution_window_ms, plan.requirements)
    cov = client.spec.coverage
    if cov is not None and now >= cov.start_ms:
        busy = {c for cells in client.outstanding.values() for c in cells}
        for cell in cov.cells:
            if len(client.outstanding) >= cov.max_open:
                break
            if cell not in busy and cell not in client.done_cells:
                post((cell,), cov.max_price, cov.bidding_window_ms, cov.execution_window_ms, cov.requirements)
    return actions


# --------------------------------------------------------------------------
# independent baseline


@dataclass(frozen=True)
class Movement:
    robot_id: str
    target: str
    distance_m: float


def independent_baseline_step(robots: Sequence[Robot], mapped: set[str], distances: DistanceModel,
                              cells: Sequence[str]) -> list[Movement]:
    """Each idle robot heads for the nearest cell *it* has not mapped.

    Robots share nothing, so two robots may pick the same cell. When every
    cell is mapped no robot moves.
    """
    if set(cells) <= mapped:
        return []
    moves = []
    for robot in sorted(robots, key=lambda r: r.id):
        if robot.busy:
            continue
        todo = [c for c in cells if c not in robot.known_mapped]
        if not todo:
            continue
        here = robot.current_cell
        target = min(todo, key=lambda c: (distances.distance(here, c), site_key(distances, c)))
        moves.append(Movement(robot.id, target, distances.distance(here, target)))
    return moves
