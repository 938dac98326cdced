"""The master event loop binding ledger, market, network and agents.

Coordinated mode wires every party through the simulated network: Earth
clients talk to a Moon-side sequencer node that fronts the marketplace
contract, robots hear job broadcasts and bid back over the lunar mesh. The
sequencer seals work at block-slot boundaries (multiples of ``blockTimeMs``),
taking queued messages in (arrival time, sender) order.

Baseline mode runs the same robots without network, ledger or market: each
robot repeatedly maps the nearest cell it has not mapped itself.

At equal timestamps network deliveries run before timers.
"""

from __future__ import annotations

import heapq
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

from lunamarket.agents import (
    Accept,
    AuctionView,
    ClientState,
    Decline,
    Finalized,
    MapArtifact,
    PostJob,
    Robot,
    client_step,
    decide_bid,
    execute_mapping,
    execution_ms,
    independent_baseline_step,
    plan_route,
    site_key,
)
from lunamarket.contentstore import ContentStore
from lunamarket.errors import DeadlineExceeded, LunaMarketError
from lunamarket.events import EventLog
from lunamarket.ledger import Ledger
from lunamarket.marketplace import Bid, ContractState, JobRequest, Marketplace, Requirements
from lunamarket.metrics import MetricsSummary, compute_metrics, coverage_csv
from lunamarket.netsim import (
    BROADCAST,
    DeliveryEvent,
    Message,
    Node,
    Role,
    TopologySpec,
    build_topology,
    envelope,
)
from lunamarket.scenario import ScenarioConfig

S = ContractState


@dataclass
class RunResult:
    mode: str
    config: ScenarioConfig
    log: EventLog
    metrics: MetricsSummary
    ledger_lines: list[str] = field(default_factory=list)
    link_counters: dict[str, dict[str, int]] = field(default_factory=dict)
    chain_ok: bool = True
    world: Any = None

    def metrics_json(self) -> dict[str, Any]:
        out = self.metrics.to_dict()
        out["mode"] = self.mode
        out["seed"] = self.config.seed
        out["eventLogDigest"] = self.log.digest()
        out["linkCounters"] = self.link_counters
        out["verifyChain"] = self.chain_ok
        return out


@dataclass
class ComparisonReport:
    coordinated: RunResult
    baseline: RunResult

    @property
    def delta_time_to_coverage_ms(self) -> int | None:
        a = self.coordinated.metrics.time_to_full_coverage_ms
        b = self.baseline.metrics.time_to_full_coverage_ms
        return None if a is None or b is None else a - b

    @property
    def delta_total_distance_m(self) -> float:
        return self.coordinated.metrics.total_distance_m - self.baseline.metrics.total_distance_m

    def to_dict(self) -> dict[str, Any]:
        return {
            "seed": self.coordinated.config.seed,
            "coordinated": {
                "timeToFullCoverageMs": self.coordinated.metrics.time_to_full_coverage_ms,
                "totalDistanceM": self.coordinated.metrics.total_distance_m,
            },
            "baseline": {
                "timeToFullCoverageMs": self.baseline.metrics.time_to_full_coverage_ms,
                "totalDistanceM": self.baseline.metrics.total_distance_m,
            },
            "deltaTimeToCoverageMs": self.delta_time_to_coverage_ms,
            "deltaTotalDistanceM": self.delta_total_distance_m,
        }


class _Timers:
    def __init__(self) -> None:
        self._heap: list[tuple[int, int, Callable[..., None], tuple]] = []
        self._seq = 0

    def at(self, t: int, fn: Callable[..., None], *args: Any) -> None:
        heapq.heappush(self._heap, (t, self._seq, fn, args))
        self._seq += 1

    def peek(self) -> int | None:
        return self._heap[0][0] if self._heap else None

    def pop(self) -> tuple[int, Callable[..., None], tuple]:
        t, _, fn, args = heapq.heappop(self._heap)
        return t, fn, args


class CoordinatedWorld:
    def __init__(self, cfg: ScenarioConfig) -> None:
        self.cfg = cfg
        self.now = 0
        self.log = EventLog()
        self.distances = cfg.distance_model()
        self.cells = cfg.coverage_cells()
        self.ledger = Ledger(cfg.genesis_supply, salt=f"lunamarket/{cfg.name}/{cfg.seed}")
        self.store = ContentStore()
        self.market = Marketplace(self.ledger, self.store, cfg.commission, cfg.floor, self.log,
                                  broadcast=self._market_broadcast)
        self.seq_id = cfg.topology.sequencer

        self.robots: dict[str, Robot] = {}
        for spec in cfg.robot_specs():
            acct = self.ledger.create_account(spec.initial_balance, label=spec.id)
            self.robots[spec.id] = Robot(spec, acct, spec.home_cell)
        self.clients: dict[str, ClientState] = {}
        for cspec in cfg.client_specs():
            acct = self.ledger.create_account(cspec.initial_balance, label=cspec.id)
            self.clients[cspec.id] = ClientState(cspec, acct)
        self.node_of = {r.account: rid for rid, r in self.robots.items()}
        self.node_of.update({c.account: cid for cid, c in self.clients.items()})

        nodes = [Node(self.seq_id, Role.SEQUENCER)]
        nodes += [Node(rid, Role.ROBOT) for rid in self.robots]
        nodes += [Node(cid, Role.EARTH_STATION) for cid in self.clients]
        topo = cfg.topology
        self.net = build_topology(TopologySpec(
            nodes, cfg.links(), topo.mesh_latency_ms, topo.earth_latency_ms,
            topo.jitter_ms, topo.drop_prob, topo.bandwidth_bytes_per_sec), cfg.seed)

        self.timers = _Timers()
        self.inbox: list[tuple[int, str, int, Message]] = []
        self._inbox_seq = 0
        self.known_jobs: dict[str, dict[str, JobRequest]] = {rid: {} for rid in self.robots}
        self.committed: dict[str, str | None] = {rid: None for rid in self.robots}
        self.think_pending: dict[str, bool] = {rid: False for rid in self.robots}
        self.client_pending: dict[str, bool] = {cid: False for cid in self.clients}
        self.finalized_inbox: dict[str, list[Finalized]] = {cid: [] for cid in self.clients}
        self.job_ref: dict[str, tuple[str, str]] = {}  # job id -> (client node, ref)
        self.refs_job: dict[str, str] = {}
        self.blobs: dict[str, MapArtifact] = {}
        self.mapped: set[str] = set()
        self._posting_ref: str | None = None
        self._drops_seen = 0
        # a winner starts roughly two Earth legs and two slots after the deadline
        self.start_slack_ms = 2 * topo.earth_latency_ms + 2 * cfg.block_time_ms + topo.mesh_latency_ms

    # plumbing -----------------------------------------------------------

    def _send(self, src: str, dst: str, kind: str, size: int | None = None, **body: Any) -> None:
        self.net.send(envelope(src, dst, Message(kind, body), self.now, size))
        self._flush_drops()

    def _flush_drops(self) -> None:
        for env, reason in self.net.dropped[self._drops_seen:]:
            self.log.emit(self.now, "net_drop", src=env.src, dst=env.dst, msg=env.payload.kind,
                          sizeBytes=env.size_bytes, jobId=env.payload.job_id, reason=reason,
                          sendTimeMs=env.send_time_ms)
        self._drops_seen = len(self.net.dropped)

    def _market_broadcast(self, msg: Message, now: int) -> None:
        body = dict(msg.body, ref=self._posting_ref)
        self._send(self.seq_id, BROADCAST, msg.kind, **body)

    def _label(self, acct: str | None) -> str | None:
        return None if acct is None else self.ledger.label(acct)

    # main loop ----------------------------------------------------------

    def run(self) -> RunResult:
        cfg = self.cfg
        self.log.emit(0, "run_start", mode="coordinated", seed=cfg.seed, scenario=cfg.name,
                      configDigest=cfg.digest(), totalCells=len(self.cells), cells=self.cells,
                      robots=sorted(self.robots), clients=sorted(self.clients))
        self.timers.at(0, self._tick)
        for cid, client in self.clients.items():
            self.timers.at(0, self._client_tick, cid)
            for plan in client.spec.jobs:
                if plan.post_at_ms > 0:
                    self.timers.at(plan.post_at_ms, self._client_tick, cid)
            if client.spec.coverage is not None and client.spec.coverage.start_ms > 0:
                self.timers.at(client.spec.coverage.start_ms, self._client_tick, cid)
        for f in cfg.topology.faults:
            target = tuple(f.target) if isinstance(f.target, list) else f.target
            self.timers.at(f.at_ms, self._fault, f.kind, target, f.value)

        while True:
            t_net, t_timer = self.net.peek_time(), self.timers.peek()
            candidates = [t for t in (t_net, t_timer) if t is not None]
            if not candidates or min(candidates) > cfg.duration_ms:
                break
            t = min(candidates)
            self.now = t
            if t_net == t:
                deliveries = self.net.step(t)
                self._flush_drops()
                for ev in deliveries:
                    self._deliver(ev)
            else:
                _, fn, args = self.timers.pop()
                fn(*args)

        self.now = cfg.duration_ms
        chain_ok = self.ledger.verify_chain()
        states: dict[str, int] = {}
        for c in self.market.contracts.values():
            states[c.state.value] = states.get(c.state.value, 0) + 1
        self.log.emit(self.now, "run_end", verifyChain=chain_ok, blocks=self.ledger.height,
                      totalSupply=self.ledger.total_supply(), genesisSupply=self.ledger.genesis_supply,
                      contractStates=dict(sorted(states.items())), cellsMapped=len(self.mapped))
        return RunResult("coordinated", cfg, self.log, compute_metrics(self.log),
                         list(self.ledger.export_lines()), self.net.counters_json(), chain_ok, self)

    def _fault(self, kind: str, target: Any, value: Any) -> None:
        self.net.inject_fault(kind, target, value)
        self.log.emit(self.now, "fault", faultKind=kind, target=target, value=value)
        if kind == "restore" and target in self.robots:
            self._schedule_think(target)

    def _deliver(self, ev: DeliveryEvent) -> None:
        env = ev.envelope
        self.log.emit(self.now, "net_deliver", src=env.src, dst=env.dst, msg=env.payload.kind,
                      sizeBytes=env.size_bytes, jobId=env.payload.job_id, sendTimeMs=env.send_time_ms,
                      link=f"{ev.link[0]}<->{ev.link[1]}")
        if env.dst == self.seq_id:
            self.inbox.append((self.now, env.src, self._inbox_seq, env.payload))
            self._inbox_seq += 1
        elif env.dst in self.robots:
            self._robot_receive(env.dst, env.payload)
        elif env.dst in self.clients:
            self._client_receive(env.dst, env.payload)

    # sequencer ----------------------------------------------------------

    def _tick(self) -> None:
        batch = sorted(self.inbox, key=lambda m: (m[0], m[1], m[2]))
        self.inbox = []
        for arrival, src, _, msg in batch:
            self._sequence(arrival, src, msg)
        for c in self.market.check_deadlines(self.now):
            self._announce(c)
        nxt = self.now + self.cfg.block_time_ms
        if nxt <= self.cfg.duration_ms:
            self.timers.at(nxt, self._tick)

    def _announce(self, c) -> None:
        client_node, ref = self.job_ref.get(c.job_id, (None, None))
        if c.state is S.BIDDING_CLOSED:
            if client_node:
                self._send(self.seq_id, client_node, "ContractMsg", event="finalized", ref=ref,
                           jobId=c.job_id, contractId=c.id, price=c.price, maxPrice=c.job.max_price)
            self._send(self.seq_id, BROADCAST, "ContractMsg", event="finalized", jobId=c.job_id,
                       contractId=c.id, winner=self._label(c.winner))
        else:
            if client_node:
                self._send(self.seq_id, client_node, "ContractMsg", event=c.state.value.lower(), ref=ref,
                           jobId=c.job_id, contractId=c.id)
            self._send(self.seq_id, BROADCAST, "ContractMsg", event="closed", jobId=c.job_id, contractId=c.id)

    def _sequence(self, arrival: int, src: str, msg: Message) -> None:
        b = msg.body
        now = self.now
        if msg.kind == "JobRequestMsg":
            client = self.clients[src]
            req = JobRequest(client.account, tuple(b["targetCells"]), b["maxPrice"], b["biddingDeadlineMs"],
                             b["executionDeadlineMs"], _requirements(b["requirements"]))
            self._posting_ref = b["ref"]
            try:
                job_id = self.market.post_job_request(req, now)
            except LunaMarketError as exc:
                self.log.emit(now, "job_rejected", client=src, ref=b["ref"], reason=type(exc).__name__)
                self._send(self.seq_id, src, "ContractMsg", event="rejected", ref=b["ref"],
                           reason=type(exc).__name__)
                return
            finally:
                self._posting_ref = None
            self.job_ref[job_id] = (src, b["ref"])
            self.refs_job[b["ref"]] = job_id
            self._send(self.seq_id, src, "ContractMsg", event="posted", ref=b["ref"], jobId=job_id,
                       contractId=self.market.by_job[job_id])
        elif msg.kind == "BidMsg":
            robot = self.robots[src]
            try:
                self.market.submit_bid(Bid(b["jobId"], robot.account, b["price"], arrival), now)
            except LunaMarketError as exc:
                self._send(self.seq_id, src, "ContractMsg", event="bid_rejected", jobId=b["jobId"],
                           reason=type(exc).__name__)
                return
            self._send(self.seq_id, BROADCAST, "BidMsg", jobId=b["jobId"], price=b["price"], bidder=src)
        elif msg.kind == "ContractMsg" and b.get("op") in ("accept", "decline"):
            cid = b["contractId"]
            c = self.market.contract(cid)
            try:
                if b["op"] == "accept":
                    self.market.accept_and_escrow(cid, now)
                else:
                    self.market.decline(cid, now)
            except LunaMarketError as exc:
                self.log.emit(now, "accept_failed", contractId=cid, jobId=c.job_id, reason=type(exc).__name__)
            if c.state is S.ACCEPTED:
                winner = self.node_of[c.winner]
                self._send(self.seq_id, winner, "ContractMsg", event="execute", jobId=c.job_id, contractId=cid)
            elif c.state is not S.BIDDING_CLOSED:
                self._announce(c)
        elif msg.kind == "DeliverableMsg":
            self._deliverable(src, b)

    def _deliverable(self, src: str, b: dict[str, Any]) -> None:
        cid, now = b["contractId"], self.now
        artifact = self.blobs.pop(cid)
        c = self.market.contract(cid)
        was_terminal = c.state.terminal
        try:
            report = self.market.submit_deliverable(cid, artifact.blob, artifact.metadata, now)
            if report.passed:
                self.market.settle(cid, now)
        except LunaMarketError as exc:
            self.log.emit(now, "deliverable_rejected", contractId=cid, jobId=c.job_id, reason=type(exc).__name__)
        client_node, ref = self.job_ref[c.job_id]
        if c.state is S.SETTLED:
            for cell in c.job.target_cells:
                if cell in self.cells and cell not in self.mapped:
                    self.mapped.add(cell)
                    self.log.emit(now, "cell_mapped", cell=cell, robot=src, contractId=cid,
                                  fraction=len(self.mapped) / len(self.cells))
            self._send(self.seq_id, client_node, "ContractMsg", event="settled", ref=ref, jobId=c.job_id,
                       contractId=cid, cells=list(c.job.target_cells))
            self._send(self.seq_id, src, "ContractMsg", event="paid", jobId=c.job_id, contractId=cid)
        elif c.state.terminal and not was_terminal:
            self._announce(c)

    # clients --------------------------------------------------------------

    def _client_receive(self, cid: str, msg: Message) -> None:
        b = msg.body
        client = self.clients[cid]
        event = b.get("event")
        if event == "finalized":
            self.finalized_inbox[cid].append(Finalized(b["contractId"], b["ref"], b["price"], b["maxPrice"]))
        elif event in ("expired", "failed", "rejected", "settled"):
            cells = client.outstanding.pop(b["ref"], ())
            if event == "settled":
                client.done_cells.update(cells)
            if event == "rejected":
                return  # do not re-post on rejection
        else:
            return
        self._schedule_client(cid)

    def _schedule_client(self, cid: str) -> None:
        if not self.client_pending[cid]:
            self.client_pending[cid] = True
            self.timers.at(self.now, self._client_tick, cid)

    def _client_tick(self, cid: str) -> None:
        self.client_pending[cid] = False
        if cid in self.net.crashed:
            return
        finalized, self.finalized_inbox[cid] = self.finalized_inbox[cid], []
        for action in client_step(self.clients[cid], finalized, self.now):
            if isinstance(action, PostJob):
                r = action.request
                self.log.emit(self.now, "job_request_sent", client=cid, ref=action.ref,
                              targetCells=list(r.target_cells), maxPrice=r.max_price)
                self._send(cid, self.seq_id, "JobRequestMsg", ref=action.ref, targetCells=list(r.target_cells),
                           maxPrice=r.max_price, biddingDeadlineMs=r.bidding_deadline_ms,
                           executionDeadlineMs=r.execution_deadline_ms, requirements=r.requirements.to_dict())
            elif isinstance(action, (Accept, Decline)):
                op = "accept" if isinstance(action, Accept) else "decline"
                c = self.market.contract(action.contract_id)
                self._send(cid, self.seq_id, "ContractMsg", op=op, jobId=c.job_id, contractId=c.id)

    # robots ---------------------------------------------------------------

    def _robot_receive(self, rid: str, msg: Message) -> None:
        b = msg.body
        job_id = b.get("jobId")
        if msg.kind == "JobRequestMsg":
            self.known_jobs[rid][job_id] = self.market.contract_for_job(job_id).job
            self._schedule_think(rid)
        elif msg.kind == "BidMsg":
            if self.committed[rid] == job_id and b["bidder"] != rid:
                self.committed[rid] = None
            self._schedule_think(rid)
        elif msg.kind == "ContractMsg":
            event = b.get("event")
            if event == "execute":
                self._execute(rid, b["contractId"])
            elif event == "finalized":
                self.known_jobs[rid].pop(job_id, None)
                if self.committed[rid] == job_id and b["winner"] != rid:
                    self.committed[rid] = None
                    self._schedule_think(rid)
            elif event in ("closed", "bid_rejected"):
                if event == "closed":
                    self.known_jobs[rid].pop(job_id, None)
                if self.committed[rid] == job_id:
                    self.committed[rid] = None
                    self._schedule_think(rid)

    def _schedule_think(self, rid: str) -> None:
        if not self.think_pending[rid]:
            self.think_pending[rid] = True
            self.timers.at(self.now + self.robots[rid].spec.planning_ms, self._think, rid)

    def _think(self, rid: str) -> None:
        self.think_pending[rid] = False
        robot = self.robots[rid]
        if rid in self.net.crashed or robot.busy or self.committed[rid] is not None:
            return
        candidates = []
        for job_id, job in list(self.known_jobs[rid].items()):
            c = self.market.contract_for_job(job_id)
            if c.state is not S.OPEN or self.now >= job.bidding_deadline_ms:
                if c.state is not S.OPEN:
                    del self.known_jobs[rid][job_id]
                continue
            _, route_m = plan_route(robot.current_cell, job.target_cells, self.distances)
            first = min(site_key(self.distances, s) for s in job.target_cells)
            candidates.append((route_m, first, job_id, c))
        candidates.sort(key=lambda x: x[:3])
        for _, _, job_id, c in candidates:
            view = AuctionView(c.standing_low, c.standing_bidder)
            d = decide_bid(robot, c.job, view, self.distances, c.job.bidding_deadline_ms + self.start_slack_ms)
            self.log.emit(self.now, "bid_decision", robot=rid, jobId=job_id, costFloor=d.cost_floor,
                          price=d.price, reason=d.reason, routeM=d.route_m, standingLow=view.standing_low)
            if not d.abstained:
                self.committed[rid] = job_id
                self._send(rid, self.seq_id, "BidMsg", jobId=job_id, price=d.price)
                return

    def _execute(self, rid: str, cid: str) -> None:
        robot = self.robots[rid]
        c = self.market.contract(cid)
        self.known_jobs[rid].pop(c.job_id, None)
        try:
            self.market.begin_execution(cid, self.now)
        except LunaMarketError as exc:
            self.log.emit(self.now, "robot_failed", robot=rid, contractId=cid, reason=type(exc).__name__)
            self.committed[rid] = None
            self._schedule_think(rid)
            return
        start_cell = robot.current_cell
        try:
            plan = execute_mapping(robot, c, self.distances, self.cfg.seed, self.now,
                                   claimed=self.market.pioneers.keys())
        except DeadlineExceeded:
            self.log.emit(self.now, "robot_failed", robot=rid, contractId=cid, reason="DeadlineExceeded")
            self.committed[rid] = None
            self._schedule_think(rid)
            return
        robot.busy = True
        self.log.emit(self.now, "execution_started", robot=rid, contractId=cid, jobId=c.job_id,
                      route=list(plan.route), travelMs=plan.travel_ms, mappingMs=plan.mapping_ms)
        self.timers.at(self.now + plan.travel_ms, self._arrive, rid, start_cell, plan.route[-1], plan.route_m)
        self.timers.at(plan.finish_ms, self._finish, rid, cid, plan.artifact)

    def _arrive(self, rid: str, src: str, dst: str, meters: float) -> None:
        self.log.emit(self.now, "robot_move", robot=rid, fromCell=src, toCell=dst, distanceM=meters)

    def _finish(self, rid: str, cid: str, artifact: MapArtifact) -> None:
        robot = self.robots[rid]
        robot.busy = False
        self.committed[rid] = None
        self.blobs[cid] = artifact
        c = self.market.contract(cid)
        self.log.emit(self.now, "mapping_done", robot=rid, contractId=cid, jobId=c.job_id,
                      contentHash=artifact.metadata.content_hash)
        self._send(rid, self.seq_id, "DeliverableMsg", size=len(artifact.blob), jobId=c.job_id, contractId=cid,
                   contentHash=artifact.metadata.content_hash)
        self._schedule_think(rid)


def _requirements(d: dict[str, Any]) -> Requirements:
    res = d.get("minResolution")
    return Requirements(float("inf") if res is None else res, frozenset(d.get("requiredSensors", ())),
                        frozenset(d.get("allowedAlgorithms", ())))


class BaselineWorld:
    """Independent robots: no market, no messages, no shared knowledge."""

    def __init__(self, cfg: ScenarioConfig) -> None:
        self.cfg = cfg
        self.now = 0
        self.log = EventLog()
        self.distances = cfg.distance_model()
        self.cells = cfg.coverage_cells()
        self.robots = {s.id: Robot(s, s.id, s.home_cell) for s in cfg.robot_specs()}
        self.mapped: set[str] = set()
        self.timers = _Timers()
        self.legs: dict[str, tuple[int, int, str, str, float]] = {}  # robot -> (start, travel, from, to, m)
        self.done = False

    def run(self) -> RunResult:
        cfg = self.cfg
        self.log.emit(0, "run_start", mode="baseline", seed=cfg.seed, scenario=cfg.name,
                      configDigest=cfg.digest(), totalCells=len(self.cells), cells=self.cells,
                      robots=sorted(self.robots), clients=[])
        self.timers.at(0, self._step)
        while not self.done:
            t = self.timers.peek()
            if t is None or t > cfg.duration_ms:
                break
            self.now, fn, args = self.timers.pop()
            fn(*args)
        if not self.done:
            self.now = cfg.duration_ms
            self._close_legs()
        self.log.emit(self.now, "run_end", cellsMapped=len(self.mapped))
        return RunResult("baseline", cfg, self.log, compute_metrics(self.log), world=self)

    def _step(self) -> None:
        if self.done:
            return
        for mv in independent_baseline_step(list(self.robots.values()), self.mapped, self.distances, self.cells):
            robot = self.robots[mv.robot_id]
            robot.busy = True
            travel, mapping = execution_ms(robot.spec, mv.distance_m, 1)
            self.legs[robot.id] = (self.now, travel, robot.current_cell, mv.target, mv.distance_m)
            self.timers.at(self.now + travel, self._arrive, robot.id)
            self.timers.at(self.now + travel + mapping, self._mapped, robot.id, mv.target)

    def _arrive(self, rid: str) -> None:
        if self.done:
            return
        _, _, src, dst, meters = self.legs.pop(rid)
        robot = self.robots[rid]
        robot.current_cell = dst
        robot.distance_m += meters
        self.log.emit(self.now, "robot_move", robot=rid, fromCell=src, toCell=dst, distanceM=meters)

    def _mapped(self, rid: str, cell: str) -> None:
        if self.done:
            return
        robot = self.robots[rid]
        robot.busy = False
        robot.known_mapped.add(cell)
        if cell in self.mapped:
            self.log.emit(self.now, "cell_remapped", cell=cell, robot=rid)
        else:
            self.mapped.add(cell)
            self.log.emit(self.now, "cell_mapped", cell=cell, robot=rid, fraction=len(self.mapped) / len(self.cells))
        if self.mapped >= set(self.cells):
            self.done = True
            self._close_legs()
            return
        self._step()

    def _close_legs(self) -> None:
        # robots still travelling when the run stops are charged pro rata
        for rid in sorted(self.legs):
            start, travel, src, dst, meters = self.legs.pop(rid)
            frac = (self.now - start) / travel if travel else 1.0
            self.log.emit(self.now, "robot_move", robot=rid, fromCell=src, toCell=dst,
                          distanceM=meters * frac, partial=True)


def run_scenario(cfg: ScenarioConfig, mode: str | None = None) -> RunResult:
    mode = mode or ("coordinated" if cfg.mode == "both" else cfg.mode)
    if mode == "coordinated":
        return CoordinatedWorld(cfg).run()
    if mode == "baseline":
        return BaselineWorld(cfg).run()
    raise ValueError(f"unknown mode {mode!r}")


def run_baseline(cfg: ScenarioConfig) -> RunResult:
    return BaselineWorld(cfg).run()


def compare_baseline(cfg: ScenarioConfig, parallel: bool = True) -> ComparisonReport:
    """Run both modes on the same config (on two threads when ``parallel``)."""
    if parallel:
        with ThreadPoolExecutor(max_workers=2) as pool:
            coord = pool.submit(run_scenario, cfg, "coordinated")
            base = pool.submit(run_scenario, cfg, "baseline")
            return ComparisonReport(coord.result(), base.result())
    return ComparisonReport(run_scenario(cfg, "coordinated"), run_scenario(cfg, "baseline"))


def write_outputs(result: RunResult, out_dir: str | Path) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    result.log.write(out / "events.jsonl")
    (out / "metrics.json").write_text(json.dumps(result.metrics_json(), indent=2, sort_keys=True) + "\n")
    (out / "ledger.jsonl").write_text("".join(line + "\n" for line in result.ledger_lines))
    (out / "coverage.csv").write_text(coverage_csv(result.metrics))
    (out / "scenario.resolved.json").write_text(json.dumps(result.config.resolved(), indent=2, sort_keys=True) + "\n")
    return out
