"""Job posting, reverse auctions, escrow, deliverable checks and settlement.

One ``Marketplace`` plays the template contract: it owns a principal account
on the ledger, creates one ``JobContract`` per job request, and drives each
contract through

    Open -> BiddingClosed -> Accepted -> Executing -> Delivered -> Settled

with Open/BiddingClosed -> Expired and BiddingClosed/Accepted/Executing/
Delivered -> Failed. Every value movement happens in a single ledger block so
a failure while sealing leaves the contract where it was.

Auction: bids must undercut the standing low by at least one microcredit.
At the deadline the lowest bid wins; among equal prices the earliest bid,
then the lexicographically smallest bidder id.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Iterable

from lunamarket.contentstore import ContentStore
from lunamarket.errors import (
    AuctionClosed,
    DeadlineExceeded,
    EmptyTargets,
    IntegrityError,
    InsolventBuyer,
    InsolventClient,
    InvalidRequest,
    NotFound,
    NotHolder,
    NotLower,
    NotYetDue,
    OverMaxPrice,
    ReputationTooLow,
    WrongState,
)
from lunamarket.events import EventLog
from lunamarket.ledger import AppCall, AssetCreate, AssetTransfer, Ledger, Payment, Rekey, Transaction
from lunamarket.netsim import Message

TEMPLATE_CONTRACT = "TemplateSmartContract"
DEFAULT_COMMISSION = Fraction(1, 20)
DEFAULT_REPUTATION_FLOOR = Fraction(1, 5)

REPUTATION_DELTAS = {
    "settled": Fraction(1, 20),
    "failed_after_win": Fraction(-1, 5),
    "bid_withdrawal": Fraction(-1, 10),
}


class ContractState(enum.Enum):
    OPEN = "Open"
    BIDDING_CLOSED = "BiddingClosed"
    ACCEPTED = "Accepted"
    EXECUTING = "Executing"
    DELIVERED = "Delivered"
    SETTLED = "Settled"
    EXPIRED = "Expired"
    FAILED = "Failed"

    @property
    def terminal(self) -> bool:
        return self in (ContractState.SETTLED, ContractState.EXPIRED, ContractState.FAILED)


S = ContractState
ALLOWED_TRANSITIONS = frozenset({
    (S.OPEN, S.BIDDING_CLOSED),
    (S.BIDDING_CLOSED, S.ACCEPTED),
    (S.ACCEPTED, S.EXECUTING),
    (S.EXECUTING, S.DELIVERED),
    (S.DELIVERED, S.SETTLED),
    (S.OPEN, S.EXPIRED),
    (S.BIDDING_CLOSED, S.EXPIRED),
    (S.BIDDING_CLOSED, S.FAILED),  # client insolvent at acceptance
    (S.ACCEPTED, S.FAILED),
    (S.EXECUTING, S.FAILED),
    (S.DELIVERED, S.FAILED),
})
ESCROW_STATES = frozenset({S.ACCEPTED, S.EXECUTING, S.DELIVERED})


@dataclass(frozen=True)
class Requirements:
    min_resolution: float = float("inf")  # coarsest acceptable m/px
    required_sensors: frozenset[str] = frozenset()
    allowed_algorithms: frozenset[str] = frozenset()  # empty: any

    def to_dict(self) -> dict[str, Any]:
        return {
            "minResolution": self.min_resolution if self.min_resolution != float("inf") else None,
            "requiredSensors": sorted(self.required_sensors),
            "allowedAlgorithms": sorted(self.allowed_algorithms),
        }


@dataclass(frozen=True)
class JobRequest:
    client: str
    target_cells: tuple[str, ...]
    max_price: int
    bidding_deadline_ms: int
    execution_deadline_ms: int
    requirements: Requirements = Requirements()
    id: str | None = None


@dataclass(frozen=True)
class Bid:
    job_id: str
    bidder: str
    price: int
    time_ms: int
    reputation: Fraction | None = None

    def rank_key(self) -> tuple[int, int, str]:
        return (self.price, self.time_ms, self.bidder)


@dataclass(frozen=True)
class BidOutcome:
    accepted: bool
    standing_low: int
    previous_low: int | None


@dataclass(frozen=True)
class MapMetadata:
    cells: tuple[str, ...]
    bounding_coords: tuple[tuple[float, float], ...]
    resolution: float
    sensors: tuple[str, ...]
    algorithm: str
    price: int
    content_hash: str
    explorer: str
    pioneer_of: tuple[str, ...] = ()

    def to_dict(self) -> dict[str, Any]:
        return {
            "cells": sorted(self.cells),
            "boundingCoords": [list(c) for c in self.bounding_coords],
            "resolution": self.resolution,
            "sensors": sorted(self.sensors),
            "algorithm": self.algorithm,
            "price": self.price,
            "contentHash": self.content_hash,
            "explorer": self.explorer,
            "pioneerOf": sorted(self.pioneer_of),
        }

    def descriptive(self) -> dict[str, Any]:
        d = self.to_dict()
        del d["price"]
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> MapMetadata:
        return cls(
            cells=tuple(d["cells"]),
            bounding_coords=tuple((float(a), float(b)) for a, b in d["boundingCoords"]),
            resolution=d["resolution"],
            sensors=tuple(d["sensors"]),
            algorithm=d["algorithm"],
            price=d["price"],
            content_hash=d["contentHash"],
            explorer=d["explorer"],
            pioneer_of=tuple(d.get("pioneerOf", ())),
        )


@dataclass(frozen=True)
class PioneerEntry:
    client: str
    explorer: str
    asset_id: int
    settled_at_ms: int


@dataclass
class PlausibilityReport:
    passed: bool
    failures: dict[str, str] = field(default_factory=dict)
    asset_id: int | None = None
    content_hash: str | None = None


@dataclass(frozen=True)
class SettlementRecord:
    contract_id: str
    winner: str
    client: str
    price: int
    asset_id: int
    new_pioneer_cells: tuple[str, ...]
    block_height: int


@dataclass(frozen=True)
class SaleRecord:
    asset_id: int
    seller: str
    buyer: str
    price: int
    commission: int
    pioneer_payouts: dict[str, int]
    seller_proceeds: int


@dataclass
class JobContract:
    id: str
    job: JobRequest
    state: ContractState = ContractState.OPEN
    winner: str | None = None
    price: int | None = None
    escrow_held: int = 0
    escrow_account: str | None = None
    deliverable: tuple[str, int] | None = None
    accepted_bids: list[Bid] = field(default_factory=list)
    ranked: list[Bid] = field(default_factory=list)
    history: list[tuple[int, ContractState, ContractState]] = field(default_factory=list)
    accepted_at_ms: int | None = None

    @property
    def job_id(self) -> str:
        assert self.job.id is not None
        return self.job.id

    @property
    def time_limit_ms(self) -> int:
        return self.job.bidding_deadline_ms

    @property
    def standing_low(self) -> int | None:
        return self.accepted_bids[-1].price if self.accepted_bids else None

    @property
    def standing_bidder(self) -> str | None:
        return self.accepted_bids[-1].bidder if self.accepted_bids else None


class Marketplace:
    def __init__(
        self,
        ledger: Ledger,
        store: ContentStore,
        commission_rate: Fraction = DEFAULT_COMMISSION,
        reputation_floor: Fraction = DEFAULT_REPUTATION_FLOOR,
        log: EventLog | None = None,
        broadcast: Callable[[Message, int], None] | None = None,
    ) -> None:
        if not 0 <= commission_rate <= 1:
            raise ValueError("commission rate must lie in [0, 1]")
        self.ledger = ledger
        self.store = store
        self.commission_rate = Fraction(commission_rate)
        self.reputation_floor = Fraction(reputation_floor)
        self.log = log if log is not None else EventLog()
        self.broadcast = broadcast
        self.principal = ledger.create_account(0, label=TEMPLATE_CONTRACT)
        self.contracts: dict[str, JobContract] = {}
        self.by_job: dict[str, str] = {}
        self.pioneers: dict[str, PioneerEntry] = {}
        self._job_counter = 0

    # helpers ------------------------------------------------------------

    def _label(self, acct: str | None) -> str | None:
        return None if acct is None else self.ledger.label(acct)

    def _emit(self, now: int, kind: str, c: JobContract | None, actor: str | None, **detail: Any) -> None:
        self.log.emit(
            now, kind,
            contractId=c.id if c else None,
            jobId=c.job_id if c else None,
            actor=self._label(actor),
            detail=detail,
        )

    def _call(self, sender: str, payload: dict[str, Any]) -> AppCall:
        return AppCall(sender, TEMPLATE_CONTRACT, payload,
                       signer=self.ledger.authority(sender), nonce=self.ledger.next_nonce(sender))

    def _run(self, now: int, build: Callable[[], Iterable[Transaction]]) -> int:
        """Build and seal one block; nonces are drawn as each tx is submitted."""
        if self.ledger.pending:
            raise WrongState("ledger has foreign pending transactions")
        try:
            for tx in build():
                self.ledger.submit(tx)
            return self.ledger.commit_block(self.ledger.next_timestamp(now)).height
        except BaseException:
            self.ledger.abort_pending()
            raise

    def _transition(self, c: JobContract, new: ContractState, now: int, actor: str | None = None,
                    **detail: Any) -> None:
        old = c.state
        if (old, new) not in ALLOWED_TRANSITIONS:
            raise WrongState(f"{c.id}: {old.value} -> {new.value} is not allowed")
        c.state = new
        c.history.append((now, old, new))
        self._emit(now, "contract_state", c, actor, **{"from": old.value, "to": new.value}, **detail)

    def contract(self, contract_id: str) -> JobContract:
        try:
            return self.contracts[contract_id]
        except KeyError:
            raise NotFound(f"unknown contract {contract_id}") from None

    def contract_for_job(self, job_id: str) -> JobContract:
        try:
            return self.contracts[self.by_job[job_id]]
        except KeyError:
            raise NotFound(f"unknown job {job_id}") from None

    def open_contracts(self) -> list[JobContract]:
        return [c for c in self.contracts.values() if c.state is S.OPEN]

    # posting and bidding ------------------------------------------------

    def post_job_request(self, req: JobRequest, now: int) -> str:
        self.ledger.account(req.client)
        if not req.target_cells:
            raise EmptyTargets("a job needs at least one target cell")
        if req.max_price <= 0:
            raise InvalidRequest("max price must be positive")
        if req.bidding_deadline_ms >= req.execution_deadline_ms:
            raise InvalidRequest("bidding deadline must precede execution deadline")
        if req.bidding_deadline_ms <= now:
            raise InvalidRequest("bidding deadline already passed")
        if self.ledger.balance(req.client) < req.max_price:
            raise InsolventClient(f"client balance below max price {req.max_price}")
        self._job_counter += 1
        job_id = f"J{self._job_counter:04d}"
        cid = f"C{self._job_counter:04d}"
        job = JobRequest(req.client, tuple(sorted(set(req.target_cells))), req.max_price,
                         req.bidding_deadline_ms, req.execution_deadline_ms, req.requirements, job_id)
        payload = {
            "op": "postJobRequest", "jobId": job_id, "contractId": cid,
            "targetCells": list(job.target_cells), "maxPrice": job.max_price,
            "biddingDeadlineMs": job.bidding_deadline_ms,
            "executionDeadlineMs": job.execution_deadline_ms,
            "requirements": job.requirements.to_dict(),
        }
        self._run(now, lambda: [self._call(req.client, payload)])
        c = JobContract(cid, job)
        self.contracts[cid] = c
        self.by_job[job_id] = cid
        self._emit(now, "job_posted", c, req.client, targetCells=list(job.target_cells),
                   maxPrice=job.max_price, biddingDeadlineMs=job.bidding_deadline_ms,
                   executionDeadlineMs=job.execution_deadline_ms)
        self._emit(now, "contract_state", c, self.principal, **{"from": None, "to": S.OPEN.value})
        if self.broadcast is not None:
            self.broadcast(Message("JobRequestMsg", dict(payload, client=self._label(req.client))), now)
        return job_id

    def submit_bid(self, bid: Bid, now: int) -> BidOutcome:
        c = self.contract_for_job(bid.job_id)
        try:
            rep = self._validate_bid(c, bid)
        except Exception as exc:
            self._emit(now, "bid_rejected", c, bid.bidder, price=bid.price, bidTimeMs=bid.time_ms,
                       reason=type(exc).__name__)
            raise
        previous = c.standing_low
        self._run(now, lambda: [self._call(bid.bidder, {
            "op": "bid", "jobId": c.job_id, "price": bid.price, "bidTimeMs": bid.time_ms})])
        recorded = Bid(bid.job_id, bid.bidder, bid.price, bid.time_ms, rep)
        c.accepted_bids.append(recorded)
        self._emit(now, "bid_accepted", c, bid.bidder, price=bid.price, bidTimeMs=bid.time_ms,
                   previousLow=previous, reputation=rep)
        return BidOutcome(True, bid.price, previous)

    def _validate_bid(self, c: JobContract, bid: Bid) -> Fraction:
        if c.state is not S.OPEN or bid.time_ms >= c.job.bidding_deadline_ms:
            raise AuctionClosed(f"auction {c.id} is closed")
        rep = self.ledger.account(bid.bidder).reputation
        if rep < self.reputation_floor:
            raise ReputationTooLow(f"reputation {rep} below floor {self.reputation_floor}")
        if bid.price <= 0:
            raise InvalidRequest("bid price must be positive")
        if bid.price > c.job.max_price:
            raise OverMaxPrice(f"bid {bid.price} above max price {c.job.max_price}")
        low = c.standing_low
        if low is not None and bid.price >= low:
            raise NotLower(f"bid {bid.price} does not undercut standing low {low}")
        return rep

    def finalize_auction(self, contract_id: str, now: int) -> JobContract:
        c = self.contract(contract_id)
        if c.state is not S.OPEN:
            raise WrongState(f"{c.id} is {c.state.value}")
        if now < c.job.bidding_deadline_ms:
            raise NotYetDue(f"{c.id} bidding runs until {c.job.bidding_deadline_ms}")
        c.ranked = sorted(c.accepted_bids, key=Bid.rank_key)
        ranking = [{"bidder": self._label(b.bidder), "price": b.price, "bidTimeMs": b.time_ms}
                   for b in c.ranked]
        if c.ranked:
            best = c.ranked[0]
            self._run(now, lambda: [self._call(self.principal, {
                "op": "finalize", "jobId": c.job_id, "winner": best.bidder, "price": best.price})])
            c.winner, c.price = best.bidder, best.price
            self._emit(now, "auction_finalized", c, self.principal, winner=self._label(best.bidder),
                       price=best.price, ranking=ranking)
            self._transition(c, S.BIDDING_CLOSED, now, self.principal)
        else:
            self._run(now, lambda: [self._call(self.principal, {"op": "expire", "jobId": c.job_id})])
            self._emit(now, "auction_finalized", c, self.principal, winner=None, price=None, ranking=[])
            self._transition(c, S.EXPIRED, now, self.principal, reason="no bids")
        return c

    # acceptance and escrow -------------------------------------------

    def decline(self, contract_id: str, now: int) -> JobContract:
        c = self.contract(contract_id)
        if c.state is not S.BIDDING_CLOSED:
            raise WrongState(f"{c.id} is {c.state.value}")
        self._transition(c, S.EXPIRED, now, c.job.client, reason="declined by client")
        return c

    def accept_and_escrow(self, contract_id: str, now: int) -> JobContract:
        c = self.contract(contract_id)
        if c.state is not S.BIDDING_CLOSED:
            raise WrongState(f"{c.id} is {c.state.value}")
        assert c.price is not None
        client = c.job.client
        if self.ledger.balance(client) < c.price:
            self._transition(c, S.FAILED, now, client, reason="InsolventClient")
            raise InsolventClient(f"client cannot cover {c.price}")
        if c.escrow_account is None:
            c.escrow_account = self.ledger.create_account(0, label=f"escrow:{c.id}")
        escrow = c.escrow_account

        def build() -> Iterable[Transaction]:
            yield Payment(client, escrow, c.price, signer=self.ledger.authority(client),
                          nonce=self.ledger.next_nonce(client))
            # hand signing power over the escrow to the template contract
            yield Rekey(escrow, self.principal, signer=self.ledger.authority(escrow),
                        nonce=self.ledger.next_nonce(escrow))

        self._run(now, build)
        c.escrow_held = c.price
        c.accepted_at_ms = now
        self._emit(now, "escrow_locked", c, client, amount=c.price, escrow=self._label(escrow))
        self._transition(c, S.ACCEPTED, now, client)
        return c

    def begin_execution(self, contract_id: str, now: int) -> JobContract:
        c = self.contract(contract_id)
        if c.state is not S.ACCEPTED:
            raise WrongState(f"{c.id} is {c.state.value}")
        self._transition(c, S.EXECUTING, now, c.winner)
        return c

    def _refund_txs(self, c: JobContract) -> list[Transaction]:
        assert c.escrow_account is not None
        escrow = c.escrow_account
        txs: list[Transaction] = []
        nonce = self.ledger.next_nonce(escrow)
        if c.escrow_held:
            txs.append(Payment(escrow, c.job.client, c.escrow_held, signer=self.principal, nonce=nonce))
            nonce += 1
        if c.deliverable is not None and c.winner is not None:
            # asset deposited in escrow goes back to its explorer
            txs.append(AssetTransfer(escrow, c.winner, c.deliverable[1], signer=self.principal, nonce=nonce))
        return txs

    def fail_contract(self, contract_id: str, now: int, reason: str) -> JobContract:
        """Fail an accepted contract, refunding escrow; the winner loses reputation."""
        c = self.contract(contract_id)
        if c.state not in ESCROW_STATES:
            raise WrongState(f"{c.id} is {c.state.value}")
        refund = c.escrow_held

        def build() -> Iterable[Transaction]:
            yield from self._refund_txs(c)
            yield self._call(self.principal, {"op": "fail", "jobId": c.job_id, "reason": reason})

        self._run(now, build)
        c.escrow_held = 0
        self._emit(now, "refund", c, self.principal, amount=refund, to=self._label(c.job.client))
        self._transition(c, S.FAILED, now, self.principal, reason=reason)
        if c.winner is not None:
            self.update_reputation(c.winner, "failed_after_win", now)
        return c

    # delivery and settlement -------------------------------------------

    def submit_deliverable(self, contract_id: str, blob: bytes, metadata: MapMetadata,
                           now: int) -> PlausibilityReport:
        c = self.contract(contract_id)
        if c.state is not S.EXECUTING:
            raise WrongState(f"{c.id} is {c.state.value}")
        if now > c.job.execution_deadline_ms:
            self.fail_contract(c.id, now, "DeadlineExceeded")
            raise DeadlineExceeded(f"{c.id} was due at {c.job.execution_deadline_ms}")
        assert c.winner is not None and c.escrow_account is not None
        winner = c.winner
        key = self.store.put(blob)
        asset_id = self.ledger.next_asset_id
        self._run(now, lambda: [AssetCreate(
            winner, manager=winner, freeze_authority=self.principal, clawback_authority=self.principal,
            metadata=metadata.to_dict(), signer=self.ledger.authority(winner),
            nonce=self.ledger.next_nonce(winner))])
        self._emit(now, "asset_minted", c, winner, assetId=asset_id, contentHash=key, sizeBytes=len(blob))

        report = self.plausibility_check(c, key, metadata, asset_id)
        if report.passed:
            escrow = c.escrow_account

            def build() -> Iterable[Transaction]:
                yield AssetTransfer(winner, escrow, asset_id, signer=self.ledger.authority(winner),
                                    nonce=self.ledger.next_nonce(winner))
                yield self._call(self.principal, {"op": "plausibility", "jobId": c.job_id,
                                                  "assetId": asset_id, "passed": True})

            self._run(now, build)
            c.deliverable = (key, asset_id)
            self._emit(now, "deliverable_checked", c, winner, passed=True, assetId=asset_id, failures={})
            self._transition(c, S.DELIVERED, now, winner)
        else:
            self._emit(now, "deliverable_checked", c, winner, passed=False, assetId=asset_id,
                       failures=report.failures)
            self.fail_contract(c.id, now, "plausibility: " + ",".join(sorted(report.failures)))
        return report

    def plausibility_check(self, c: JobContract, key: str, metadata: MapMetadata,
                           asset_id: int) -> PlausibilityReport:
        req = c.job.requirements
        failures: dict[str, str] = {}
        try:
            self.store.get(key)
            if metadata.content_hash != key:
                failures["a"] = "content hash does not match the delivered blob"
        except (IntegrityError, NotFound) as exc:
            failures["a"] = str(exc)
        cells = set(metadata.cells)
        if not cells >= set(c.job.target_cells):
            failures["b"] = "map does not cover every target cell"
        elif not set(metadata.pioneer_of) <= cells:
            failures["b"] = "pioneer cells outside mapped cells"
        if not metadata.resolution <= req.min_resolution:
            failures["c"] = f"resolution {metadata.resolution} coarser than {req.min_resolution}"
        if not set(metadata.sensors) >= req.required_sensors:
            failures["d"] = "missing required sensors"
        if req.allowed_algorithms and metadata.algorithm not in req.allowed_algorithms:
            failures["e"] = f"algorithm {metadata.algorithm!r} not allowed"
        minted = self.ledger.asset(asset_id)
        on_chain = dict(minted.metadata)
        on_chain.pop("price", None)
        if minted.destroyed or on_chain != metadata.descriptive() or metadata.explorer != c.winner:
            failures["f"] = "descriptive metadata differs from the minted record"
        return PlausibilityReport(not failures, failures, asset_id, key)

    def settle(self, contract_id: str, now: int) -> SettlementRecord:
        c = self.contract(contract_id)
        if c.state is not S.DELIVERED:
            raise WrongState(f"{c.id} is {c.state.value}")
        assert c.winner and c.price is not None and c.deliverable and c.escrow_account
        escrow, winner, client = c.escrow_account, c.winner, c.job.client
        asset_id = c.deliverable[1]
        new_cells = tuple(cell for cell in c.job.target_cells if cell not in self.pioneers)

        def build() -> Iterable[Transaction]:
            nonce = self.ledger.next_nonce(escrow)
            yield Payment(escrow, winner, c.escrow_held, signer=self.principal, nonce=nonce)
            yield AssetTransfer(escrow, client, asset_id, signer=self.principal, nonce=nonce + 1)
            yield self._call(self.principal, {"op": "settle", "jobId": c.job_id, "assetId": asset_id,
                                              "pioneerCells": list(new_cells)})

        height = self._run(now, build)
        c.escrow_held = 0
        for cell in new_cells:
            self.pioneers[cell] = PioneerEntry(client, winner, asset_id, now)
        self._emit(now, "settled", c, self.principal, winner=self._label(winner), client=self._label(client),
                   price=c.price, assetId=asset_id, pioneerCells=list(new_cells), blockHeight=height)
        self._transition(c, S.SETTLED, now, self.principal)
        self.update_reputation(winner, "settled", now)
        return SettlementRecord(c.id, winner, client, c.price, asset_id, new_cells, height)

    # secondary market ---------------------------------------------------

    def resell_asset(self, asset_id: int, seller: str, buyer: str, sale_price: int, now: int) -> SaleRecord:
        if self.ledger.holdings(seller).get(asset_id) != 1:
            raise NotHolder(f"seller does not hold asset {asset_id}")
        if sale_price <= 0:
            raise InvalidRequest("sale price must be positive")
        if self.ledger.balance(buyer) < sale_price:
            raise InsolventBuyer(f"buyer cannot cover {sale_price}")
        meta = self.ledger.asset(asset_id).metadata
        pioneers = sorted({self.pioneers[cell].client for cell in meta.get("pioneerOf", ())
                           if cell in self.pioneers})
        commission = (sale_price * self.commission_rate.numerator) // self.commission_rate.denominator
        payouts: dict[str, int] = {}
        if pioneers:
            share = commission // len(pioneers)
            payouts = {p: share for p in pioneers}
            proceeds = sale_price - share * len(pioneers)
        else:
            commission = 0
            proceeds = sale_price
        credit: dict[str, int] = {}
        for acct, amount in [(seller, proceeds), *payouts.items()]:
            credit[acct] = credit.get(acct, 0) + amount

        def build() -> Iterable[Transaction]:
            for acct, amount in sorted(credit.items()):
                if amount > 0 and acct != buyer:
                    yield Payment(buyer, acct, amount, signer=self.ledger.authority(buyer),
                                  nonce=self.ledger.next_nonce(buyer))
            yield AssetTransfer(seller, buyer, asset_id, signer=self.ledger.authority(seller),
                                nonce=self.ledger.next_nonce(seller))

        self._run(now, build)
        self._emit(now, "resale", None, seller, assetId=asset_id, buyer=self._label(buyer), price=sale_price,
                   commission=commission, payouts={self._label(k): v for k, v in payouts.items()})
        return SaleRecord(asset_id, seller, buyer, sale_price, commission, payouts, proceeds)

    # reputation ---------------------------------------------------------

    def update_reputation(self, account: str, event: str, now: int | None = None) -> Fraction:
        try:
            delta = REPUTATION_DELTAS[event]
        except KeyError:
            raise ValueError(f"unknown reputation event {event!r}") from None
        score = min(Fraction(1), max(Fraction(0), self.ledger.account(account).reputation + delta))
        self.ledger.set_reputation(account, score)
        if now is not None:
            self._emit(now, "reputation", None, account, event=event, score=score)
        return score

    # deadlines --------------------------------------------------------

    def check_deadlines(self, now: int) -> list[JobContract]:
        """Finalize due auctions and fail executions past their deadline."""
        changed = []
        for c in list(self.contracts.values()):
            if c.state is S.OPEN and now >= c.job.bidding_deadline_ms:
                self.finalize_auction(c.id, now)
                changed.append(c)
            elif c.state in (S.ACCEPTED, S.EXECUTING) and now > c.job.execution_deadline_ms:
                self.fail_contract(c.id, now, "DeadlineExceeded")
                changed.append(c)
        return changed
