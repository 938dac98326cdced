"""Shared builders for marketplace-level tests."""

from __future__ import annotations

from dataclasses import dataclass, replace

from lunamarket import codec
from lunamarket.contentstore import ContentStore
from lunamarket.events import EventLog
from lunamarket.ledger import AssetCreate, AssetTransfer, Ledger, Payment, credits
from lunamarket.marketplace import Bid, JobRequest, MapMetadata, Marketplace, Requirements


@dataclass
class World:
    ledger: Ledger
    market: Marketplace
    client: str
    robots: list[str]
    log: EventLog


def make_world(n_robots: int = 3, client_balance: int = credits(100), **market_kw) -> World:
    ledger = Ledger(genesis_supply=credits(10**6), salt="market-tests")
    log = EventLog()
    market = Marketplace(ledger, ContentStore(), log=log, **market_kw)
    client = ledger.create_account(client_balance, label="SO")
    robots = [ledger.create_account(0, label=f"SP{i}") for i in range(n_robots)]
    return World(ledger, market, client, robots, log)


def job(w: World, cells=("red",), max_price=credits(50), bid_deadline=20_000, exec_deadline=600_000,
        requirements: Requirements = Requirements(), t0: int = 0) -> JobRequest:
    return JobRequest(w.client, tuple(cells), max_price, t0 + bid_deadline, t0 + exec_deadline, requirements)


def post(w: World, now: int = 0, **kw) -> str:
    job_id = w.market.post_job_request(job(w, t0=now, **kw), now)
    return w.market.by_job[job_id]


def bid(w: World, cid: str, robot: str, price: int, t: int) -> None:
    c = w.market.contract(cid)
    w.market.submit_bid(Bid(c.job_id, robot, price, t), t)


def metadata(w: World, cid: str, blob: bytes, **overrides) -> MapMetadata:
    c = w.market.contract(cid)
    meta = MapMetadata(
        cells=c.job.target_cells,
        bounding_coords=(),
        resolution=0.1,
        sensors=("camera",),
        algorithm="visual-slam",
        price=c.price or 0,
        content_hash=codec.hexdigest(blob),
        explorer=c.winner,
        pioneer_of=c.job.target_cells,
    )
    return replace(meta, **overrides)


def to_executing(w: World, price: int = credits(10), winner: int = 0, t0: int = 0, **job_kw) -> str:
    cid = post(w, now=t0, **job_kw)
    bid(w, cid, w.robots[winner], price, t0 + 1000)
    w.market.finalize_auction(cid, t0 + 20_000)
    w.market.accept_and_escrow(cid, t0 + 21_000)
    w.market.begin_execution(cid, t0 + 22_000)
    return cid


def to_settled(w: World, price: int = credits(10), blob: bytes = b"map", winner: int = 0, t0: int = 0,
               **job_kw) -> str:
    """Drive a fresh job to Settled inside [t0, t0 + 31 s]."""
    cid = to_executing(w, price, winner, t0, **job_kw)
    report = w.market.submit_deliverable(cid, blob, metadata(w, cid, blob), t0 + 30_000)
    assert report.passed, report.failures
    w.market.settle(cid, t0 + 31_000)
    return cid


def mint(ledger, creator, manager=None, freeze=None, clawback=None, meta=None):
    return AssetCreate(creator, manager, freeze, clawback, meta or {"cells": ["m1:0"]},
                       signer=ledger.authority(creator), nonce=ledger.next_nonce(creator))


def random_valid_txs(ledger, accts, n, rng):
    made = 0
    while made < n:
        kind = rng.random()
        src = rng.choice(accts)
        dst = rng.choice([x for x in accts if x != src])
        holdings = ledger.holdings(src)
        if kind < 0.7 or not holdings:
            amt = rng.randint(1, max(1, ledger.balance(src) // 10))
            if ledger.balance(src) < amt:
                continue
            tx = _pay(ledger, src, dst, amt)
        elif kind < 0.85:
            tx = mint(ledger, src, manager=src)
        else:
            tx = AssetTransfer(src, dst, sorted(holdings)[0], signer=ledger.authority(src),
                               nonce=ledger.next_nonce(src))
        ledger.submit(tx)
        made += 1
        if rng.random() < 0.1:
            ledger.commit_block(ledger.next_timestamp(made))
    if ledger.pending:
        ledger.commit_block(ledger.next_timestamp(n + 1))


def _pay(ledger: Ledger, src: str, dst: str, amount: int) -> Payment:
    return Payment(src, dst, amount, signer=ledger.authority(src), nonce=ledger.next_nonce(src))
