"""Single-sequencer simulated ledger.

Accounts hold integer microcredit balances drawn from a fixed genesis faucet,
managed non-fungible assets carry authority-gated mutations (freeze, clawback,
reconfigure, destroy), and committed blocks form an append-only hash chain.

Blocks are stored as their canonical bytes. A block's hash is the SHA-256 of
its encoding without the trailing stored hash:

    u64 height | 32B prev_hash | u64 timestamp_ms | u32 n_txs | n * (u32 len | tx bytes) | 32B hash

Each transaction encodes as ``u8 kind | u64 nonce | account signer`` followed
by its kind-specific fields (see ``codec`` for the field encodings).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from fractions import Fraction
from typing import Any, Callable, ClassVar, Iterable, Iterator, Union

from lunamarket import codec
from lunamarket.errors import (
    AssetDestroyed,
    BadNonce,
    FaucetExhausted,
    FrozenHolding,
    InsufficientFunds,
    LedgerError,
    NonMonotoneTimestamp,
    NotFound,
    Unauthorized,
)

MICRO = 1_000_000
DEFAULT_GENESIS_SUPPLY = 10**15
DEFAULT_REPUTATION = Fraction(1, 2)


def credits(amount: int | float | str | Fraction) -> int:
    """Convert whole credits to integer microcredits (``credits(10) == 10_000_000``)."""
    return int(Fraction(amount) * MICRO)


# --------------------------------------------------------------------------
# transactions

# field codecs: name -> (writer method, reader method)
_CODECS = {
    "acct": ("account", "account"),
    "opt_acct": ("opt_account", "opt_account"),
    "u64": ("u64", "u64"),
    "bool": ("boolean", "boolean"),
    "str": ("string", "string"),
    "json": ("json", "json"),
}


class _TxBase:
    KIND: ClassVar[int]
    SCHEMA: ClassVar[tuple[tuple[str, str], ...]]
    ACTOR: ClassVar[str]

    signer: str
    nonce: int

    @property
    def actor(self) -> str:
        """The account on whose behalf the transaction acts."""
        return getattr(self, self.ACTOR)

    def encode(self) -> bytes:
        w = codec.Writer().u8(self.KIND).u64(self.nonce).account(self.signer)
        for name, kind in self.SCHEMA:
            getattr(w, _CODECS[kind][0])(getattr(self, name))
        return w.getvalue()

    @property
    def size_bytes(self) -> int:
        return len(self.encode())

    @property
    def tx_id(self) -> str:
        return codec.hexdigest(self.encode())

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"kind": type(self).__name__, "signer": self.signer, "nonce": self.nonce}
        for name, _ in self.SCHEMA:
            out[name] = getattr(self, name)
        return out


@dataclass(frozen=True)
class Payment(_TxBase):
    sender: str
    recipient: str
    amount: int
    signer: str
    nonce: int
    KIND = 1
    SCHEMA = (("sender", "acct"), ("recipient", "acct"), ("amount", "u64"))
    ACTOR = "sender"


@dataclass(frozen=True)
class AssetCreate(_TxBase):
    creator: str
    manager: str | None
    freeze_authority: str | None
    clawback_authority: str | None
    metadata: dict
    signer: str
    nonce: int
    KIND = 2
    SCHEMA = (
        ("creator", "acct"),
        ("manager", "opt_acct"),
        ("freeze_authority", "opt_acct"),
        ("clawback_authority", "opt_acct"),
        ("metadata", "json"),
    )
    ACTOR = "creator"


@dataclass(frozen=True)
class AssetTransfer(_TxBase):
    sender: str
    recipient: str
    asset_id: int
    signer: str
    nonce: int
    KIND = 3
    SCHEMA = (("sender", "acct"), ("recipient", "acct"), ("asset_id", "u64"))
    ACTOR = "sender"


@dataclass(frozen=True)
class AssetFreeze(_TxBase):
    authority: str
    target: str
    asset_id: int
    frozen: bool
    signer: str
    nonce: int
    KIND = 4
    SCHEMA = (("authority", "acct"), ("target", "acct"), ("asset_id", "u64"), ("frozen", "bool"))
    ACTOR = "authority"


@dataclass(frozen=True)
class AssetClawback(_TxBase):
    authority: str
    holder: str
    recipient: str
    asset_id: int
    signer: str
    nonce: int
    KIND = 5
    SCHEMA = (("authority", "acct"), ("holder", "acct"), ("recipient", "acct"), ("asset_id", "u64"))
    ACTOR = "authority"


@dataclass(frozen=True)
class AssetReconfigure(_TxBase):
    """Only the metadata ``price`` field is mutable after mint."""

    manager: str
    asset_id: int
    price: int
    signer: str
    nonce: int
    KIND = 6
    SCHEMA = (("manager", "acct"), ("asset_id", "u64"), ("price", "u64"))
    ACTOR = "manager"


@dataclass(frozen=True)
class AssetDestroy(_TxBase):
    manager: str
    asset_id: int
    signer: str
    nonce: int
    KIND = 7
    SCHEMA = (("manager", "acct"), ("asset_id", "u64"))
    ACTOR = "manager"


@dataclass(frozen=True)
class Rekey(_TxBase):
    account: str
    new_authority: str
    signer: str
    nonce: int
    KIND = 8
    SCHEMA = (("account", "acct"), ("new_authority", "acct"))
    ACTOR = "account"


@dataclass(frozen=True)
class AppCall(_TxBase):
    sender: str
    contract_id: str
    payload: dict
    signer: str
    nonce: int
    KIND = 9
    SCHEMA = (("sender", "acct"), ("contract_id", "str"), ("payload", "json"))
    ACTOR = "sender"


Transaction = Union[
    Payment, AssetCreate, AssetTransfer, AssetFreeze, AssetClawback,
    AssetReconfigure, AssetDestroy, Rekey, AppCall,
]
TX_TYPES: dict[int, type] = {
    t.KIND: t
    for t in (Payment, AssetCreate, AssetTransfer, AssetFreeze, AssetClawback,
              AssetReconfigure, AssetDestroy, Rekey, AppCall)
}
_TX_BY_NAME = {t.__name__: t for t in TX_TYPES.values()}


def decode_tx(data: bytes) -> Transaction:
    r = codec.Reader(data)
    tx = _read_tx(r)
    r.finish()
    return tx


def _read_tx(r: codec.Reader) -> Transaction:
    kind = r.u8()
    cls = TX_TYPES.get(kind)
    if cls is None:
        raise codec.DecodeError(f"unknown tx kind {kind}")
    kwargs: dict[str, Any] = {"nonce": r.u64(), "signer": r.account()}
    for name, ftype in cls.SCHEMA:
        kwargs[name] = getattr(r, _CODECS[ftype][1])()
    return cls(**kwargs)


def tx_from_dict(d: dict[str, Any]) -> Transaction:
    cls = _TX_BY_NAME[d["kind"]]
    names = {f.name for f in fields(cls)}
    return cls(**{k: v for k, v in d.items() if k in names})


# --------------------------------------------------------------------------
# blocks


@dataclass(frozen=True)
class Block:
    height: int
    prev_hash: bytes
    timestamp: int
    txs: tuple[Transaction, ...]
    hash: bytes = b""

    def preimage(self) -> bytes:
        w = codec.Writer().u64(self.height).raw(self.prev_hash).u64(self.timestamp).u32(len(self.txs))
        for tx in self.txs:
            w.blob(tx.encode())
        return w.getvalue()

    def compute_hash(self) -> bytes:
        return codec.digest(self.preimage())

    def encode(self) -> bytes:
        return self.preimage() + self.hash

    @classmethod
    def decode(cls, data: bytes) -> Block:
        r = codec.Reader(data)
        height = r.u64()
        prev = r.raw(codec.DIGEST_SIZE)
        ts = r.u64()
        txs = tuple(decode_tx(r.blob()) for _ in range(r.u32()))
        h = r.raw(codec.DIGEST_SIZE)
        r.finish()
        return cls(height, prev, ts, txs, h)

    def to_dict(self) -> dict[str, Any]:
        return {
            "height": self.height,
            "prevHash": self.prev_hash.hex(),
            "timestamp": self.timestamp,
            "txs": [dict(tx.to_dict(), txId=tx.tx_id) for tx in self.txs],
            "hash": self.hash.hex(),
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> Block:
        return cls(
            height=d["height"],
            prev_hash=bytes.fromhex(d["prevHash"]),
            timestamp=d["timestamp"],
            txs=tuple(tx_from_dict(t) for t in d["txs"]),
            hash=bytes.fromhex(d["hash"]),
        )


def verify_blocks(blocks: Iterable[Block]) -> bool:
    """True iff heights are consecutive from 0, hashes recompute and prev hashes link."""
    prev = codec.ZERO_DIGEST
    last_ts = -1
    for i, b in enumerate(blocks):
        if b.height != i or b.prev_hash != prev or b.timestamp <= last_ts:
            return False
        if b.compute_hash() != b.hash:
            return False
        prev, last_ts = b.hash, b.timestamp
    return True


def verify_encoded_chain(raw_blocks: Iterable[bytes]) -> bool:
    blocks = []
    for raw in raw_blocks:
        try:
            b = Block.decode(raw)
        except (codec.DecodeError, ValueError, KeyError, TypeError):
            return False
        # hash over the stored bytes themselves, not a re-encoding
        if codec.digest(raw[: -codec.DIGEST_SIZE]) != b.hash:
            return False
        blocks.append(b)
    return verify_blocks(blocks)


def verify_jsonl(lines: Iterable[str]) -> bool:
    """Verify a JSON Lines ledger export (one block per line)."""
    blocks = []
    try:
        for line in lines:
            if line.strip():
                blocks.append(Block.from_dict(json.loads(line)))
    except (ValueError, KeyError, TypeError):
        return False
    try:
        return verify_blocks(blocks)
    except (ValueError, TypeError):
        return False


# --------------------------------------------------------------------------
# state


@dataclass
class Account:
    id: str
    authority: str
    balance: int
    holdings: dict[int, int] = field(default_factory=dict)
    reputation: Fraction = DEFAULT_REPUTATION
    last_nonce: int = 0
    label: str | None = None

    def copy(self) -> Account:
        return Account(self.id, self.authority, self.balance, dict(self.holdings),
                       self.reputation, self.last_nonce, self.label)


@dataclass
class AssetParams:
    id: int
    creator: str
    manager: str | None
    freeze_authority: str | None
    clawback_authority: str | None
    metadata: dict
    frozen_holders: set[str] = field(default_factory=set)
    destroyed: bool = False

    def copy(self) -> AssetParams:
        return AssetParams(self.id, self.creator, self.manager, self.freeze_authority,
                           self.clawback_authority, dict(self.metadata), set(self.frozen_holders),
                           self.destroyed)

    def holder_frozen(self, account: str) -> bool:
        return account in self.frozen_holders


@dataclass
class _State:
    accounts: dict[str, Account] = field(default_factory=dict)
    assets: dict[int, AssetParams] = field(default_factory=dict)
    next_asset_id: int = 1

    def copy(self) -> _State:
        return _State(
            {k: a.copy() for k, a in self.accounts.items()},
            {k: a.copy() for k, a in self.assets.items()},
            self.next_asset_id,
        )

    def account(self, acct: str) -> Account:
        try:
            return self.accounts[acct]
        except KeyError:
            raise NotFound(f"unknown account {acct}") from None

    def asset(self, asset_id: int) -> AssetParams:
        try:
            a = self.assets[asset_id]
        except KeyError:
            raise NotFound(f"unknown asset {asset_id}") from None
        if a.destroyed:
            raise AssetDestroyed(f"asset {asset_id} is destroyed")
        return a

    def apply(self, tx: Transaction) -> None:
        """Validate ``tx`` against this state and apply it; no mutation on error."""
        actor = self.account(tx.actor)
        if tx.signer != actor.authority:
            raise Unauthorized(f"signer is not the authority of {tx.actor[:12]}")
        if tx.nonce <= actor.last_nonce:
            raise BadNonce(f"nonce {tx.nonce} <= {actor.last_nonce}")
        handler = getattr(self, "_apply_" + type(tx).__name__)
        handler(tx, actor)
        actor.last_nonce = tx.nonce

    def _apply_Payment(self, tx: Payment, sender: Account) -> None:
        recipient = self.account(tx.recipient)
        if tx.amount <= 0:
            raise LedgerError("payment amount must be positive")
        if sender.balance < tx.amount:
            raise InsufficientFunds(f"balance {sender.balance} < {tx.amount}")
        sender.balance -= tx.amount
        recipient.balance += tx.amount

    def _apply_AssetCreate(self, tx: AssetCreate, creator: Account) -> None:
        for ref in (tx.manager, tx.freeze_authority, tx.clawback_authority):
            if ref is not None:
                self.account(ref)
        aid = self.next_asset_id
        self.assets[aid] = AssetParams(aid, tx.creator, tx.manager, tx.freeze_authority,
                                       tx.clawback_authority, dict(tx.metadata))
        self.next_asset_id += 1
        creator.holdings[aid] = 1

    def _apply_AssetTransfer(self, tx: AssetTransfer, sender: Account) -> None:
        asset = self.asset(tx.asset_id)
        recipient = self.account(tx.recipient)
        if sender.holdings.get(tx.asset_id, 0) != 1:
            raise LedgerError(f"sender does not hold asset {tx.asset_id}")
        if asset.holder_frozen(tx.sender):
            raise FrozenHolding(f"holding of asset {tx.asset_id} is frozen")
        del sender.holdings[tx.asset_id]
        recipient.holdings[tx.asset_id] = 1

    def _apply_AssetFreeze(self, tx: AssetFreeze, _: Account) -> None:
        asset = self.asset(tx.asset_id)
        if asset.freeze_authority is None or asset.freeze_authority != tx.authority:
            raise Unauthorized("freeze authority missing or mismatched")
        self.account(tx.target)
        if tx.frozen:
            asset.frozen_holders.add(tx.target)
        else:
            asset.frozen_holders.discard(tx.target)

    def _apply_AssetClawback(self, tx: AssetClawback, _: Account) -> None:
        asset = self.asset(tx.asset_id)
        if asset.clawback_authority is None or asset.clawback_authority != tx.authority:
            raise Unauthorized("clawback authority missing or mismatched")
        holder = self.account(tx.holder)
        recipient = self.account(tx.recipient)
        if holder.holdings.get(tx.asset_id, 0) != 1:
            raise LedgerError(f"holder does not hold asset {tx.asset_id}")
        del holder.holdings[tx.asset_id]
        recipient.holdings[tx.asset_id] = 1

    def _apply_AssetReconfigure(self, tx: AssetReconfigure, _: Account) -> None:
        asset = self.asset(tx.asset_id)
        if asset.manager is None or asset.manager != tx.manager:
            raise Unauthorized("manager missing or mismatched")
        asset.metadata["price"] = tx.price

    def _apply_AssetDestroy(self, tx: AssetDestroy, _: Account) -> None:
        asset = self.asset(tx.asset_id)
        if asset.manager is None or asset.manager != tx.manager:
            raise Unauthorized("manager missing or mismatched")
        asset.destroyed = True
        asset.frozen_holders.clear()
        for acct in self.accounts.values():
            acct.holdings.pop(tx.asset_id, None)

    def _apply_Rekey(self, tx: Rekey, account: Account) -> None:
        self.account(tx.new_authority)
        account.authority = tx.new_authority

    def _apply_AppCall(self, tx: AppCall, _: Account) -> None:
        pass


# --------------------------------------------------------------------------
# the ledger


class ChainStore:
    """Append-only list of encoded blocks."""

    def __init__(self) -> None:
        self.raw: list[bytes] = []

    def __len__(self) -> int:
        return len(self.raw)

    def append(self, block: Block) -> None:
        self.raw.append(block.encode())

    def block(self, height: int) -> Block:
        return Block.decode(self.raw[height])

    def __iter__(self) -> Iterator[Block]:
        return (Block.decode(r) for r in self.raw)

    def corrupt(self, height: int, offset: int, mask: int = 0x01) -> None:
        """Test hook: XOR one byte of a stored block."""
        buf = bytearray(self.raw[height])
        buf[offset] ^= mask
        self.raw[height] = bytes(buf)


FaultHook = Callable[[int, Transaction], None]


class Ledger:
    """The simulated chain plus its account/asset state.

    Transactions are validated against a working state when submitted and
    re-applied to the committed state when a block is sealed. A failure during
    sealing (e.g. from ``fault_hook``) aborts the whole block: pending
    transactions are dropped and state reverts to the last committed block.
    """

    def __init__(self, genesis_supply: int = DEFAULT_GENESIS_SUPPLY, salt: str = "lunamarket") -> None:
        self.genesis_supply = genesis_supply
        self.faucet = genesis_supply
        self.salt = salt
        self.chain = ChainStore()
        self.fault_hook: FaultHook | None = None
        self._committed = _State()
        self._working = _State()
        self._pending: list[Transaction] = []
        self._tx_index: dict[str, tuple[int, int]] = {}
        self._account_counter = 0
        self._sealing = False
        self._last_hash = codec.ZERO_DIGEST
        self._last_timestamp: int | None = None

    # accounts ---------------------------------------------------------

    def create_account(self, initial_balance: int = 0, label: str | None = None) -> str:
        if self._sealing:
            raise LedgerError("cannot create accounts while a block is being sealed")
        if initial_balance < 0:
            raise LedgerError("initial balance must be non-negative")
        if initial_balance > self.faucet:
            raise FaucetExhausted(f"faucet holds {self.faucet}, requested {initial_balance}")
        w = codec.Writer().string(self.salt).u64(self._account_counter)
        acct_id = codec.hexdigest(b"lunamarket/account/" + w.getvalue())
        self._account_counter += 1
        self.faucet -= initial_balance
        for state in (self._committed, self._working):
            state.accounts[acct_id] = Account(acct_id, acct_id, initial_balance, label=label)
        return acct_id

    def set_reputation(self, acct: str, score: Fraction) -> None:
        for state in (self._committed, self._working):
            state.account(acct).reputation = score

    # transactions -----------------------------------------------------

    def next_nonce(self, acct: str) -> int:
        return self._working.account(acct).last_nonce + 1

    @property
    def next_asset_id(self) -> int:
        return self._working.next_asset_id

    def authority(self, acct: str) -> str:
        return self._working.account(acct).authority

    def submit(self, tx: Transaction) -> str:
        self._working.apply(tx)
        self._pending.append(tx)
        return tx.tx_id

    @property
    def pending(self) -> tuple[Transaction, ...]:
        return tuple(self._pending)

    def next_timestamp(self, now: int) -> int:
        """Earliest valid block timestamp at or after ``now``."""
        if self._last_timestamp is None:
            return now
        return max(now, self._last_timestamp + 1)

    def commit_block(self, timestamp: int) -> Block:
        if self._last_timestamp is not None and timestamp <= self._last_timestamp:
            raise NonMonotoneTimestamp(f"{timestamp} <= {self._last_timestamp}")
        txs = tuple(self._pending)
        new_state = self._committed.copy()
        self._sealing = True
        try:
            for i, tx in enumerate(txs):
                if self.fault_hook is not None:
                    self.fault_hook(i, tx)
                new_state.apply(tx)
        except BaseException:
            self.abort_pending()
            raise
        finally:
            self._sealing = False
        block = Block(len(self.chain), self._last_hash, timestamp, txs)
        block = Block(block.height, block.prev_hash, timestamp, txs, block.compute_hash())
        self.chain.append(block)
        for i, tx in enumerate(txs):
            self._tx_index[tx.tx_id] = (block.height, i)
        self._committed = new_state
        self._working = new_state.copy()
        self._pending = []
        self._last_hash = block.hash
        self._last_timestamp = timestamp
        return block

    def abort_pending(self) -> None:
        self._pending = []
        self._working = self._committed.copy()

    def execute(self, txs: Iterable[Transaction], now: int) -> Block:
        """Submit ``txs`` and seal them into one block; all or nothing."""
        if self._pending:
            raise LedgerError("execute requires an empty pending block")
        try:
            for tx in txs:
                self.submit(tx)
        except BaseException:
            self.abort_pending()
            raise
        return self.commit_block(self.next_timestamp(now))

    # verification -----------------------------------------------------

    def verify_chain(self) -> bool:
        return verify_encoded_chain(self.chain.raw)

    def total_supply(self) -> int:
        return self.faucet + sum(a.balance for a in self._committed.accounts.values())

    # queries (committed snapshot) --------------------------------------

    def balance(self, acct: str) -> int:
        return self._committed.account(acct).balance

    def account(self, acct: str) -> Account:
        return self._committed.account(acct).copy()

    def holdings(self, acct: str) -> dict[int, int]:
        return dict(self._committed.account(acct).holdings)

    def holder_of(self, asset_id: int) -> str | None:
        for acct in self._committed.accounts.values():
            if acct.holdings.get(asset_id):
                return acct.id
        return None

    def asset(self, asset_id: int) -> AssetParams:
        try:
            return self._committed.assets[asset_id].copy()
        except KeyError:
            raise NotFound(f"unknown asset {asset_id}") from None

    def block(self, height: int) -> Block:
        if not 0 <= height < len(self.chain):
            raise NotFound(f"no block at height {height}")
        return self.chain.block(height)

    def tx(self, tx_id: str) -> Transaction:
        try:
            height, pos = self._tx_index[tx_id]
        except KeyError:
            raise NotFound(f"unknown tx {tx_id}") from None
        return self.chain.block(height).txs[pos]

    def accounts(self) -> list[str]:
        return list(self._committed.accounts)

    @property
    def height(self) -> int:
        return len(self.chain)

    def label(self, acct: str) -> str:
        a = self._committed.accounts.get(acct)
        return (a.label if a and a.label else acct[:12])

    # export -----------------------------------------------------------

    def export_lines(self) -> Iterator[str]:
        for b in self.chain:
            yield json.dumps(b.to_dict(), sort_keys=True, separators=(",", ":"))
