from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from lunamarket.contentstore import ContentStore  # noqa: E402
from lunamarket.ledger import Ledger, Payment, credits  # noqa: E402
from lunamarket.marketplace import Marketplace  # noqa: E402


@pytest.fixture
def ledger() -> Ledger:
    return Ledger(genesis_supply=credits(1_000_000), salt="tests")


@pytest.fixture
def funded(ledger: Ledger):
    """Ledger plus three accounts holding 1000 credits each."""
    accts = [ledger.create_account(credits(1000), label=name) for name in ("alice", "bob", "carol")]
    return ledger, accts


def pay(ledger: Ledger, src: str, dst: str, amount: int) -> Payment:
    return Payment(src, dst, amount, signer=ledger.authority(src), nonce=ledger.next_nonce(src))


@pytest.fixture
def market(ledger: Ledger) -> Marketplace:
    return Marketplace(ledger, ContentStore())
