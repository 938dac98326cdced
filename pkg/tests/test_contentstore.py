import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lunamarket.contentstore import EMPTY_DIGEST, ContentStore
from lunamarket.errors import IntegrityError, NotFound
from sha256_oracle import sha256_hex


@pytest.fixture(params=["memory", "disk"])
def store(request, tmp_path):
    return ContentStore(tmp_path / "blobs" if request.param == "disk" else None)


def test_put_returns_oracle_digest(store):
    key = store.put(b"hello moon")
    assert key == sha256_hex(b"hello moon")
    assert store.get(key) == b"hello moon"
    assert key in store
    assert store.size(key) == 10


def test_empty_blob(store):
    assert store.put(b"") == EMPTY_DIGEST
    assert store.get(EMPTY_DIGEST) == b""


def test_put_is_idempotent(store):
    assert store.put(b"x") == store.put(b"x")


def test_missing_key(store):
    with pytest.raises(NotFound):
        store.get("00" * 32)
    assert not store.verify("00" * 32)


def test_corruption_detected(store):
    key = store.put(bytes(range(64)))
    store.corrupt(key, 5)
    assert not store.verify(key)
    with pytest.raises(IntegrityError):
        store.get(key)


def test_disk_layout(tmp_path):
    store = ContentStore(tmp_path)
    key = store.put(b"abc")
    assert (tmp_path / key[:2] / key).read_bytes() == b"abc"
    # a fresh instance over the same directory sees the blob
    assert ContentStore(tmp_path).get(key) == b"abc"


@settings(max_examples=40, deadline=None)
@given(st.binary(max_size=2000))
def test_roundtrip_property(data):
    store = ContentStore()
    key = store.put(data)
    assert key == sha256_hex(data)
    assert store.get(key) == data
