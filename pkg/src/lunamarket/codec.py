"""Canonical binary encoding and the digest used by the chain and the content store.

Digest: SHA-256 (FIPS 180-4) everywhere.

Encoding rules, applied field by field in declared order:

* unsigned integers: 8-byte big-endian (``u64``); counts and lengths 4-byte big-endian (``u32``)
* booleans: one byte, 0x00 or 0x01
* account ids: the raw 32 bytes behind the 64-char lowercase hex id
* optional account ids: one presence byte, then the 32 bytes if present
* strings: ``u32`` length prefix + UTF-8 bytes
* structured payloads (metadata, app-call payloads): ``u32`` length prefix +
  canonical JSON (sorted keys, no whitespace, UTF-8)
"""

from __future__ import annotations

import hashlib
import json
import struct
from typing import Any

DIGEST_SIZE = 32
ZERO_DIGEST = bytes(DIGEST_SIZE)


def digest(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


def hexdigest(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def canonical_json(obj: Any) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode()


class DecodeError(ValueError):
    pass


class Writer:
    def __init__(self) -> None:
        self._parts: list[bytes] = []

    def u8(self, v: int) -> Writer:
        self._parts.append(struct.pack(">B", v))
        return self

    def u32(self, v: int) -> Writer:
        self._parts.append(struct.pack(">I", v))
        return self

    def u64(self, v: int) -> Writer:
        self._parts.append(struct.pack(">Q", v))
        return self

    def boolean(self, v: bool) -> Writer:
        return self.u8(1 if v else 0)

    def raw(self, b: bytes) -> Writer:
        self._parts.append(b)
        return self

    def blob(self, b: bytes) -> Writer:
        return self.u32(len(b)).raw(b)

    def string(self, s: str) -> Writer:
        return self.blob(s.encode())

    def account(self, hex_id: str) -> Writer:
        b = bytes.fromhex(hex_id)
        if len(b) != DIGEST_SIZE:
            raise ValueError(f"account id must be 32 bytes: {hex_id!r}")
        return self.raw(b)

    def opt_account(self, hex_id: str | None) -> Writer:
        if hex_id is None:
            return self.u8(0)
        return self.u8(1).account(hex_id)

    def json(self, obj: Any) -> Writer:
        return self.blob(canonical_json(obj))

    def getvalue(self) -> bytes:
        return b"".join(self._parts)


class Reader:
    def __init__(self, data: bytes) -> None:
        self._data = data
        self._pos = 0

    def _take(self, n: int) -> bytes:
        end = self._pos + n
        if end > len(self._data):
            raise DecodeError("truncated input")
        out = self._data[self._pos:end]
        self._pos = end
        return out

    def u8(self) -> int:
        return self._take(1)[0]

    def u32(self) -> int:
        return struct.unpack(">I", self._take(4))[0]

    def u64(self) -> int:
        return struct.unpack(">Q", self._take(8))[0]

    def boolean(self) -> bool:
        b = self.u8()
        if b > 1:
            raise DecodeError("bad boolean byte")
        return b == 1

    def raw(self, n: int) -> bytes:
        return self._take(n)

    def blob(self) -> bytes:
        return self._take(self.u32())

    def string(self) -> str:
        try:
            return self.blob().decode()
        except UnicodeDecodeError as exc:
            raise DecodeError(str(exc)) from exc

    def account(self) -> str:
        return self._take(DIGEST_SIZE).hex()

    def opt_account(self) -> str | None:
        flag = self.u8()
        if flag == 0:
            return None
        if flag != 1:
            raise DecodeError("bad presence byte")
        return self.account()

    def json(self) -> Any:
        raw = self.blob()
        try:
            obj = json.loads(raw)
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise DecodeError(str(exc)) from exc
        if canonical_json(obj) != raw:
            raise DecodeError("non-canonical json")
        return obj

    def done(self) -> bool:
        return self._pos == len(self._data)

    def finish(self) -> None:
        if not self.done():
            raise DecodeError("trailing bytes")
