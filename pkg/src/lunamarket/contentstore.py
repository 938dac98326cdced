"""Content-addressed blob store keyed by the SHA-256 of the blob bytes.

Only the hex digests go on chain. With a ``root`` directory the store persists
each blob at ``<root>/<first 2 hex>/<full hex>`` as raw bytes; without one it
lives in memory.
"""

from __future__ import annotations

from pathlib import Path

from lunamarket import codec
from lunamarket.errors import IntegrityError, NotFound

EMPTY_DIGEST = "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"


class ContentStore:
    def __init__(self, root: str | Path | None = None) -> None:
        self.root = Path(root) if root is not None else None
        self._mem: dict[str, bytes] = {}
        if self.root is not None:
            self.root.mkdir(parents=True, exist_ok=True)

    def _path(self, key: str) -> Path:
        assert self.root is not None
        return self.root / key[:2] / key

    def _read(self, key: str) -> bytes | None:
        if self.root is None:
            return self._mem.get(key)
        p = self._path(key)
        return p.read_bytes() if p.is_file() else None

    def _write(self, key: str, data: bytes) -> None:
        if self.root is None:
            self._mem[key] = data
            return
        p = self._path(key)
        p.parent.mkdir(exist_ok=True)
        p.write_bytes(data)

    def put(self, blob: bytes) -> str:
        key = codec.hexdigest(blob)
        if self._read(key) is None:
            self._write(key, bytes(blob))
        return key

    def get(self, key: str) -> bytes:
        data = self._read(key)
        if data is None:
            raise NotFound(f"no blob {key}")
        if codec.hexdigest(data) != key:
            raise IntegrityError(f"stored bytes for {key} no longer match their digest")
        return data

    def verify(self, key: str) -> bool:
        data = self._read(key)
        return data is not None and codec.hexdigest(data) == key

    def __contains__(self, key: str) -> bool:
        return self._read(key) is not None

    def size(self, key: str) -> int:
        data = self._read(key)
        if data is None:
            raise NotFound(f"no blob {key}")
        return len(data)

    def corrupt(self, key: str, offset: int = 0, mask: int = 0x01) -> None:
        """Test hook: XOR one stored byte in place."""
        data = self._read(key)
        if data is None:
            raise NotFound(f"no blob {key}")
        buf = bytearray(data)
        buf[offset] ^= mask
        self._write(key, bytes(buf))
