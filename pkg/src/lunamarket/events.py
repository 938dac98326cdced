"""Append-only JSONL event log shared by every module of a run."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Any, Iterable, Iterator


def _jsonable(v: Any) -> Any:
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, (set, frozenset)):
        return sorted(_jsonable(x) for x in v)
    if isinstance(v, tuple):
        return [_jsonable(x) for x in v]
    if isinstance(v, list):
        return [_jsonable(x) for x in v]
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    return v


@dataclass(frozen=True)
class EventRecord:
    time_ms: int
    seq: int
    kind: str
    payload: dict

    def to_dict(self) -> dict[str, Any]:
        return {"timeMs": self.time_ms, "seq": self.seq, "kind": self.kind, **self.payload}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def __getitem__(self, key: str) -> Any:
        return self.to_dict()[key]

    def get(self, key: str, default: Any = None) -> Any:
        return self.to_dict().get(key, default)


class EventLog:
    def __init__(self) -> None:
        self.records: list[EventRecord] = []

    def emit(self, time_ms: int, kind: str, **payload: Any) -> EventRecord:
        if self.records and time_ms < self.records[-1].time_ms:
            raise ValueError(f"event at {time_ms} ms precedes {self.records[-1].time_ms} ms")
        rec = EventRecord(time_ms, len(self.records), kind, _jsonable(payload))
        self.records.append(rec)
        return rec

    def __iter__(self) -> Iterator[EventRecord]:
        return iter(self.records)

    def __len__(self) -> int:
        return len(self.records)

    def of_kind(self, *kinds: str) -> list[EventRecord]:
        return [r for r in self.records if r.kind in kinds]

    def lines(self) -> Iterator[str]:
        return (r.to_json() for r in self.records)

    def digest(self) -> str:
        h = hashlib.sha256()
        for line in self.lines():
            h.update(line.encode() + b"\n")
        return h.hexdigest()

    def write(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for line in self.lines():
                fh.write(line + "\n")

    @classmethod
    def from_dicts(cls, rows: Iterable[dict]) -> EventLog:
        log = cls()
        for row in rows:
            row = dict(row)
            t, _, kind = row.pop("timeMs"), row.pop("seq"), row.pop("kind")
            log.emit(t, kind, **row)
        return log

    @classmethod
    def read(cls, path: str | Path) -> EventLog:
        with open(path, encoding="utf-8") as fh:
            return cls.from_dicts(json.loads(line) for line in fh if line.strip())
