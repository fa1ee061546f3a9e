"""Append-only event log: the single source of truth for campaign state.

Records are newline-delimited JSON objects with a strictly increasing
sequence number. Appends hit disk with an fsync before returning, so a
crash never loses an acknowledged event. Replaying the file reconstructs
campaign state exactly (see campaign.fold_events).
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional


class EventLogError(RuntimeError):
    pass


class CorruptLogError(EventLogError):
    def __init__(self, message: str, lineno: int, seq: Optional[int] = None) -> None:
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno
        self.seq = seq


@dataclass(frozen=True)
class EventRecord:
    seq: int
    ts: float
    kind: str
    payload: dict

    def to_json(self) -> str:
        return json.dumps(
            {"seq": self.seq, "ts": self.ts, "kind": self.kind, "payload": self.payload},
            sort_keys=True,
            separators=(",", ":"),
        )


class EventLog:
    """Writer handle. path=None keeps the log in memory only (tests)."""

    def __init__(self, path: Optional[str | Path] = None) -> None:
        self.path = Path(path) if path is not None else None
        self._records: list[EventRecord] = []
        self._fh = None
        if self.path is not None:
            if self.path.exists():
                self._records = read_event_log(self.path)
            self._fh = open(self.path, "a", encoding="utf-8")

    @property
    def next_seq(self) -> int:
        return self._records[-1].seq + 1 if self._records else 1

    def append(self, kind: str, payload: dict, ts: float) -> EventRecord:
        if not kind:
            raise EventLogError("event kind must be non-empty")
        record = EventRecord(seq=self.next_seq, ts=float(ts), kind=kind, payload=payload)
        if self._fh is not None:
            self._fh.write(record.to_json() + "\n")
            self._fh.flush()
            os.fsync(self._fh.fileno())
        self._records.append(record)
        return record

    def records(self, since: int = 0) -> list[EventRecord]:
        if since <= 0:
            return list(self._records)
        return [r for r in self._records if r.seq > since]

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    def __enter__(self) -> "EventLog":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def read_event_log(path: str | Path) -> list[EventRecord]:
    """Parse and validate a log file; any malformed line is fatal."""
    records: list[EventRecord] = []
    last_seq = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.rstrip("\n")
            if not stripped:
                continue
            try:
                raw = json.loads(stripped)
            except json.JSONDecodeError as exc:
                raise CorruptLogError(f"bad JSON ({exc.msg})", lineno, seq=last_seq + 1)
            try:
                record = EventRecord(
                    seq=int(raw["seq"]),
                    ts=float(raw["ts"]),
                    kind=str(raw["kind"]),
                    payload=dict(raw["payload"]),
                )
            except (KeyError, TypeError, ValueError):
                raise CorruptLogError("missing or mistyped fields", lineno, seq=last_seq + 1)
            if record.seq <= last_seq:
                raise CorruptLogError(
                    f"sequence {record.seq} not after {last_seq}", lineno, seq=record.seq
                )
            last_seq = record.seq
            records.append(record)
    return records


def write_event_log(path: str | Path, records: Iterable[EventRecord]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(record.to_json() + "\n")
        fh.flush()
        os.fsync(fh.fileno())
