"""Durable append-only event logs, snapshots, and transcript export.

Log format (`*.events.jsonl`): line 1 is a header record, every further
line is one event record in seq order 1..n with no gaps. Each record
carries a crc32 of its canonical form, so a mutated line is detected on
replay and a torn final line from a crash is truncated on reopen.

Durability: every append is flushed to the OS before the ack (survives a
process crash); fsync is forced on finalized utterances and expiry events
and otherwise batched on a 100 ms budget (survives an OS crash with at
most that window of low-value interim/annotation traffic at risk).
"""

from __future__ import annotations

import json
import os
import time
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from .events import SessionEvent, canonical_json, event_from_dict, event_to_dict
from .projection import project_state
from .session import SessionState, replay_events

LOG_SUFFIX = ".events.jsonl"
SNAPSHOT_SUFFIX = ".snapshot.json"
SCHEMA_VERSION = 1

FSYNC_IMMEDIATE_TYPES = {"utterance_finalized", "bubbles_hidden"}
FSYNC_BATCH_SECONDS = 0.1

EXPORT_FORMATS = ("text", "json")


class StorageError(Exception):
    pass


class SeqGap(StorageError):
    pass


class IoFailure(StorageError):
    pass


class CorruptRecord(StorageError):
    def __init__(self, seq: int, reason: str) -> None:
        super().__init__(f"record {seq}: {reason}")
        self.seq = seq
        self.reason = reason


class UnknownFormat(StorageError):
    pass


@dataclass(frozen=True)
class LogHeader:
    session_id: str
    schema_version: int
    created_at: float


def _record_crc(record: dict[str, Any]) -> int:
    return zlib.crc32(canonical_json(record).encode("utf-8"))


def _encode_record(record: dict[str, Any]) -> str:
    line = dict(record)
    line["crc"] = _record_crc(record)
    return canonical_json(line)


def _decode_record(line: str) -> dict[str, Any]:
    data = json.loads(line)
    if not isinstance(data, dict):
        raise ValueError("record is not an object")
    crc = data.pop("crc", None)
    if crc != _record_crc(data):
        raise ValueError("crc mismatch")
    return data


def _header_record(header: LogHeader) -> dict[str, Any]:
    return {
        "kind": "header",
        "session_id": header.session_id,
        "schema_version": header.schema_version,
        "created_at": header.created_at,
    }


class EventLogWriter:
    """Single-writer append handle; the owning session loop calls append()."""

    def __init__(self, path: str | Path, session_id: str, created_at: float | None = None) -> None:
        self.path = Path(path)
        try:
            if self.path.exists() and self.path.stat().st_size > 0 and b"\n" in self.path.read_bytes():
                self.header, events, truncate_to = _scan(self.path, tolerate_torn_tail=True)
                if self.header.session_id != session_id:
                    raise StorageError(
                        f"log belongs to session {self.header.session_id!r}, not {session_id!r}"
                    )
                self.last_seq = events[-1].seq if events else 0
                if truncate_to is not None:
                    with open(self.path, "r+b") as fh:
                        fh.truncate(truncate_to)
                self._fh = open(self.path, "a", encoding="utf-8")
            else:
                self.header = LogHeader(
                    session_id=session_id,
                    schema_version=SCHEMA_VERSION,
                    created_at=created_at if created_at is not None else time.time(),
                )
                self.last_seq = 0
                self._fh = open(self.path, "w", encoding="utf-8")
                self._fh.write(_encode_record(_header_record(self.header)) + "\n")
                self._fh.flush()
                os.fsync(self._fh.fileno())
        except OSError as exc:
            raise IoFailure(str(exc)) from exc
        self._last_fsync = time.monotonic()

    def append(self, event: SessionEvent) -> None:
        """Durably append one event; raises SeqGap unless seq follows on."""
        if event.seq != self.last_seq + 1:
            raise SeqGap(f"expected seq {self.last_seq + 1}, got {event.seq}")
        try:
            self._fh.write(_encode_record(event_to_dict(event)) + "\n")
            self._fh.flush()
            now = time.monotonic()
            if event.type in FSYNC_IMMEDIATE_TYPES or now - self._last_fsync >= FSYNC_BATCH_SECONDS:
                os.fsync(self._fh.fileno())
                self._last_fsync = now
        except OSError as exc:
            raise IoFailure(str(exc)) from exc
        self.last_seq = event.seq

    def close(self) -> None:
        if self._fh.closed:
            return
        try:
            self._fh.flush()
            os.fsync(self._fh.fileno())
        except OSError:
            pass
        self._fh.close()

    def __enter__(self) -> "EventLogWriter":
        return self

    def __exit__(self, *exc: object) -> None:
        self.close()


def _scan(
    path: Path, tolerate_torn_tail: bool
) -> tuple[LogHeader, list[SessionEvent], int | None]:
    """Parse a log file. Returns (header, events, truncate_offset).

    The newline is the last byte of every append, so a line without one is
    a torn (never acked) tail from a crash: with tolerate_torn_tail it is
    reported as a truncation offset instead of an error. A bad record that
    does end in a newline is mutation and raises CorruptRecord with the
    seq its position implies.
    """
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    if not raw:
        raise StorageError(f"{path} is empty")

    events: list[SessionEvent] = []
    header: LogHeader | None = None
    offset = 0
    expected_seq = 1
    while offset < len(raw):
        newline = raw.find(b"\n", offset)
        if newline < 0:
            if tolerate_torn_tail and header is not None:
                return header, events, offset
            raise CorruptRecord(
                expected_seq if header is not None else 0, "torn final line (no newline)"
            )
        line = raw[offset:newline]
        try:
            record = _decode_record(line.decode("utf-8"))
            if header is None:
                if record.get("kind") != "header":
                    raise ValueError("first record is not a header")
                header = LogHeader(
                    session_id=record["session_id"],
                    schema_version=int(record["schema_version"]),
                    created_at=float(record["created_at"]),
                )
            else:
                event = event_from_dict(record)
                if event.seq != expected_seq:
                    raise ValueError(f"expected seq {expected_seq}, found {event.seq}")
                events.append(event)
                expected_seq += 1
        except (ValueError, KeyError, UnicodeDecodeError) as exc:
            raise CorruptRecord(expected_seq if header is not None else 0, str(exc)) from None
        offset = newline + 1
    if header is None:
        raise StorageError(f"{path} has no header record")
    return header, events, None


def read_log(path: str | Path) -> tuple[LogHeader, list[SessionEvent]]:
    """Strict read of a closed log; any bad record raises CorruptRecord."""
    header, events, _ = _scan(Path(path), tolerate_torn_tail=False)
    return header, events


def replay(path: str | Path) -> SessionState:
    """Rebuild the session state that produced this log."""
    header, events = read_log(path)
    return replay_events(header.session_id, events)


def write_snapshot(path: str | Path, state: SessionState) -> None:
    payload = {"kind": "snapshot", "schema_version": SCHEMA_VERSION, "state": state.to_dict()}
    try:
        Path(path).write_text(canonical_json(payload) + "\n", encoding="utf-8")
    except OSError as exc:
        raise IoFailure(str(exc)) from exc


def read_snapshot(path: str | Path) -> dict[str, Any]:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    if not isinstance(data, dict) or data.get("kind") != "snapshot":
        raise StorageError(f"{path} is not a snapshot file")
    return data["state"]


def _clock_label(t_start: float) -> str:
    total = int(t_start)
    return f"{total // 60:02d}:{total % 60:02d}"


def export_text(header: LogHeader, state: SessionState) -> str:
    """Plain transcript: finalized bubbles in order as `[mm:ss] name: text`.

    Expired bubbles stay in the record; hiding only affects the live view.
    """
    names = {t: p.display_name for t, p in state.participants.items()}
    lines = [f"# session: {header.session_id}", f"# created: {header.created_at}"]
    for bubble in state.ordered_bubbles(include_hidden=True):
        if bubble.t_end is None:
            continue  # never finalized
        speaker = names.get(bubble.speaker, bubble.speaker)
        lines.append(f"[{_clock_label(bubble.t_start)}] {speaker}: {bubble.text}")
    return "\n".join(lines) + "\n"


def export_json(header: LogHeader, state: SessionState, viewer: str | None = None) -> str:
    """Annotated transcript for one viewer, hidden bubbles flagged, other
    authors' private comments absent."""
    doc = {
        "session_id": header.session_id,
        "created_at": header.created_at,
        "transcript": project_state(state, viewer, include_hidden=True),
    }
    return json.dumps(doc, indent=2, ensure_ascii=False, sort_keys=True) + "\n"


def export(path: str | Path, fmt: str, viewer: str | None = None) -> str:
    """Render a stored log as a transcript document."""
    if fmt not in EXPORT_FORMATS:
        raise UnknownFormat(f"format must be one of {EXPORT_FORMATS}, got {fmt!r}")
    header, events = read_log(path)
    state = replay_events(header.session_id, events)
    if fmt == "text":
        return export_text(header, state)
    return export_json(header, state, viewer)
