"""Append-only JSON-lines event log — the detection-research surface.

Every simulation run narrates itself here (events.jsonl at the sandbox
root, one object per line). The log is strictly ordered by ``seq`` and is
the raw material for replaying a run or training detectors; it is never an
encryption target. Telemetry failure must never block the safety
interlocks, so a sink that cannot write degrades to an in-memory buffer
with a warning instead of raising.
"""

from __future__ import annotations

import json
import logging
import os
import time
from dataclasses import dataclass
from pathlib import Path

from .errors import RansimError

logger = logging.getLogger(__name__)

EVENTS_NAME = "events.jsonl"

EVENT_KINDS = frozenset(
    {
        "run_started",
        "key_escrowed",
        "file_encrypted",
        "file_skipped",
        "manifest_flushed",
        "cap_halt",
        "run_finished",
        "decrypt_started",
        "file_restored",
        "restore_failed",
        "decrypt_finished",
    }
)

# events that must be durable before the corresponding filesystem step
# counts as complete
_DURABLE_KINDS = frozenset({"key_escrowed", "run_finished"})


class EventLogParseError(RansimError):
    def __init__(self, message: str, line: int):
        super().__init__(f"{message} (line {line})")
        self.line = line


@dataclass(frozen=True)
class SimEvent:
    seq: int
    timestamp: float
    kind: str
    relative_path: str | None = None
    bytes: int | None = None
    detail: str | None = None

    def __post_init__(self):
        if self.kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind {self.kind!r}")
        if self.kind == "file_encrypted" and (
            self.relative_path is None or self.bytes is None
        ):
            raise ValueError("file_encrypted events carry relative_path and bytes")

    def to_json(self) -> str:
        obj = {"seq": self.seq, "timestamp": self.timestamp, "kind": self.kind}
        for key in ("relative_path", "bytes", "detail"):
            value = getattr(self, key)
            if value is not None:
                obj[key] = value
        return json.dumps(obj, separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "SimEvent":
        obj = json.loads(text)
        return cls(
            seq=obj["seq"],
            timestamp=obj["timestamp"],
            kind=obj["kind"],
            relative_path=obj.get("relative_path"),
            bytes=obj.get("bytes"),
            detail=obj.get("detail"),
        )


class EventLog:
    """Single-writer sink for one sandbox's event stream.

    Opening an existing log resumes the sequence counter so ``seq`` stays
    strictly increasing across encrypt and decrypt runs.
    """

    def __init__(self, path: Path | str | None, clock=time.time):
        self.path = Path(path) if path is not None else None
        self._clock = clock
        self._fh = None
        self._last_seq = 0
        self._last_ts = 0.0
        self.degraded_buffer: list[SimEvent] = []
        if self.path is not None:
            self._last_seq = _last_seq_on_disk(self.path)
            try:
                self._fh = open(self.path, "a", encoding="utf-8")
            except OSError as exc:
                self._degrade(f"cannot open event log: {exc}")

    def _degrade(self, why: str) -> None:
        logger.warning("telemetry degraded to in-memory buffer: %s", why)
        if self._fh is not None:
            try:
                self._fh.close()
            except OSError:
                pass
        self._fh = None

    def emit(self, event: SimEvent) -> None:
        """Append one event. Never raises for sink I/O trouble."""
        if event.seq <= self._last_seq:
            raise ValueError(
                f"seq must be strictly increasing ({event.seq} <= {self._last_seq})"
            )
        self._last_seq = event.seq
        self._last_ts = max(self._last_ts, event.timestamp)
        if self._fh is None:
            self.degraded_buffer.append(event)
            return
        try:
            self._fh.write(event.to_json() + "\n")
            self._fh.flush()
            if event.kind in _DURABLE_KINDS:
                os.fsync(self._fh.fileno())
        except (OSError, ValueError) as exc:
            self._degrade(f"write failed: {exc}")
            self.degraded_buffer.append(event)

    def record(
        self,
        kind: str,
        relative_path: str | None = None,
        bytes: int | None = None,
        detail: str | None = None,
    ) -> SimEvent:
        """Build the next event (seq, clamped non-decreasing timestamp) and
        emit it."""
        timestamp = max(round(self._clock(), 3), self._last_ts)
        event = SimEvent(
            seq=self._last_seq + 1,
            timestamp=timestamp,
            kind=kind,
            relative_path=relative_path,
            bytes=bytes,
            detail=detail,
        )
        self.emit(event)
        return event

    @property
    def last_seq(self) -> int:
        return self._last_seq

    def close(self) -> None:
        if self._fh is not None:
            try:
                self._fh.close()
            except OSError:
                pass
            self._fh = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def _last_seq_on_disk(path: Path) -> int:
    if not path.exists():
        return 0
    try:
        events = read_events(path)
    except OSError:
        return 0
    return events[-1].seq if events else 0


def read_events(path: Path | str) -> list[SimEvent]:
    """Parse an event log in file order.

    A torn final line (writer crashed mid-append) is dropped with a
    warning; a malformed line anywhere else is a real error.
    """
    path = Path(path)
    with open(path, "r", encoding="utf-8", newline="") as fh:
        raw = fh.read()
    lines = raw.split("\n")
    if lines and lines[-1] == "":
        lines.pop()

    events: list[SimEvent] = []
    for i, line in enumerate(lines):
        final = i == len(lines) - 1
        try:
            events.append(SimEvent.from_json(line))
        except (ValueError, KeyError, TypeError) as exc:
            if final:
                logger.warning(
                    "dropping torn final event-log line in %s: %s", path, exc
                )
                break
            raise EventLogParseError(f"bad event: {exc}", line=i + 1) from exc
    return events


def events_since(path: Path | str, since_seq: int) -> list[SimEvent]:
    """Events with seq strictly greater than ``since_seq``, in order."""
    try:
        return [e for e in read_events(path) if e.seq > since_seq]
    except FileNotFoundError:
        return []
