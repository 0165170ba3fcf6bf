"""Local HTTP control plane: lock status, telemetry feed, ransom-note text,
and the unlock action that drives key-gated restoration.

Binds loopback only unless explicitly overridden. The escrowed private key
is never exposed over any endpoint, and a key submitted for unlock lives in
process memory only — it is never written to disk. Unlock runs in a worker
thread (a full restore takes tens of seconds at realistic corpus sizes)
with progress observable through /api/status and /api/events.
"""

from __future__ import annotations

import ipaddress
import os
import socket
import threading
import time
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import uvicorn
from fastapi import FastAPI, Request
from fastapi.responses import HTMLResponse, JSONResponse
from fastapi.staticfiles import StaticFiles

from . import crypto
from .engine import decrypt_all
from .errors import KeyParseError, RansimError, UnwrapError, UsageError
from .manifest import load_manifest
from .sandbox import SandboxConfig
from .telemetry import EventLog, events_since

DEFAULT_PORT = 8733
DEFAULT_COUNTDOWN_SECONDS = 3600

DEFAULT_NOTE_TEMPLATE = """\
*** SIMULATION *** SIMULATION *** SIMULATION ***

YOUR FILES HAVE BEEN LOCKED (in this sandbox only).

{files_locked} files ({bytes_locked} bytes) were sealed with per-file keys.
Without the recovery key they stay locked. Countdown target: {deadline_utc}.

This is a training exercise. Nothing outside the sandbox was touched, the
recovery key was escrowed before anything was locked, and nothing is ever
destroyed — the countdown is cosmetic. Paste the recovery key (key.pem
contents) below to restore every file.

*** SIMULATION *** SIMULATION *** SIMULATION ***
"""

PHASES = ("idle", "encrypting", "locked", "decrypting", "restored")


@dataclass
class LockState:
    phase: str = "idle"
    files_locked: int = 0
    bytes_locked: int = 0
    deadline: float | None = None
    note_text: str = ""
    last_error: str | None = None


class ServiceState:
    """Thread-safe snapshot store for the phase machine.

    Transitions follow idle -> locked -> decrypting -> restored, with
    failed unlocks returning to locked. No endpoint can drive anything
    outside that graph.
    """

    def __init__(self, cfg: SandboxConfig, note_template: str,
                 countdown_seconds: float):
        self.cfg = cfg
        self.note_template = note_template
        self.countdown_seconds = countdown_seconds
        self._lock = threading.Lock()
        self._state = LockState()
        self.last_report: dict | None = None
        self.refresh_from_disk()

    def _load_counts(self) -> tuple[int, int]:
        path = self.cfg.manifest_path
        if not path.exists():
            return 0, 0
        try:
            m = load_manifest(path)
        except RansimError:
            return 0, 0
        return len(m), m.total_original_bytes()

    def refresh_from_disk(self) -> None:
        """Sync idle/locked state with the sandbox (CLI runs may have
        locked or restored it since the last poll)."""
        with self._lock:
            if self._state.phase not in ("idle", "locked"):
                return
            files, total = self._load_counts()
            if files > 0:
                if self._state.phase != "locked":
                    self._state.phase = "locked"
                    self._state.deadline = time.time() + self.countdown_seconds
                self._state.files_locked = files
                self._state.bytes_locked = total
            elif self._state.phase == "locked":
                # restored out-of-band
                self._state.phase = "restored"
                self._state.files_locked = 0
                self._state.bytes_locked = 0
                self._state.deadline = None

    def render_note(self) -> str:
        deadline = self._state.deadline
        deadline_utc = (
            datetime.fromtimestamp(deadline, tz=timezone.utc).strftime(
                "%Y-%m-%d %H:%M:%S UTC"
            )
            if deadline
            else "none"
        )
        return self.note_template.format(
            files_locked=self._state.files_locked,
            bytes_locked=self._state.bytes_locked,
            deadline_utc=deadline_utc,
        )

    def snapshot(self) -> dict:
        with self._lock:
            s = self._state
            seconds_remaining = (
                max(0, int(s.deadline - time.time())) if s.deadline else None
            )
            return {
                "phase": s.phase,
                "files_locked": s.files_locked,
                "bytes_locked": s.bytes_locked,
                "deadline": s.deadline,
                "seconds_remaining": seconds_remaining,
                "note_text": self.render_note(),
                "last_error": s.last_error,
                "last_report": self.last_report,
            }

    def begin_unlock(self) -> str | None:
        """Move locked -> decrypting; returns the current phase when the
        transition is not allowed."""
        with self._lock:
            if self._state.phase != "locked":
                return self._state.phase
            self._state.phase = "decrypting"
            self._state.last_error = None
            return None

    def unlock_failed(self, error: str) -> None:
        with self._lock:
            self._state.phase = "locked"
            self._state.last_error = error

    def note_wrong_key(self, error: str) -> None:
        with self._lock:
            self._state.last_error = error

    def on_restored(self, entry) -> None:
        with self._lock:
            self._state.files_locked = max(0, self._state.files_locked - 1)
            self._state.bytes_locked = max(
                0, self._state.bytes_locked - entry.original_size
            )

    def unlock_finished(self, report: dict) -> None:
        with self._lock:
            self._state.phase = "restored"
            self._state.files_locked = 0
            self._state.bytes_locked = 0
            self._state.deadline = None
            self.last_report = report


def default_ui_dir() -> Path | None:
    env = os.environ.get("RANSIM_UI_DIR")
    if env and Path(env).is_dir():
        return Path(env)
    local = Path.cwd() / "frontend" / "dist"
    if (local / "index.html").is_file():
        return local
    packaged = Path(__file__).parent / "webui"
    if (packaged / "index.html").is_file():
        return packaged
    return None


def create_app(
    cfg: SandboxConfig,
    note_template: str = DEFAULT_NOTE_TEMPLATE,
    countdown_seconds: float = DEFAULT_COUNTDOWN_SECONDS,
    ui_dir: Path | str | None = None,
) -> FastAPI:
    app = FastAPI(title="ransim control service", docs_url=None, redoc_url=None)
    state = ServiceState(cfg, note_template, countdown_seconds)
    app.state.control = state  # test visibility

    @app.get("/api/status")
    def status():
        state.refresh_from_disk()
        return state.snapshot()

    @app.get("/api/note")
    def note():
        state.refresh_from_disk()
        snap = state.snapshot()
        return {
            "note_text": snap["note_text"],
            "deadline": snap["deadline"],
            "seconds_remaining": snap["seconds_remaining"],
        }

    @app.get("/api/events")
    def events(since: int = 0):
        return {"events": [
            {
                "seq": e.seq,
                "timestamp": e.timestamp,
                "kind": e.kind,
                "relative_path": e.relative_path,
                "bytes": e.bytes,
                "detail": e.detail,
            }
            for e in events_since(cfg.events_path, since)
        ]}

    @app.post("/api/unlock")
    async def unlock(request: Request):
        state.refresh_from_disk()
        raw = await request.body()
        try:
            pair = crypto.parse_private_key(raw)
        except (KeyParseError, UsageError) as exc:
            return JSONResponse(
                status_code=400,
                content={"error": "malformed_key", "detail": str(exc)},
            )

        blocked_phase = state.begin_unlock()
        if blocked_phase is not None:
            return JSONResponse(
                status_code=409,
                content={"error": "phase_conflict", "phase": blocked_phase},
            )

        try:
            m = load_manifest(cfg.manifest_path)
            if m.sandbox_id != cfg.sandbox_id:
                raise RansimError("manifest belongs to a different sandbox")
            if m.entries:
                crypto.unwrap_key(pair, m.entries[0].wrapped_key)
        except UnwrapError:
            state.unlock_failed("wrong key")
            return JSONResponse(
                status_code=403, content={"error": "wrong_key"}
            )
        except RansimError as exc:
            state.unlock_failed(str(exc))
            return JSONResponse(
                status_code=500, content={"error": "unlock_failed",
                                          "detail": str(exc)},
            )

        def run_restore():
            events_log = EventLog(cfg.events_path)
            try:
                report = decrypt_all(
                    cfg, pair, m, events_log, on_restored=state.on_restored
                )
                state.unlock_finished(report.to_dict())
            except Exception as exc:  # return to locked, keep the cause
                state.unlock_failed(str(exc))
            finally:
                events_log.close()

        threading.Thread(target=run_restore, name="ransim-unlock",
                         daemon=True).start()
        return JSONResponse(
            status_code=202,
            content={"accepted": True, "entries": len(m)},
        )

    resolved_ui = Path(ui_dir) if ui_dir else default_ui_dir()
    if resolved_ui is not None and (resolved_ui / "index.html").is_file():
        app.mount("/", StaticFiles(directory=resolved_ui, html=True), name="ui")
    else:
        @app.get("/", response_class=HTMLResponse)
        def no_ui():
            return (
                "<html><body><h1>ransim control service</h1>"
                "<p>No UI bundle found. API: GET /api/status, GET /api/note,"
                " GET /api/events?since=N, POST /api/unlock</p></body></html>"
            )

    return app


def _is_loopback(host: str) -> bool:
    if host == "localhost":
        return True
    try:
        return ipaddress.ip_address(host).is_loopback
    except ValueError:
        return False


def serve(
    cfg: SandboxConfig,
    host: str = "127.0.0.1",
    port: int = DEFAULT_PORT,
    allow_remote: bool = False,
    **app_kwargs,
) -> None:
    """Run the control service until interrupted."""
    if not _is_loopback(host) and not allow_remote:
        raise UsageError(
            f"refusing to bind non-loopback address {host!r} without"
            " --allow-remote"
        )
    # fail fast with a clean error instead of a uvicorn traceback
    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        probe.bind((host, port))
    except OSError as exc:
        raise RansimError(f"cannot bind {host}:{port}: {exc}") from exc
    finally:
        probe.close()

    app = create_app(cfg, **app_kwargs)
    uvicorn.run(app, host=host, port=port, log_level="warning")
