"""The simulation engine: recursive sandbox encryption and key-gated full
restoration, with atomic per-file operations and machine-verifiable
reversibility.

Per-file protocol (encryption):

    read plaintext -> SHA-256 -> fresh file key -> seal -> wrap key
    -> write token to <name>.locked (temp + flush + fsync + rename)
    -> delete original only after the rename succeeded

so at no point does a partially-encrypted file exist under the original
name. Restoration reverses the protocol and verifies each file against the
checksum recorded at encryption time.
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass, field
from pathlib import Path

from . import crypto
from .crypto import KeyPair
from .errors import (
    KeyMissingError,
    ManifestError,
    RansimError,
    TokenError,
    UnwrapError,
    UsageError,
    WrongKeyError,
)
from .fsutil import sha256_hex
from .manifest import Manifest, ManifestEntry, write_manifest
from .sandbox import (
    LOCK_SUFFIX,
    RunningTotals,
    SandboxConfig,
    check_path_confinement,
    enforce_caps,
    is_target,
)
from .telemetry import EventLog

PER_FILE_CAP_BYTES = 256 * 1024**2
MANIFEST_FLUSH_INTERVAL = 100


@dataclass
class EncryptReport:
    files_scanned: int = 0
    files_encrypted: int = 0
    files_skipped: int = 0
    bytes_processed: int = 0
    duration: float = 0.0
    failures: list[tuple[str, str]] = field(default_factory=list)
    halted_by_cap: str | None = None

    def to_dict(self) -> dict:
        return {
            "files_scanned": self.files_scanned,
            "files_encrypted": self.files_encrypted,
            "files_skipped": self.files_skipped,
            "bytes_processed": self.bytes_processed,
            "duration": self.duration,
            "failures": [list(f) for f in self.failures],
            "halted_by_cap": self.halted_by_cap,
        }


@dataclass
class DecryptReport:
    files_restored: int = 0
    checksum_matches: int = 0
    failures: list[tuple[str, str]] = field(default_factory=list)
    duration: float = 0.0

    def to_dict(self) -> dict:
        return {
            "files_restored": self.files_restored,
            "checksum_matches": self.checksum_matches,
            "failures": [list(f) for f in self.failures],
            "duration": self.duration,
        }


@dataclass
class VerifyReport:
    mode: str  # "locked" or "unlocked"
    checked: int = 0
    failures: list[tuple[str, str]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "checked": self.checked,
            "ok": self.ok,
            "failures": [list(f) for f in self.failures],
        }


class OriginalNotRemovedError(RansimError):
    """Token durably written but the original could not be deleted.

    Carries the finished entry: the wrapped key must still reach the
    manifest or the token would become unrecoverable.
    """

    def __init__(self, entry: ManifestEntry, cause: Exception):
        super().__init__(f"original not removed: {cause}")
        self.entry = entry


def iter_corpus(root: Path):
    """Depth-first traversal in lexicographic name order.

    Symlinks are never followed (neither directories nor files); hidden
    files are included. Yields regular files only.
    """
    entries = sorted(os.scandir(root), key=lambda e: e.name)
    for entry in entries:
        if entry.is_symlink():
            continue
        if entry.is_dir(follow_symlinks=False):
            yield from iter_corpus(Path(entry.path))
        elif entry.is_file(follow_symlinks=False):
            yield Path(entry.path)


# protocol stages as module-level seams so fault-injection tests can fail
# each one independently
def _stage_write_temp(tmp_path: Path, data: bytes) -> None:
    with open(tmp_path, "wb") as fh:
        fh.write(data)
        fh.flush()
        os.fsync(fh.fileno())


def _stage_rename(tmp_path: Path, final_path: Path) -> None:
    os.replace(tmp_path, final_path)


def _stage_delete_original(path: Path) -> None:
    os.unlink(path)


def encrypt_file(
    path: Path, public: KeyPair, cfg: SandboxConfig, timestamp: int | None = None
) -> ManifestEntry:
    """Replace one regular file with its sealed token.

    Raises OriginalNotRemovedError when everything succeeded except the
    final unlink; any earlier failure leaves the original untouched.
    """
    path = Path(path)
    size = path.stat().st_size
    if size > PER_FILE_CAP_BYTES:
        raise UsageError(
            f"file exceeds per-file cap ({size} > {PER_FILE_CAP_BYTES})"
        )
    plaintext = path.read_bytes()
    checksum = sha256_hex(plaintext)
    if timestamp is None:
        timestamp = int(time.time())

    file_key = crypto.generate_file_key()
    try:
        token = crypto.seal(file_key, plaintext, timestamp)
        wrapped = crypto.wrap_key(public, file_key)
    finally:
        # best-effort zeroization: drop the only reference promptly
        del file_key

    token_path = path.with_name(path.name + LOCK_SUFFIX)
    tmp_path = path.with_name(f".{path.name}{LOCK_SUFFIX}.tmp{os.getpid()}")
    try:
        _stage_write_temp(tmp_path, token)
        _stage_rename(tmp_path, token_path)
    except BaseException:
        try:
            os.unlink(tmp_path)
        except OSError:
            pass
        raise

    entry = ManifestEntry(
        relative_path=str(token_path.relative_to(cfg.root)),
        wrapped_key=wrapped,
        original_size=len(plaintext),
        plaintext_checksum=checksum,
        encrypted_at=timestamp,
    )
    try:
        _stage_delete_original(path)
    except OSError as exc:
        raise OriginalNotRemovedError(entry, exc) from exc
    return entry


def _flush_manifest(m: Manifest, cfg: SandboxConfig, events: EventLog) -> None:
    try:
        write_manifest(m, cfg.manifest_path)
    except (OSError, ManifestError):
        # last resort: the wrapped keys in memory are the only route back
        # to the plaintext, so dump them non-atomically before giving up
        try:
            recovery = cfg.manifest_path.with_name("keys.dat.recovery")
            lines = [f'{{"version":{m.version},"sandbox_id":"{m.sandbox_id}"}}']
            lines += [entry.to_json() for entry in m.entries]
            recovery.write_text("\n".join(lines) + "\n", encoding="utf-8")
        except OSError:
            pass
        raise
    events.record("manifest_flushed", detail=f"entries={len(m)}")


def recursive_encrypt(
    cfg: SandboxConfig, public: KeyPair, m: Manifest, events: EventLog
) -> EncryptReport:
    """Encrypt every confined, whitelisted, not-yet-locked regular file
    under the sandbox root.

    Per-file failures are recorded and skipped; a manifest write failure or
    a cap breach halts the run cleanly (manifest flushed, event emitted).
    """
    start = time.monotonic()
    report = EncryptReport()
    totals = RunningTotals()
    appended_since_flush = 0
    events.record("run_started", detail=f"sandbox={cfg.sandbox_id}")

    def skip(rel: str, why: str) -> None:
        report.files_skipped += 1
        events.record("file_skipped", relative_path=rel, detail=why)

    try:
        for path in iter_corpus(cfg.root):
            rel = str(path.relative_to(cfg.root))
            report.files_scanned += 1

            if not check_path_confinement(path, cfg):
                skip(rel, "outside sandbox")
                continue
            if not is_target(path, cfg):
                skip(rel, "not a target")
                continue
            token_rel = rel + LOCK_SUFFIX
            if m.lookup(token_rel) is not None or (
                path.with_name(path.name + LOCK_SUFFIX).exists()
            ):
                skip(rel, "token exists")
                continue
            size = path.stat().st_size
            if size > PER_FILE_CAP_BYTES:
                skip(rel, "oversize")
                continue

            prospective = RunningTotals(
                files=totals.files + 1, bytes=totals.bytes + size
            )
            breached = enforce_caps(prospective, cfg)
            if breached is not None:
                report.halted_by_cap = breached
                events.record("cap_halt", detail=breached)
                break

            try:
                entry = encrypt_file(path, public, cfg)
            except OriginalNotRemovedError as exc:
                # token is durable; keep the key and surface the failure
                entry = exc.entry
                report.failures.append((rel, str(exc)))
            except (RansimError, OSError) as exc:
                report.failures.append((rel, str(exc)))
                continue

            m.record_entry(entry)
            totals.files += 1
            totals.bytes += size
            report.files_encrypted += 1
            report.bytes_processed += size
            events.record("file_encrypted", relative_path=entry.relative_path,
                          bytes=size)
            appended_since_flush += 1
            if appended_since_flush >= MANIFEST_FLUSH_INTERVAL:
                _flush_manifest(m, cfg, events)
                appended_since_flush = 0
    finally:
        _flush_manifest(m, cfg, events)
        report.duration = time.monotonic() - start
        events.record(
            "run_finished",
            detail=(
                f"encrypted={report.files_encrypted}"
                f" skipped={report.files_skipped}"
                f" failed={len(report.failures)}"
            ),
        )
    return report


def _load_private(private_key: Path | str | KeyPair) -> KeyPair:
    if isinstance(private_key, KeyPair):
        if not private_key.has_private:
            raise UsageError("keypair has no private half")
        return private_key
    key_path = Path(private_key)
    if not key_path.exists():
        raise KeyMissingError(f"private key not found: {key_path}")
    return crypto.parse_private_key(key_path.read_bytes())


def decrypt_all(
    cfg: SandboxConfig,
    private_key: Path | str | KeyPair,
    m: Manifest,
    events: EventLog,
    on_restored=None,
) -> DecryptReport:
    """Restore every manifest entry using the private key.

    The key file's absence is the gate: missing key means an error with
    zero filesystem changes. A key that parses but fails a trial unwrap of
    the first entry aborts before any file is modified. Per-entry failures
    afterwards are recorded and the run continues.
    """
    pair = _load_private(private_key)

    if m.entries:
        try:
            crypto.unwrap_key(pair, m.entries[0].wrapped_key)
        except UnwrapError as exc:
            raise WrongKeyError(
                "private key does not unwrap this corpus (wrong key?)"
            ) from exc

    start = time.monotonic()
    report = DecryptReport()
    removed_since_flush = 0
    events.record("decrypt_started", detail=f"entries={len(m)}")

    def fail(rel: str, why: str) -> None:
        report.failures.append((rel, why))
        events.record("restore_failed", relative_path=rel, detail=why)

    for entry in list(m.entries):
        rel = entry.relative_path
        token_path = cfg.root / rel
        if not rel.endswith(LOCK_SUFFIX):
            fail(rel, "manifest path lacks lock suffix")
            continue
        if not check_path_confinement(token_path, cfg):
            fail(rel, "path escapes sandbox")
            continue
        try:
            token = token_path.read_bytes()
        except OSError as exc:
            fail(rel, f"token unreadable: {exc}")
            continue
        try:
            file_key = crypto.unwrap_key(pair, entry.wrapped_key)
            try:
                plaintext = crypto.open_token(file_key, token)
            finally:
                del file_key
        except (UnwrapError, TokenError) as exc:
            fail(rel, str(exc))
            continue

        original_path = token_path.with_name(token_path.name[: -len(LOCK_SUFFIX)])
        tmp_path = original_path.with_name(
            f".{original_path.name}.tmp{os.getpid()}"
        )
        try:
            _stage_write_temp(tmp_path, plaintext)
            _stage_rename(tmp_path, original_path)
            os.unlink(token_path)
        except OSError as exc:
            try:
                os.unlink(tmp_path)
            except OSError:
                pass
            fail(rel, f"restore write failed: {exc}")
            continue

        report.files_restored += 1
        matches = sha256_hex(plaintext) == entry.plaintext_checksum
        if matches:
            report.checksum_matches += 1
            detail = "checksum ok"
        else:
            detail = "checksum mismatch"
            report.failures.append((rel, "checksum mismatch"))
        if on_restored is not None:
            on_restored(entry)
        m.remove(rel)
        events.record(
            "file_restored", relative_path=rel, bytes=len(plaintext), detail=detail
        )
        removed_since_flush += 1
        if removed_since_flush >= MANIFEST_FLUSH_INTERVAL:
            _flush_manifest(m, cfg, events)
            removed_since_flush = 0

    if len(m) == 0:
        if cfg.manifest_path.exists():
            os.unlink(cfg.manifest_path)
            events.record("manifest_flushed", detail="deleted (empty)")
    else:
        _flush_manifest(m, cfg, events)

    report.duration = time.monotonic() - start
    events.record(
        "decrypt_finished",
        detail=(
            f"restored={report.files_restored}"
            f" checksum_matches={report.checksum_matches}"
            f" failed={len(report.failures)}"
        ),
    )
    return report


def verify_corpus(cfg: SandboxConfig, m: Manifest | None) -> VerifyReport:
    """Report-only consistency check.

    Locked corpus (manifest present): every entry's token exists and is
    structurally a token. Unlocked corpus: no ``.locked`` residue and no
    manifest file remain.
    """
    if m is not None:
        report = VerifyReport(mode="locked")
        for entry in m.entries:
            report.checked += 1
            token_path = cfg.root / entry.relative_path
            if not token_path.is_file():
                report.failures.append((entry.relative_path, "token missing"))
                continue
            try:
                crypto.check_token_structure(token_path.read_bytes())
            except (TokenError, OSError) as exc:
                report.failures.append((entry.relative_path, str(exc)))
        return report

    report = VerifyReport(mode="unlocked")
    for path in iter_corpus(cfg.root):
        report.checked += 1
        if path.name.endswith(LOCK_SUFFIX):
            rel = str(path.relative_to(cfg.root))
            report.failures.append((rel, "residual token"))
    if cfg.manifest_path.exists():
        report.failures.append((cfg.manifest_path.name, "manifest still present"))
    return report
