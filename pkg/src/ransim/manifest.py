"""The keys.dat manifest: durable association between every locked file and
its wrapped key.

On-disk format is line-oriented JSON (UTF-8, LF): line 1 is a header object
``{"version": 1, "sandbox_id": "<hex>"}``; each further line is one entry.
Appendable, diffable, and parseable from any language. The manifest is not
itself encrypted — wrapped keys are useless without the private key.
"""

from __future__ import annotations

import base64
import binascii
import json
import re
from dataclasses import dataclass, field
from pathlib import Path, PurePosixPath

from .errors import (
    DuplicateEntryError,
    ManifestNotFoundError,
    ManifestParseError,
    ManifestVersionError,
    SandboxMismatchError,
)
from .fsutil import atomic_write_bytes

MANIFEST_NAME = "keys.dat"
MANIFEST_VERSION = 1
WRAPPED_KEY_LEN = 256

_CHECKSUM_RE = re.compile(r"^[0-9a-f]{64}$")


def _check_relative_path(path: str) -> str:
    pure = PurePosixPath(path)
    if pure.is_absolute() or path.startswith("/") or re.match(r"^[A-Za-z]:", path):
        raise ValueError(f"path must be relative: {path!r}")
    if ".." in pure.parts or not path or path in (".", ""):
        raise ValueError(f"path may not traverse upward: {path!r}")
    return path


@dataclass(frozen=True)
class ManifestEntry:
    """One locked file: where it is, and the wrapped key that opens it."""

    relative_path: str
    wrapped_key: bytes
    original_size: int
    plaintext_checksum: str
    encrypted_at: int

    def __post_init__(self):
        _check_relative_path(self.relative_path)
        if len(self.wrapped_key) != WRAPPED_KEY_LEN:
            raise ValueError(
                f"wrapped key must be {WRAPPED_KEY_LEN} bytes,"
                f" got {len(self.wrapped_key)}"
            )
        if self.original_size < 0:
            raise ValueError("original_size must be >= 0")
        if not _CHECKSUM_RE.match(self.plaintext_checksum):
            raise ValueError("plaintext_checksum must be 64 lowercase hex chars")

    def to_json(self) -> str:
        return json.dumps(
            {
                "relative_path": self.relative_path,
                "wrapped_key": base64.urlsafe_b64encode(self.wrapped_key).decode(),
                "original_size": self.original_size,
                "plaintext_checksum": self.plaintext_checksum,
                "encrypted_at": self.encrypted_at,
            },
            separators=(",", ":"),
        )

    @classmethod
    def from_json(cls, text: str) -> "ManifestEntry":
        obj = json.loads(text)
        wrapped = base64.urlsafe_b64decode(obj["wrapped_key"].encode())
        return cls(
            relative_path=obj["relative_path"],
            wrapped_key=wrapped,
            original_size=obj["original_size"],
            plaintext_checksum=obj["plaintext_checksum"],
            encrypted_at=obj["encrypted_at"],
        )


@dataclass
class Manifest:
    """In-memory manifest. Entry order is encryption order and is stable."""

    sandbox_id: str
    version: int = MANIFEST_VERSION
    entries: list[ManifestEntry] = field(default_factory=list)
    _index: dict[str, ManifestEntry] = field(
        default_factory=dict, init=False, repr=False, compare=False
    )

    def __post_init__(self):
        for entry in self.entries:
            if entry.relative_path in self._index:
                raise DuplicateEntryError(
                    f"duplicate manifest path: {entry.relative_path}"
                )
            self._index[entry.relative_path] = entry

    def __len__(self) -> int:
        return len(self.entries)

    def record_entry(self, entry: ManifestEntry) -> None:
        """Append an entry. A duplicate path signals a double-encryption
        attempt and leaves the manifest unchanged."""
        if entry.relative_path in self._index:
            raise DuplicateEntryError(
                f"path already recorded: {entry.relative_path}"
            )
        self.entries.append(entry)
        self._index[entry.relative_path] = entry

    def lookup(self, relative_path: str) -> ManifestEntry | None:
        return self._index.get(relative_path)

    def remove(self, relative_path: str) -> None:
        entry = self._index.pop(relative_path, None)
        if entry is None:
            return
        for i, existing in enumerate(self.entries):
            if existing is entry:
                del self.entries[i]
                break

    def total_original_bytes(self) -> int:
        return sum(entry.original_size for entry in self.entries)


def _header_line(m: Manifest) -> str:
    return json.dumps(
        {"version": m.version, "sandbox_id": m.sandbox_id},
        separators=(",", ":"),
    )


def write_manifest(m: Manifest, path: Path) -> None:
    """Atomically persist the manifest.

    Refuses to replace an existing manifest written by a different sandbox
    (cross-sandbox contamination would make its entries unrecoverable).
    """
    path = Path(path)
    if path.exists():
        existing_id = _peek_sandbox_id(path)
        if existing_id is not None and existing_id != m.sandbox_id:
            raise SandboxMismatchError(
                f"manifest at {path} belongs to sandbox {existing_id},"
                f" not {m.sandbox_id}"
            )
    lines = [_header_line(m)]
    lines.extend(entry.to_json() for entry in m.entries)
    data = ("\n".join(lines) + "\n").encode("utf-8")
    atomic_write_bytes(path, data, fsync_dir=True)


def _peek_sandbox_id(path: Path) -> str | None:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            first = fh.readline()
        return json.loads(first).get("sandbox_id")
    except (OSError, ValueError):
        return None


def load_manifest(path: Path) -> Manifest:
    """Parse a keys.dat file, validating every entry invariant."""
    path = Path(path)
    if not path.exists():
        raise ManifestNotFoundError(f"manifest not found: {path}")
    with open(path, "r", encoding="utf-8", newline="") as fh:
        raw_lines = fh.read().split("\n")
    if raw_lines and raw_lines[-1] == "":
        raw_lines.pop()
    if not raw_lines:
        raise ManifestParseError("manifest is empty", line=1)

    try:
        header = json.loads(raw_lines[0])
        version = header["version"]
        sandbox_id = header["sandbox_id"]
    except (ValueError, KeyError, TypeError) as exc:
        raise ManifestParseError(f"bad header: {exc}", line=1) from exc
    if version != MANIFEST_VERSION:
        raise ManifestVersionError(
            f"unknown manifest version {version!r}, expected {MANIFEST_VERSION}"
        )

    entries = []
    for lineno, raw in enumerate(raw_lines[1:], start=2):
        try:
            entries.append(ManifestEntry.from_json(raw))
        except (ValueError, KeyError, TypeError, binascii.Error) as exc:
            raise ManifestParseError(f"bad entry: {exc}", line=lineno) from exc
    return Manifest(sandbox_id=sandbox_id, version=version, entries=entries)
