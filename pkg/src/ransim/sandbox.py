"""Hard safety interlocks: consent marker, canonical-root confinement,
extension whitelist, recovery-key escrow, and resource caps.

Nothing in the engine runs unless these checks pass, and no flag bypasses
them. The design goal is that pointing the tool at real data by accident is
impossible: the root must carry an explicit marker file, must not be a
filesystem root or a home directory, and every touched path must
canonicalize to somewhere strictly inside the root.
"""

from __future__ import annotations

import os
import uuid
from dataclasses import dataclass
from pathlib import Path

from .crypto import KeyPair, serialize_private_key
from .errors import ConsentError, EscrowError, UsageError
from .fsutil import atomic_write_bytes

MARKER_NAME = ".ransim-sandbox"
ESCROW_NAME = "key.pem"
MANIFEST_NAME = "keys.dat"
EVENTS_NAME = "events.jsonl"
LOCK_SUFFIX = ".locked"

DEFAULT_WHITELIST = frozenset({".txt", ".jpg", ".csv", ".doc"})
DEFAULT_MAX_FILES = 10_000
DEFAULT_MAX_TOTAL_BYTES = 2 * 1024**3

# never encryption targets, regardless of whitelist
RESERVED_NAMES = frozenset({MARKER_NAME, ESCROW_NAME, MANIFEST_NAME, EVENTS_NAME})

_MARKER_COMMENT = (
    "# ransim sandbox consent marker. This directory is a simulation\n"
    "# sandbox: files inside it may be encrypted and restored by ransim.\n"
)


@dataclass(frozen=True)
class SandboxConfig:
    """Validated sandbox parameters. ``root`` is canonical (symlink-free)."""

    root: Path
    sandbox_id: str
    whitelist: frozenset[str] = DEFAULT_WHITELIST
    max_files: int = DEFAULT_MAX_FILES
    max_total_bytes: int = DEFAULT_MAX_TOTAL_BYTES
    escrow_path: Path | None = None

    def __post_init__(self):
        if not self.whitelist:
            raise UsageError("extension whitelist may not be empty")
        if self.max_files <= 0 or self.max_total_bytes <= 0:
            raise UsageError("caps must be positive")
        if self.escrow_path is None:
            object.__setattr__(self, "escrow_path", self.root)

    @property
    def marker_path(self) -> Path:
        return self.root / MARKER_NAME

    @property
    def manifest_path(self) -> Path:
        return self.root / MANIFEST_NAME

    @property
    def events_path(self) -> Path:
        return self.root / EVENTS_NAME

    @property
    def escrow_file(self) -> Path:
        return self.escrow_path / ESCROW_NAME


@dataclass
class RunningTotals:
    """Monotone per-run counters fed to the cap check."""

    files: int = 0
    bytes: int = 0


def _normalize_whitelist(extensions) -> frozenset[str]:
    normalized = set()
    for ext in extensions:
        ext = ext.lower().strip()
        if not ext.startswith("."):
            ext = "." + ext
        if ext == ".":
            raise UsageError("empty extension in whitelist")
        normalized.add(ext)
    return frozenset(normalized)


def _refusal_reason(root: Path) -> str | None:
    """Defense-in-depth refusal list, applied to the canonical root."""
    if str(root) == root.anchor:
        return "filesystem root"
    try:
        home = Path(os.path.realpath(Path.home()))
    except RuntimeError:
        home = None
    if home is not None and root == home:
        return "a user home directory"
    if root.parent in (Path("/home"), Path("/Users")):
        return "a user home directory"
    return None


def create_sandbox(root_path) -> SandboxConfig:
    """Create (or adopt) a sandbox directory and write its consent marker.

    Idempotent: an existing marker is kept, so re-running init does not
    orphan a manifest written under the old sandbox id.
    """
    root = Path(root_path)
    root.mkdir(parents=True, exist_ok=True)
    root = Path(os.path.realpath(root))
    reason = _refusal_reason(root)
    if reason is not None:
        raise ConsentError(f"refusing to create a sandbox at {reason}: {root}")
    marker = root / MARKER_NAME
    if not marker.exists():
        sandbox_id = uuid.uuid4().hex
        atomic_write_bytes(
            marker, (sandbox_id + "\n" + _MARKER_COMMENT).encode("utf-8")
        )
    return validate_sandbox(root)


def validate_sandbox(
    root_path,
    whitelist=None,
    max_files: int | None = None,
    max_total_bytes: int | None = None,
    escrow_path=None,
) -> SandboxConfig:
    """Canonicalize and interlock-check a sandbox root.

    Refuses (ConsentError) when the marker is absent or the root is on the
    refusal list; a path that is not a directory is a usage error.
    """
    root = Path(root_path)
    if not root.exists():
        raise UsageError(f"sandbox root does not exist: {root}")
    if not root.is_dir():
        raise UsageError(f"sandbox root is not a directory: {root}")
    root = Path(os.path.realpath(root))

    reason = _refusal_reason(root)
    if reason is not None:
        raise ConsentError(f"refusing to operate on {reason}: {root}")

    marker = root / MARKER_NAME
    if marker.is_symlink() or not marker.is_file():
        raise ConsentError(
            f"no consent marker ({MARKER_NAME}) in {root}; "
            f"run init-sandbox to mark this directory as a simulation sandbox"
        )
    first_line = marker.read_text(encoding="utf-8").splitlines()[:1]
    sandbox_id = first_line[0].strip() if first_line else ""
    if len(sandbox_id) != 32 or any(c not in "0123456789abcdef" for c in sandbox_id):
        raise ConsentError(f"consent marker in {root} is corrupt")

    return SandboxConfig(
        root=root,
        sandbox_id=sandbox_id,
        whitelist=_normalize_whitelist(whitelist) if whitelist else DEFAULT_WHITELIST,
        max_files=max_files if max_files is not None else DEFAULT_MAX_FILES,
        max_total_bytes=(
            max_total_bytes if max_total_bytes is not None else DEFAULT_MAX_TOTAL_BYTES
        ),
        escrow_path=Path(os.path.realpath(escrow_path)) if escrow_path else None,
    )


def check_path_confinement(path, cfg: SandboxConfig) -> bool:
    """True iff the canonicalized path lies strictly inside the sandbox root.

    Symlinks pointing outside the root, upward traversal, and unresolvable
    paths all yield False.
    """
    try:
        real = Path(os.path.realpath(path))
    except OSError:
        return False
    return real != cfg.root and real.is_relative_to(cfg.root)


def is_target(path, cfg: SandboxConfig) -> bool:
    """Extension-whitelisted, not already locked, and not a lab file."""
    name = Path(path).name
    if name in RESERVED_NAMES or name.endswith(LOCK_SUFFIX):
        return False
    return Path(name).suffix.lower() in cfg.whitelist


def escrow_private_key(kp: KeyPair, cfg: SandboxConfig) -> Path:
    """Deposit the recovery key as key.pem — the gate before any encryption.

    Refuses to overwrite an existing escrow file, and converts any write
    failure into EscrowError so the caller aborts with zero files touched.
    """
    if not kp.has_private:
        raise UsageError("cannot escrow a public-only keypair")
    target = cfg.escrow_file
    if target.exists():
        raise EscrowError(f"escrow file already exists, not overwriting: {target}")
    try:
        atomic_write_bytes(target, serialize_private_key(kp), fsync_dir=True)
    except OSError as exc:
        raise EscrowError(f"could not write escrow file {target}: {exc}") from exc
    return target


def enforce_caps(totals: RunningTotals, cfg: SandboxConfig) -> str | None:
    """Return None to continue, or the name of the breached cap to halt."""
    if totals.files > cfg.max_files:
        return "max_files"
    if totals.bytes > cfg.max_total_bytes:
        return "max_total_bytes"
    return None
