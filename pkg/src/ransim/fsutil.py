"""Small filesystem helpers shared by the engine and the manifest store."""

from __future__ import annotations

import hashlib
import os
from pathlib import Path


def atomic_write_bytes(path: Path, data: bytes, fsync_dir: bool = False) -> None:
    """Write a file atomically: temp in the same directory, flush, fsync,
    rename. A crash leaves either the old file or the new one, never a
    torn hybrid. ``fsync_dir`` also makes the rename itself durable.
    """
    path = Path(path)
    tmp = path.with_name(f".{path.name}.tmp{os.getpid()}")
    try:
        with open(tmp, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise
    if fsync_dir:
        dir_fd = os.open(path.parent, os.O_RDONLY)
        try:
            os.fsync(dir_fd)
        finally:
            os.close(dir_fd)


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()
