import hashlib
import os
from pathlib import Path

import pytest

from ransim import crypto
from ransim.sandbox import create_sandbox

# acceptance tests append (criterion, passed, detail) here; the terminal
# summary prints one line per criterion at the end of the run
ACCEPTANCE_RESULTS: list[tuple[str, bool, str]] = []


def record_criterion(name: str, passed: bool, detail: str = "") -> None:
    ACCEPTANCE_RESULTS.append((name, passed, detail))
    print(f"ACCEPTANCE {name}: {'PASS' if passed else 'FAIL'} {detail}".rstrip())


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in ACCEPTANCE_RESULTS:
        line = f"{'PASS' if passed else 'FAIL'}  {name}"
        if detail:
            line += f"  [{detail}]"
        terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def keypair():
    return crypto.generate_keypair()


@pytest.fixture(scope="session")
def other_keypair():
    return crypto.generate_keypair()


@pytest.fixture
def sandbox(tmp_path):
    """A fresh consented sandbox under the test tmp dir."""
    return create_sandbox(tmp_path / "box")


def tree_snapshot(root: Path, include_mtime: bool = True) -> dict:
    """Full recursive state of a tree: per path, kind + content hash (+
    mtime). Two snapshots compare equal iff nothing was created, removed,
    or modified — the filesystem-watcher assertion used by the
    confinement and gate tests."""
    snap = {}
    root = Path(root)
    for dirpath, dirnames, filenames in os.walk(root, followlinks=False):
        d = Path(dirpath)
        for name in dirnames:
            p = d / name
            rel = str(p.relative_to(root))
            if p.is_symlink():
                snap[rel] = ("dirlink", os.readlink(p))
            else:
                snap[rel] = ("dir",)
        for name in filenames:
            p = d / name
            rel = str(p.relative_to(root))
            if p.is_symlink():
                snap[rel] = ("symlink", os.readlink(p))
                continue
            st = p.lstat()
            digest = hashlib.sha256(p.read_bytes()).hexdigest()
            if include_mtime:
                snap[rel] = ("file", st.st_size, digest, st.st_mtime_ns)
            else:
                snap[rel] = ("file", st.st_size, digest)
    return snap
