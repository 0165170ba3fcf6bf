"""Deterministic test-corpus generation.

Seeding produces N whitelisted files summing to the requested byte total
(split across .txt/.jpg/.csv/.doc by a mix spec) plus 10% non-whitelisted
decoy files, spread over a few nested directories. Text-like payloads are
compressible and "jpg" payloads are seeded-random and incompressible, so
throughput numbers reflect mixed entropy. The same seed always yields a
byte-identical corpus; an index of sizes and checksums is written for
later verification.
"""

from __future__ import annotations

import json
import math
import random
from pathlib import Path

from .errors import UsageError
from .fsutil import atomic_write_bytes, sha256_hex
from .sandbox import SandboxConfig

INDEX_NAME = "corpus_index.json"
DECOY_FRACTION = 0.10
DECOY_EXTENSIONS = (".zip", ".png", ".pdf", ".log")
_SUBDIRS = ("", "docs", "data", "media/nested")

_WORDS = (
    "status report quarterly revenue invoice ledger summary meeting notes "
    "draft final review archive backup project plan budget forecast client "
    "contract schedule inventory shipment order receipt payment account"
).split()


def parse_size(text: str | int) -> int:
    """Parse '500MB', '2GiB', '1024', ... into bytes (decimal and binary
    suffixes both accepted)."""
    if isinstance(text, int):
        return text
    s = text.strip().lower().replace(" ", "")
    units = {
        "b": 1,
        "kb": 10**3, "mb": 10**6, "gb": 10**9,
        "kib": 2**10, "mib": 2**20, "gib": 2**30,
    }
    for suffix in sorted(units, key=len, reverse=True):
        if s.endswith(suffix):
            number = s[: -len(suffix)]
            try:
                return int(float(number) * units[suffix])
            except ValueError:
                break
    try:
        return int(s)
    except ValueError:
        raise UsageError(f"cannot parse size: {text!r}") from None


def parse_mix(spec: str, whitelist) -> dict[str, float]:
    """Parse 'txt=4,jpg=3,csv=2,doc=1' into extension weights."""
    weights: dict[str, float] = {}
    for part in spec.split(","):
        part = part.strip()
        if not part:
            continue
        sep = "=" if "=" in part else ":"
        if sep not in part:
            raise UsageError(f"bad mix component {part!r}, expected ext=weight")
        ext, _, value = part.partition(sep)
        ext = ext.strip().lower()
        if not ext.startswith("."):
            ext = "." + ext
        if ext not in whitelist:
            raise UsageError(f"mix extension {ext} is not in the whitelist")
        try:
            weight = float(value)
        except ValueError:
            raise UsageError(f"bad mix weight in {part!r}") from None
        if weight < 0:
            raise UsageError(f"negative mix weight in {part!r}")
        weights[ext] = weight
    if not weights or sum(weights.values()) == 0:
        raise UsageError(f"mix spec selects nothing: {spec!r}")
    return weights


def _apportion(n: int, weights: dict[str, float]) -> dict[str, int]:
    """Largest-remainder split of n items across weighted extensions."""
    total_weight = sum(weights.values())
    exact = {ext: n * w / total_weight for ext, w in weights.items()}
    counts = {ext: int(exact[ext]) for ext in weights}
    remainder = n - sum(counts.values())
    by_frac = sorted(
        weights, key=lambda ext: (exact[ext] - counts[ext], ext), reverse=True
    )
    for ext in by_frac[:remainder]:
        counts[ext] += 1
    return counts


def _compressible_block(rng: random.Random, size: int = 1 << 16) -> bytes:
    words = []
    length = 0
    while length < size:
        word = rng.choice(_WORDS)
        words.append(word)
        length += len(word) + 1
    return (" ".join(words) + "\n").encode("ascii")[:size]


def _csv_block(rng: random.Random, size: int = 1 << 16) -> bytes:
    rows = ["id,region,amount,flag\n".encode("ascii")]
    length = len(rows[0])
    i = 0
    while length < size:
        row = f"{i},{rng.choice(_WORDS)},{rng.randrange(10**6)},{i % 2}\n".encode()
        rows.append(row)
        length += len(row)
        i += 1
    return b"".join(rows)[:size]


def _payload(kind: str, rng: random.Random, header: bytes, size: int,
             blocks: dict[str, bytes]) -> bytes:
    if size == 0:
        return b""
    if kind == ".jpg":
        # incompressible: JFIF-flavored header + seeded random bytes
        body = b"\xff\xd8\xff\xe0\x00\x10JFIF" + rng.randbytes(max(size - 10, 0))
        return body[:size]
    block = blocks[kind]
    reps = math.ceil(max(size - len(header), 0) / len(block)) + 1
    return (header + block * reps)[:size]


def seed_corpus(
    cfg: SandboxConfig,
    n_files: int,
    total_bytes: int,
    seed: int = 0,
    mix: str | None = None,
) -> dict:
    """Generate the corpus and write its index. Returns the index dict."""
    if n_files < 0 or total_bytes < 0:
        raise UsageError("--files and --total-bytes must be non-negative")
    n_decoys = math.ceil(n_files * DECOY_FRACTION)
    if n_files + n_decoys > cfg.max_files:
        raise UsageError(
            f"requested corpus ({n_files} files + {n_decoys} decoys)"
            f" exceeds max_files cap {cfg.max_files}"
        )
    if total_bytes > cfg.max_total_bytes:
        raise UsageError(
            f"requested corpus size {total_bytes} exceeds cap {cfg.max_total_bytes}"
        )

    rng = random.Random(seed)
    weights = parse_mix(mix, cfg.whitelist) if mix else {
        ext: 1.0 for ext in sorted(cfg.whitelist)
    }
    counts = _apportion(n_files, weights)
    blocks = {
        ".txt": _compressible_block(rng),
        ".csv": _csv_block(rng),
        ".doc": _compressible_block(rng),
    }
    for ext in weights:
        if ext not in blocks and ext != ".jpg":
            blocks[ext] = _compressible_block(rng)

    # per-file sizes: jittered around the mean, rescaled to hit the exact total
    sizes: list[int] = []
    if n_files:
        raw = [rng.uniform(0.75, 1.25) for _ in range(n_files)]
        scale = total_bytes / sum(raw)
        sizes = [int(r * scale) for r in raw]
        for i in range(total_bytes - sum(sizes)):  # truncation drift < n_files
            sizes[i % n_files] += 1

    index_files = []
    file_no = 0
    for ext in sorted(counts):
        for _ in range(counts[ext]):
            subdir = _SUBDIRS[file_no % len(_SUBDIRS)]
            rel = str(Path(subdir) / f"sample_{file_no:04d}{ext}")
            size = sizes[file_no]
            header = f"corpus file {rel} seed {seed}\n".encode()
            data = _payload(ext, rng, header, size, blocks)
            target = cfg.root / rel
            target.parent.mkdir(parents=True, exist_ok=True)
            atomic_write_bytes(target, data)
            index_files.append(
                {
                    "relative_path": rel,
                    "size": len(data),
                    "sha256": sha256_hex(data),
                    "whitelisted": True,
                }
            )
            file_no += 1

    for d in range(n_decoys):
        ext = DECOY_EXTENSIONS[d % len(DECOY_EXTENSIONS)]
        subdir = _SUBDIRS[d % len(_SUBDIRS)]
        rel = str(Path(subdir) / f"decoy_{d:04d}{ext}")
        data = rng.randbytes(rng.randrange(1024, 4096))
        target = cfg.root / rel
        target.parent.mkdir(parents=True, exist_ok=True)
        atomic_write_bytes(target, data)
        index_files.append(
            {
                "relative_path": rel,
                "size": len(data),
                "sha256": sha256_hex(data),
                "whitelisted": False,
            }
        )

    index = {
        "seed": seed,
        "requested_files": n_files,
        "requested_bytes": total_bytes,
        "decoys": n_decoys,
        "files": index_files,
    }
    atomic_write_bytes(
        cfg.root / INDEX_NAME,
        json.dumps(index, indent=1).encode("utf-8"),
    )
    return index
