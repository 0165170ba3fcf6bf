"""Operator CLI: sandbox lifecycle, corpus seeding, key management,
lock/unlock/verify, control-service launch.

Exit codes are stable: 0 success, 2 usage error, 3 consent/sandbox
refusal, 4 key error, 5 partial failure, 6 cap halt. Machine-readable
reports go to stdout as one JSON object when --json is passed; progress
and human summaries go to stderr/stdout respectively so pipelines stay
clean.
"""

from __future__ import annotations

import functools
import json
import sys
from pathlib import Path

import click

from . import crypto
from .corpus import parse_size, seed_corpus
from .engine import decrypt_all, recursive_encrypt, verify_corpus
from .errors import RansimError, SandboxMismatchError
from .manifest import Manifest, load_manifest
from .sandbox import (
    create_sandbox,
    escrow_private_key,
    validate_sandbox,
)
from .service import (
    DEFAULT_COUNTDOWN_SECONDS,
    DEFAULT_NOTE_TEMPLATE,
    DEFAULT_PORT,
    serve,
)
from .telemetry import EventLog, read_events


def sandbox_option(fn):
    return click.option(
        "--sandbox",
        "sandbox_path",
        envvar="RANSIM_SANDBOX",
        required=True,
        type=click.Path(path_type=Path),
        help="Sandbox root directory (env: RANSIM_SANDBOX).",
    )(fn)


def json_option(fn):
    return click.option(
        "--json", "as_json", is_flag=True, help="Emit a JSON report on stdout."
    )(fn)


def exits_with_ransim_codes(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            code = fn(*args, **kwargs)
        except RansimError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(exc.exit_code)
        sys.exit(code or 0)

    return wrapper


def _emit(obj: dict, as_json: bool, human: list[str]) -> None:
    if as_json:
        click.echo(json.dumps(obj))
    else:
        for line in human:
            click.echo(line)


def _load_or_new_manifest(cfg) -> Manifest:
    if cfg.manifest_path.exists():
        m = load_manifest(cfg.manifest_path)
        if m.sandbox_id != cfg.sandbox_id:
            raise SandboxMismatchError(
                f"manifest belongs to sandbox {m.sandbox_id},"
                f" this sandbox is {cfg.sandbox_id}"
            )
        return m
    return Manifest(sandbox_id=cfg.sandbox_id)


def _obtain_keypair(cfg, events: EventLog) -> crypto.KeyPair:
    """Escrow gate: load the existing escrowed key or generate-and-escrow
    a fresh pair. Either way key.pem is on disk (and the event durable)
    before this returns."""
    if cfg.escrow_file.exists():
        pair = crypto.parse_private_key(cfg.escrow_file.read_bytes())
        events.record("key_escrowed", detail="existing escrow verified")
        return pair
    pair = crypto.generate_keypair()
    escrow_private_key(pair, cfg)
    events.record("key_escrowed", detail=f"{cfg.escrow_file.name} written")
    return pair


@click.group()
@click.version_option(package_name="ransim")
def main():
    """Controlled, fully reversible ransomware-behavior simulation lab.

    Operates only inside an explicitly marked sandbox directory; the
    recovery key is escrowed before anything is locked.
    """


@main.command("init-sandbox")
@sandbox_option
@json_option
@exits_with_ransim_codes
def init_sandbox(sandbox_path: Path, as_json: bool):
    """Create a sandbox directory with its consent marker."""
    cfg = create_sandbox(sandbox_path)
    _emit(
        {"root": str(cfg.root), "sandbox_id": cfg.sandbox_id},
        as_json,
        [f"sandbox ready: {cfg.root}", f"sandbox id: {cfg.sandbox_id}"],
    )


@main.command("seed-corpus")
@sandbox_option
@click.option("--files", "n_files", type=int, required=True,
              help="Number of whitelisted files to generate.")
@click.option("--total-bytes", "total", required=True,
              help="Total payload size, e.g. 500MB or 52428800.")
@click.option("--seed", type=int, default=0, show_default=True,
              help="Deterministic generation seed.")
@click.option("--mix", default=None,
              help="Extension weights, e.g. 'txt=4,jpg=3,csv=2,doc=1'.")
@json_option
@exits_with_ransim_codes
def seed_corpus_cmd(sandbox_path, n_files, total, seed, mix, as_json):
    """Generate a deterministic mixed-entropy corpus plus decoys."""
    cfg = validate_sandbox(sandbox_path)
    index = seed_corpus(cfg, n_files, parse_size(total), seed=seed, mix=mix)
    summary = {
        "files": index["requested_files"],
        "decoys": index["decoys"],
        "total_bytes": sum(
            f["size"] for f in index["files"] if f["whitelisted"]
        ),
        "index": str(cfg.root / "corpus_index.json"),
    }
    _emit(summary, as_json, [
        f"seeded {summary['files']} files (+{summary['decoys']} decoys),"
        f" {summary['total_bytes']} bytes",
        f"index: {summary['index']}",
    ])


@main.command("keygen")
@sandbox_option
@json_option
@exits_with_ransim_codes
def keygen(sandbox_path, as_json):
    """Generate the wrapping keypair and escrow it as key.pem."""
    cfg = validate_sandbox(sandbox_path)
    pair = crypto.generate_keypair()
    path = escrow_private_key(pair, cfg)
    _emit(
        {"escrow_path": str(path)},
        as_json,
        [f"recovery key escrowed: {path}"],
    )


@main.command("encrypt")
@sandbox_option
@click.option("--max-files", type=int, default=None,
              help="Per-run file-count cap (default 10000).")
@click.option("--max-total-bytes", default=None,
              help="Per-run byte cap (default 2GiB), e.g. 500MB.")
@json_option
@exits_with_ransim_codes
def encrypt(sandbox_path, max_files, max_total_bytes, as_json):
    """Recursively lock every whitelisted file in the sandbox."""
    cfg = validate_sandbox(
        sandbox_path,
        max_files=max_files,
        max_total_bytes=(
            parse_size(max_total_bytes) if max_total_bytes is not None else None
        ),
    )
    m = _load_or_new_manifest(cfg)
    with EventLog(cfg.events_path) as events:
        pair = _obtain_keypair(cfg, events)
        click.echo(f"locking {cfg.root} ...", err=True)
        report = recursive_encrypt(cfg, pair, m, events)
    rate = report.bytes_processed / report.duration / 1e6 if report.duration else 0
    _emit(report.to_dict(), as_json, [
        f"files scanned:   {report.files_scanned}",
        f"files encrypted: {report.files_encrypted}",
        f"files skipped:   {report.files_skipped}",
        f"bytes processed: {report.bytes_processed}",
        f"duration:        {report.duration:.2f}s ({rate:.1f} MB/s)",
        f"failures:        {len(report.failures)}",
    ])
    if report.halted_by_cap:
        click.echo(f"halted by cap: {report.halted_by_cap}", err=True)
        return 6
    return 5 if report.failures else 0


@main.command("decrypt")
@sandbox_option
@click.option("--key", "key_path", type=click.Path(path_type=Path),
              default=None,
              help="Private key PEM (default: key.pem at the sandbox root).")
@json_option
@exits_with_ransim_codes
def decrypt(sandbox_path, key_path, as_json):
    """Restore every manifest entry using the escrowed private key."""
    cfg = validate_sandbox(sandbox_path)
    m = load_manifest(cfg.manifest_path)
    if m.sandbox_id != cfg.sandbox_id:
        raise SandboxMismatchError(
            f"manifest belongs to sandbox {m.sandbox_id},"
            f" this sandbox is {cfg.sandbox_id}"
        )
    key = key_path if key_path is not None else cfg.escrow_file
    with EventLog(cfg.events_path) as events:
        click.echo(f"restoring {cfg.root} ...", err=True)
        report = decrypt_all(cfg, key, m, events)
    _emit(report.to_dict(), as_json, [
        f"files restored:   {report.files_restored}",
        f"checksum matches: {report.checksum_matches}",
        f"duration:         {report.duration:.2f}s",
        f"failures:         {len(report.failures)}",
    ])
    return 5 if report.failures else 0


@main.command("verify")
@sandbox_option
@json_option
@exits_with_ransim_codes
def verify(sandbox_path, as_json):
    """Check corpus consistency (locked or fully restored)."""
    cfg = validate_sandbox(sandbox_path)
    m = load_manifest(cfg.manifest_path) if cfg.manifest_path.exists() else None
    report = verify_corpus(cfg, m)
    _emit(report.to_dict(), as_json, [
        f"mode:    {report.mode}",
        f"checked: {report.checked}",
        f"ok:      {report.ok}",
    ] + [f"  {path}: {why}" for path, why in report.failures])
    return 0 if report.ok else 5


@main.command("serve")
@sandbox_option
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=DEFAULT_PORT, show_default=True)
@click.option("--allow-remote", is_flag=True,
              help="Explicitly allow binding a non-loopback address.")
@click.option("--countdown-minutes", type=float,
              default=DEFAULT_COUNTDOWN_SECONDS / 60, show_default=True,
              help="Cosmetic ransom countdown length.")
@click.option("--note-file", type=click.Path(path_type=Path), default=None,
              help="Custom ransom-note template file.")
@click.option("--ui-dir", type=click.Path(path_type=Path), default=None,
              help="Static UI bundle directory.")
@exits_with_ransim_codes
def serve_cmd(sandbox_path, host, port, allow_remote, countdown_minutes,
              note_file, ui_dir):
    """Run the local control service (ransom-note UI + unlock API)."""
    cfg = validate_sandbox(sandbox_path)
    note_template = (
        note_file.read_text(encoding="utf-8")
        if note_file is not None
        else DEFAULT_NOTE_TEMPLATE
    )
    click.echo(f"control service on http://{host}:{port}/ "
               f"(sandbox {cfg.root})", err=True)
    serve(
        cfg,
        host=host,
        port=port,
        allow_remote=allow_remote,
        note_template=note_template,
        countdown_seconds=countdown_minutes * 60,
        ui_dir=ui_dir,
    )


@main.command("events")
@sandbox_option
@click.option("--since", type=int, default=0, show_default=True,
              help="Only events with seq greater than this.")
@json_option
@exits_with_ransim_codes
def events_cmd(sandbox_path, since, as_json):
    """Print the telemetry event log."""
    cfg = validate_sandbox(sandbox_path)
    try:
        events = [e for e in read_events(cfg.events_path) if e.seq > since]
    except FileNotFoundError:
        events = []
    if as_json:
        _emit({"events": [json.loads(e.to_json()) for e in events]}, True, [])
    else:
        for e in events:
            parts = [f"{e.seq:6d}", f"{e.timestamp:.3f}", e.kind]
            if e.relative_path:
                parts.append(e.relative_path)
            if e.bytes is not None:
                parts.append(f"{e.bytes}B")
            if e.detail:
                parts.append(f"({e.detail})")
            click.echo("  ".join(parts))


if __name__ == "__main__":
    main()
