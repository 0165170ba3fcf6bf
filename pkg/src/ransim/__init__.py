"""ransim: a controlled, fully reversible ransomware-behavior simulation
lab for detection research and security teaching.

Encryption is confined to an explicitly marked sandbox directory, limited
to a whitelist of extensions, capped in size, and gated on escrowing the
recovery key first — every run is reversible by construction.
"""

from .crypto import (
    KeyPair,
    generate_file_key,
    generate_keypair,
    open_token,
    parse_private_key,
    seal,
    serialize_private_key,
    unwrap_key,
    wrap_key,
)
from .engine import (
    DecryptReport,
    EncryptReport,
    VerifyReport,
    decrypt_all,
    encrypt_file,
    recursive_encrypt,
    verify_corpus,
)
from .manifest import Manifest, ManifestEntry, load_manifest, write_manifest
from .sandbox import (
    SandboxConfig,
    check_path_confinement,
    create_sandbox,
    enforce_caps,
    escrow_private_key,
    is_target,
    validate_sandbox,
)
from .telemetry import EventLog, SimEvent, read_events

__version__ = "0.1.0"

__all__ = [
    "KeyPair",
    "Manifest",
    "ManifestEntry",
    "SandboxConfig",
    "SimEvent",
    "EventLog",
    "EncryptReport",
    "DecryptReport",
    "VerifyReport",
    "generate_keypair",
    "generate_file_key",
    "serialize_private_key",
    "parse_private_key",
    "seal",
    "open_token",
    "wrap_key",
    "unwrap_key",
    "create_sandbox",
    "validate_sandbox",
    "check_path_confinement",
    "is_target",
    "escrow_private_key",
    "enforce_caps",
    "recursive_encrypt",
    "encrypt_file",
    "decrypt_all",
    "verify_corpus",
    "load_manifest",
    "write_manifest",
    "read_events",
    "__version__",
]
