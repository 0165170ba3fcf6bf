"""Cryptographic primitives: RSA-2048 wrapping pair, per-file keys, and the
authenticated token container used to seal file contents.

The token layout (stored on disk as raw bytes, not base64):

    version (1 byte, 0x80)
    timestamp (8 bytes, big-endian seconds since epoch)
    IV (16 bytes)
    ciphertext (AES-128-CBC, PKCS#7 padding, key = second half of file key)
    MAC (32 bytes, HMAC-SHA-256 over everything above, key = first half)

A 32-byte file key is therefore 16 signing bytes followed by 16 encryption
bytes. File keys are wrapped under RSA-OAEP-SHA-256, giving one 256-byte
block per key. Timestamps are recorded but never enforced: a sealed file
must stay recoverable at any later time.
"""

from __future__ import annotations

import hmac
import os
import struct
import time
from dataclasses import dataclass

from cryptography.hazmat.primitives import hashes, serialization
from cryptography.hazmat.primitives.asymmetric import padding as asym_padding
from cryptography.hazmat.primitives.asymmetric import rsa
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes
from cryptography.hazmat.primitives.padding import PKCS7

from .errors import (
    AuthenticationError,
    KeyParseError,
    TokenFormatError,
    UnwrapError,
    UsageError,
)

RSA_BITS = 2048
RSA_EXPONENT = 65537
FILE_KEY_LEN = 32
WRAPPED_KEY_LEN = RSA_BITS // 8
TOKEN_VERSION = 0x80
IV_LEN = 16
MAC_LEN = 32
HEADER_LEN = 1 + 8 + IV_LEN
# version + timestamp + IV + MAC: everything except the ciphertext
TOKEN_OVERHEAD = HEADER_LEN + MAC_LEN
MIN_TOKEN_LEN = TOKEN_OVERHEAD + 16

_OAEP = asym_padding.OAEP(
    mgf=asym_padding.MGF1(algorithm=hashes.SHA256()),
    algorithm=hashes.SHA256(),
    label=None,
)


@dataclass(frozen=True)
class KeyPair:
    """RSA-2048 wrapping pair. A public-only instance is valid."""

    public_key: rsa.RSAPublicKey
    private_key: rsa.RSAPrivateKey | None = None

    def __post_init__(self):
        if self.public_key.key_size != RSA_BITS:
            raise UsageError(
                f"modulus must be {RSA_BITS} bits, got {self.public_key.key_size}"
            )

    @property
    def has_private(self) -> bool:
        return self.private_key is not None


def generate_keypair() -> KeyPair:
    """Generate a fresh RSA-2048 pair with public exponent 65537."""
    private = rsa.generate_private_key(
        public_exponent=RSA_EXPONENT, key_size=RSA_BITS
    )
    return KeyPair(public_key=private.public_key(), private_key=private)


def serialize_private_key(kp: KeyPair) -> bytes:
    """Serialize the private half as unencrypted PKCS#8 in PEM framing."""
    if kp.private_key is None:
        raise UsageError("keypair has no private half to serialize")
    return kp.private_key.private_bytes(
        encoding=serialization.Encoding.PEM,
        format=serialization.PrivateFormat.PKCS8,
        encryption_algorithm=serialization.NoEncryption(),
    )


def _pem_fault_offset(data: bytes) -> int:
    """Best-effort byte offset of the first structural fault in PEM input."""
    start = data.find(b"-----BEGIN")
    if start < 0:
        return 0
    body_start = data.find(b"-----", start + 5)
    body_start = data.find(b"\n", body_start) + 1 if body_start >= 0 else start
    footer = data.find(b"-----END", body_start)
    body = data[body_start : footer if footer >= 0 else len(data)]
    allowed = frozenset(
        b"ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/=\r\n "
    )
    for i, byte in enumerate(body):
        if byte not in allowed:
            return body_start + i
    if footer < 0:
        return len(data)
    return body_start


def parse_private_key(data: bytes) -> KeyPair:
    """Parse a PEM-framed PKCS#8 private key into a full keypair.

    Raises KeyParseError (naming a byte offset) for malformed input, keys
    that are not RSA, or a modulus that is not 2048 bits. Never returns a
    partial key.
    """
    if not isinstance(data, (bytes, bytearray)):
        raise UsageError("key input must be bytes")
    try:
        private = serialization.load_pem_private_key(bytes(data), password=None)
    except (ValueError, TypeError) as exc:
        raise KeyParseError(
            f"could not parse private key: {exc}", offset=_pem_fault_offset(data)
        ) from exc
    if not isinstance(private, rsa.RSAPrivateKey):
        raise KeyParseError("key is not an RSA private key")
    if private.key_size != RSA_BITS:
        raise KeyParseError(
            f"modulus must be {RSA_BITS} bits, got {private.key_size}"
        )
    return KeyPair(public_key=private.public_key(), private_key=private)


def generate_file_key() -> bytes:
    """32 fresh bytes from the OS CSPRNG: 16 signing + 16 encryption."""
    return os.urandom(FILE_KEY_LEN)


def _check_file_key(key: bytes) -> None:
    if not isinstance(key, (bytes, bytearray)) or len(key) != FILE_KEY_LEN:
        raise ValueError(f"file key must be exactly {FILE_KEY_LEN} bytes")


def seal(
    key: bytes,
    plaintext: bytes,
    timestamp: int | None = None,
    *,
    _iv: bytes | None = None,
) -> bytes:
    """Seal plaintext into an authenticated token under a 32-byte file key.

    ``timestamp`` defaults to the current time. ``_iv`` is a test hook for
    known-answer vectors; production callers must leave it unset so every
    token gets a fresh random IV.
    """
    _check_file_key(key)
    signing_key, encryption_key = key[:16], key[16:]
    if timestamp is None:
        timestamp = int(time.time())
    iv = os.urandom(IV_LEN) if _iv is None else _iv
    if len(iv) != IV_LEN:
        raise ValueError(f"IV must be {IV_LEN} bytes")

    padder = PKCS7(algorithms.AES.block_size).padder()
    padded = padder.update(plaintext) + padder.finalize()
    encryptor = Cipher(algorithms.AES(encryption_key), modes.CBC(iv)).encryptor()
    ciphertext = encryptor.update(padded) + encryptor.finalize()

    body = struct.pack(">BQ", TOKEN_VERSION, timestamp) + iv + ciphertext
    mac = hmac.new(signing_key, body, "sha256").digest()
    return body + mac


def open_token(key: bytes, token: bytes) -> bytes:
    """Open a sealed token, returning the plaintext.

    The MAC is verified (constant-time) before any decryption output is
    produced. Padding failures raise the same AuthenticationError as MAC
    failures so the API exposes no padding oracle.
    """
    _check_file_key(key)
    signing_key, encryption_key = key[:16], key[16:]
    if len(token) < 1 or token[0] != TOKEN_VERSION:
        raise TokenFormatError(
            f"bad version byte: expected 0x{TOKEN_VERSION:02x}"
        )
    if len(token) < MIN_TOKEN_LEN or (len(token) - TOKEN_OVERHEAD) % 16 != 0:
        raise TokenFormatError(f"impossible token length {len(token)}")

    body, mac = token[:-MAC_LEN], token[-MAC_LEN:]
    expected = hmac.new(signing_key, body, "sha256").digest()
    if not hmac.compare_digest(mac, expected):
        raise AuthenticationError("token failed authentication")

    iv = token[9:HEADER_LEN]
    ciphertext = token[HEADER_LEN:-MAC_LEN]
    decryptor = Cipher(algorithms.AES(encryption_key), modes.CBC(iv)).decryptor()
    padded = decryptor.update(ciphertext) + decryptor.finalize()
    unpadder = PKCS7(algorithms.AES.block_size).unpadder()
    try:
        return unpadder.update(padded) + unpadder.finalize()
    except ValueError as exc:
        raise AuthenticationError("token failed authentication") from exc


def token_timestamp(token: bytes) -> int:
    """Recorded seal time of a token (informational; never enforced)."""
    if len(token) < HEADER_LEN or token[0] != TOKEN_VERSION:
        raise TokenFormatError("not a sealed token")
    return struct.unpack(">Q", token[1:9])[0]


def check_token_structure(token: bytes) -> None:
    """Cheap structural validation without key material.

    Raises TokenFormatError when the bytes cannot possibly be a well-formed
    token; says nothing about authenticity.
    """
    if len(token) < 1 or token[0] != TOKEN_VERSION:
        raise TokenFormatError(
            f"bad version byte: expected 0x{TOKEN_VERSION:02x}"
        )
    if len(token) < MIN_TOKEN_LEN or (len(token) - TOKEN_OVERHEAD) % 16 != 0:
        raise TokenFormatError(f"impossible token length {len(token)}")


def wrap_key(public: KeyPair, key: bytes) -> bytes:
    """Wrap a 32-byte file key under the public half (RSA-OAEP-SHA-256)."""
    _check_file_key(key)
    wrapped = public.public_key.encrypt(bytes(key), _OAEP)
    assert len(wrapped) == WRAPPED_KEY_LEN
    return wrapped


def unwrap_key(private: KeyPair, wrapped: bytes) -> bytes:
    """Recover a file key from its wrapped form using the private half."""
    if private.private_key is None:
        raise UsageError("keypair has no private half for unwrapping")
    if len(wrapped) != WRAPPED_KEY_LEN:
        raise UnwrapError(
            f"wrapped key must be {WRAPPED_KEY_LEN} bytes, got {len(wrapped)}"
        )
    try:
        key = private.private_key.decrypt(wrapped, _OAEP)
    except ValueError as exc:
        raise UnwrapError("key unwrap failed") from exc
    if len(key) != FILE_KEY_LEN:
        raise UnwrapError(
            f"unwrapped key has length {len(key)}, expected {FILE_KEY_LEN}"
        )
    return key
