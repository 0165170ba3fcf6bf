"""Known-answer vectors for the token format, frozen from an independent
implementation (pyca/cryptography's Fernet), plus a live cross-check
against that implementation."""

import base64
import json
from pathlib import Path

import pytest
from cryptography.fernet import Fernet

from ransim import crypto

VECTORS = json.loads(
    (Path(__file__).parent / "data" / "fernet_kat.json").read_text()
)


def _ids():
    return [f"v{i:02d}_len{len(v['plaintext_hex']) // 2}" for i, v in
            enumerate(VECTORS)]


@pytest.mark.parametrize("vector", VECTORS, ids=_ids())
def test_seal_matches_frozen_vector_byte_for_byte(vector):
    key = bytes.fromhex(vector["key_hex"])
    iv = bytes.fromhex(vector["iv_hex"])
    plaintext = bytes.fromhex(vector["plaintext_hex"])
    token = crypto.seal(key, plaintext, timestamp=vector["timestamp"], _iv=iv)
    assert token.hex() == vector["token_hex"]


@pytest.mark.parametrize("vector", VECTORS, ids=_ids())
def test_open_recovers_frozen_vector_plaintext(vector):
    key = bytes.fromhex(vector["key_hex"])
    token = bytes.fromhex(vector["token_hex"])
    assert crypto.open_token(key, token) == bytes.fromhex(
        vector["plaintext_hex"]
    )


@pytest.mark.parametrize("vector", VECTORS[:5], ids=_ids()[:5])
def test_live_cross_check_against_independent_implementation(vector):
    # the other implementation must accept our tokens and vice versa
    key = bytes.fromhex(vector["key_hex"])
    plaintext = bytes.fromhex(vector["plaintext_hex"])
    fernet = Fernet(base64.urlsafe_b64encode(key))

    ours = crypto.seal(
        key, plaintext, timestamp=vector["timestamp"],
        _iv=bytes.fromhex(vector["iv_hex"]),
    )
    assert fernet.decrypt(base64.urlsafe_b64encode(ours), ttl=None) == plaintext

    theirs = base64.urlsafe_b64decode(fernet.encrypt(plaintext))
    assert crypto.open_token(key, theirs) == plaintext


def test_vector_count():
    assert len(VECTORS) == 20
