"""Exception hierarchy for the simulation lab.

Every error that can surface through the CLI carries an ``exit_code`` so
scripts get stable, documented codes: 2 usage, 3 consent/sandbox refusal,
4 key material, 5 partial failure, 6 cap halt.
"""


class RansimError(Exception):
    exit_code = 1


class UsageError(RansimError):
    """Bad arguments or a violated calling contract."""

    exit_code = 2


class ConsentError(RansimError):
    """Sandbox refusal: missing consent marker or a forbidden root."""

    exit_code = 3


class SandboxMismatchError(RansimError):
    """On-disk state belongs to a different sandbox (id clash)."""

    exit_code = 3


class KeyMaterialError(RansimError):
    exit_code = 4


class KeyParseError(KeyMaterialError):
    """Private key bytes could not be parsed.

    ``offset`` is the best-effort byte offset of the first fault in the
    input, for error messages that point somewhere useful.
    """

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class KeyMissingError(KeyMaterialError):
    """The private key file required for decryption does not exist."""


class WrongKeyError(KeyMaterialError):
    """A syntactically valid private key that does not match this corpus."""


class EscrowError(KeyMaterialError):
    """Recovery-key escrow could not be completed; nothing may be encrypted."""


class UnwrapError(KeyMaterialError):
    """RSA key unwrap failed (wrong key or corrupted ciphertext)."""


class TokenError(RansimError):
    """Base for sealed-token failures."""


class TokenFormatError(TokenError):
    """Token structure is wrong (bad version byte, impossible length)."""


class AuthenticationError(TokenError):
    """MAC or padding verification failed; no plaintext is released.

    Padding failures are deliberately indistinguishable from MAC failures
    in the public API.
    """


class ManifestError(RansimError):
    pass


class ManifestNotFoundError(ManifestError):
    exit_code = 4


class ManifestParseError(ManifestError):
    def __init__(self, message: str, line: int):
        super().__init__(f"{message} (line {line})")
        self.line = line


class ManifestVersionError(ManifestError):
    pass


class DuplicateEntryError(ManifestError):
    """Same relative path recorded twice — a double-encryption attempt."""


class CapExceededError(RansimError):
    exit_code = 6
