import hmac
import logging
from typing import Iterable

from ..errors import ValidationError
from ..interfaces.identity_verifier import IdentityVerifier

logger = logging.getLogger(__name__)

SEPARATOR = b"|"


def canonical_email(id_data: bytes) -> str:
    """The email part of identity evidence, trimmed and lowercased."""
    try:
        email = id_data.split(SEPARATOR, 1)[0].decode("utf8").strip().lower()
    except UnicodeDecodeError as e:
        raise ValidationError("Identity data is not UTF-8") from e
    if "@" not in email:
        raise ValidationError(f"No email address in identity data {id_data[:64]!r}")
    return email


class AllowListVerifier(IdentityVerifier):
    """Accepts identity data whose email is on a fixed list."""

    def __init__(self, emails: Iterable[str]):
        self._emails = frozenset(e.strip().lower() for e in emails)
        logger.debug(f"Allow-list verifier with {len(self._emails)} emails")

    def verify(self, id_data: bytes) -> bool:
        try:
            return canonical_email(id_data) in self._emails
        except ValidationError:
            return False


class HmacTokenVerifier(IdentityVerifier):
    """Accepts ``email|token`` where token is HMAC-SHA256(key, email) in hex."""

    def __init__(self, key: bytes):
        if len(key) < 16:
            raise ValidationError("HMAC key must be at least 16 bytes")
        self._key = key

    def token(self, email: str) -> str:
        return hmac.new(self._key, email.strip().lower().encode(), "sha256").hexdigest()

    def issue(self, email: str) -> bytes:
        """Identity data a registrar would hand to an eligible voter."""
        return email.encode() + SEPARATOR + self.token(email).encode()

    def verify(self, id_data: bytes) -> bool:
        parts = id_data.split(SEPARATOR, 1)
        if len(parts) != 2:
            return False
        try:
            email = canonical_email(id_data)
            token = parts[1].decode("ascii").strip()
        except (ValidationError, UnicodeDecodeError):
            return False
        return hmac.compare_digest(self.token(email), token)
