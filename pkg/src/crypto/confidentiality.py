"""
Ballot secrecy primitives.

- K-of-N Shamir sharing of the decryption key over the scalar field (trusted
  dealer; stands in for a distributed key generation).
- Randomized hybrid encryption: ephemeral r, R = r*G, keystream derived from
  r*ek, body = plaintext XOR keystream.
- Salted commitments for the vote-claim mode.
"""

import hmac
import json
import logging
import random
from itertools import combinations
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Optional, Sequence

from construct import Bytes, ConstructError, GreedyBytes, Int32ub, Prefixed, Struct, Terminated

from src.crypto.curve import EllipticCurve, Point
from src.errors import ThresholdError, ValidationError
from utils.common_utils import DIGEST_SIZE, digest, from_hex, system_rng

logger = logging.getLogger(__name__)

SALT_SIZE = 32


@dataclass(frozen=True)
class EncryptionKeyPair:
    dk: int
    ek: Point


@dataclass(frozen=True)
class SecretShare:
    index: int
    value: int

    def to_dict(self, curve: EllipticCurve) -> dict:
        return {"index": self.index, "value": curve.scalar_to_bytes(self.value).hex()}

    @classmethod
    def from_dict(cls, data: dict) -> "SecretShare":
        try:
            return cls(index=int(data["index"]), value=int.from_bytes(from_hex(data["value"]), "big"))
        except (KeyError, TypeError) as e:
            raise ValidationError(f"Malformed share record: {data!r}") from e

    def save(self, curve: EllipticCurve, path: Path):
        path.write_text(json.dumps(self.to_dict(curve)))

    @classmethod
    def load(cls, path: Path) -> "SecretShare":
        return cls.from_dict(json.loads(path.read_text()))


@dataclass(frozen=True)
class BallotCiphertext:
    R: Point
    body: bytes


@dataclass(frozen=True)
class BallotCommitment:
    digest: bytes


def generate_encryption_key(curve: EllipticCurve, rng: Optional[random.Random] = None) -> EncryptionKeyPair:
    dk = curve.random_scalar(rng or system_rng())
    return EncryptionKeyPair(dk=dk, ek=curve.base_mul(dk))


def _check_threshold(k: int, n: int):
    if not 1 <= k <= n:
        raise ValidationError(f"Threshold must satisfy 1 <= K <= N, got K={k}, N={n}")


def share_key(
    curve: EllipticCurve,
    dk: int,
    k: int,
    n: int,
    rng: Optional[random.Random] = None,
) -> list[SecretShare]:
    """Split dk with a random degree-(K-1) polynomial f, f(0) = dk; share i is f(i)."""
    _check_threshold(k, n)
    rng = rng or system_rng()
    g = curve.order
    coeffs = [dk % g] + [rng.randrange(0, g) for _ in range(k - 1)]
    shares = []
    for x in range(1, n + 1):
        y = 0
        for coeff in reversed(coeffs):
            y = (y * x + coeff) % g
        shares.append(SecretShare(index=x, value=y))
    return shares


def reconstruct_key(curve: EllipticCurve, shares: Sequence[SecretShare], k: int) -> int:
    """Lagrange interpolation at 0 over the scalar field, using the first K shares."""
    indices = [share.index for share in shares]
    if len(set(indices)) != len(indices):
        raise ValidationError(f"Duplicate share indices: {sorted(indices)}")
    if len(shares) < k:
        raise ThresholdError(f"Need {k} shares to reconstruct, got {len(shares)}")
    g = curve.order
    if any(not 1 <= i < g for i in indices):
        raise ValidationError("Share index outside {1, ..., g-1}")
    chosen = list(shares)[:k]
    secret = 0
    for j, share_j in enumerate(chosen):
        num, den = 1, 1
        for m, share_m in enumerate(chosen):
            if m != j:
                num = (num * -share_m.index) % g
                den = (den * (share_j.index - share_m.index)) % g
        secret = (secret + share_j.value * num * pow(den, -1, g)) % g
    return secret


def _keystream(curve: EllipticCurve, shared: Point, length: int) -> bytes:
    seed = curve.serialize_point(shared)
    blocks = []
    for counter in range((length + DIGEST_SIZE - 1) // DIGEST_SIZE):
        blocks.append(digest(seed + counter.to_bytes(4, "big")))
    return b"".join(blocks)[:length]


def _xor(data: bytes, stream: bytes) -> bytes:
    return bytes(a ^ b for a, b in zip(data, stream))


def encrypt_ballot(
    curve: EllipticCurve,
    ek: Point,
    plaintext: bytes,
    rng: Optional[random.Random] = None,
) -> BallotCiphertext:
    curve.validate_point(ek)
    if curve.is_infinity(ek):
        raise ValidationError("Encryption key must not be the point at infinity")
    r = curve.random_scalar(rng or system_rng())
    shared = curve.scalar_mul(r, ek)
    return BallotCiphertext(R=curve.base_mul(r), body=_xor(plaintext, _keystream(curve, shared, len(plaintext))))


def decrypt_ballot(curve: EllipticCurve, dk: int, ct: BallotCiphertext) -> bytes:
    curve.validate_point(ct.R)
    shared = curve.scalar_mul(dk % curve.order, ct.R)
    return _xor(ct.body, _keystream(curve, shared, len(ct.body)))


@lru_cache(maxsize=None)
def _ciphertext_struct(point_size: int) -> Struct:
    return Struct(
        "R" / Bytes(point_size),
        "body" / Prefixed(Int32ub, GreedyBytes),
        Terminated,
    )


def ciphertext_to_bytes(curve: EllipticCurve, ct: BallotCiphertext) -> bytes:
    return _ciphertext_struct(curve.point_size).build(dict(R=curve.serialize_point(ct.R), body=ct.body))


def ciphertext_from_bytes(curve: EllipticCurve, data: bytes) -> BallotCiphertext:
    try:
        parsed = _ciphertext_struct(curve.point_size).parse(data)
    except ConstructError as e:
        raise ValidationError(f"Malformed ciphertext encoding: {e}") from e
    return BallotCiphertext(R=curve.deserialize_point(bytes(parsed.R)), body=bytes(parsed.body))


def commit_ballot(plaintext: bytes, salt: bytes) -> BallotCommitment:
    if len(salt) != SALT_SIZE:
        raise ValidationError(f"Salt must be {SALT_SIZE} bytes")
    return BallotCommitment(digest=digest(plaintext + salt))


def check_claim(commitment: BallotCommitment, plaintext: bytes, salt: bytes) -> bool:
    if len(salt) != SALT_SIZE:
        return False
    return hmac.compare_digest(digest(plaintext + salt), commitment.digest)


def share_digest(curve: EllipticCurve, share: SecretShare) -> bytes:
    """Commitment a manager publishes for its share before voting opens."""
    return digest(share.index.to_bytes(4, "big") + curve.scalar_to_bytes(share.value))


def consistent_subset(
    curve: EllipticCurve,
    shares: Iterable[SecretShare],
    k: int,
    ek: Point,
) -> Optional[int]:
    """Find a K-subset of shares whose reconstruction matches ek; None if none does."""
    expected = curve.serialize_point(ek)
    for subset in combinations(sorted(shares, key=lambda s: s.index), k):
        dk = reconstruct_key(curve, subset, k)
        if curve.serialize_point(curve.base_mul(dk)) == expected:
            return dk
    return None
