"""
Linkable ring signatures over an elliptic curve.

A signature carries the ring digest HPK(PK_n) instead of the ring itself: the
ring is frozen once registration closes and is passed to ``verify`` by
reference. Challenge inputs are ``m || T || A_i || B_i`` with every point in the
fixed-width uncompressed encoding and no delimiters.
"""

import logging
import random
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Iterable, Iterator, Optional

from construct import Bytes, BytesInteger, ConstructError, Int32ub, PrefixedArray, Struct, Terminated

from src.crypto.curve import EllipticCurve, Point
from src.errors import ValidationError
from utils.common_utils import DIGEST_SIZE, bytes_to_int, from_hex, int_to_bytes, system_rng

logger = logging.getLogger(__name__)

# ring digest + 4-byte ring size prefix, on top of the raw T || s_1..s_n || c accounting
FRAMING_OVERHEAD = DIGEST_SIZE + 4


@dataclass(frozen=True)
class KeyPair:
    sk: int
    pk: Point


def keygen(curve: EllipticCurve, rng: Optional[random.Random] = None) -> KeyPair:
    """Draw sk uniformly from {1, ..., g-1} and set pk = sk*G."""
    sk = curve.random_scalar(rng or system_rng())
    return KeyPair(sk=sk, pk=curve.base_mul(sk))


def hpk_step(curve: EllipticCurve, previous: Optional[int], encoded_pk: bytes) -> int:
    """One step of the cumulative key hash: H(pk_1) or H(HPK(PK_{i-1}) || pk_i)."""
    if previous is None:
        return curve.hash_scalar(encoded_pk)
    return curve.hash_scalar(curve.scalar_to_bytes(previous) + encoded_pk)


def hpk(curve: EllipticCurve, keys: Iterable[Point]) -> int:
    """HPK over a full key tuple, recomputed from scratch."""
    digest = None
    for pk in keys:
        digest = hpk_step(curve, digest, curve.serialize_point(pk))
    if digest is None:
        raise ValidationError("HPK is undefined for an empty ring")
    return digest


class PublicKeyRing:
    """Ordered public keys with an incrementally maintained HPK digest."""

    def __init__(self, curve: EllipticCurve, keys: Iterable[Point] = ()):
        self._curve = curve
        self._keys: list[Point] = []
        self._encoded: list[bytes] = []
        self._digest: Optional[int] = None
        self._linking_base: Optional[Point] = None
        for pk in keys:
            self.append(pk)

    def append(self, pk: Point):
        self._curve.validate_point(pk)
        if self._curve.is_infinity(pk):
            raise ValidationError("The point at infinity cannot join a ring")
        encoded = self._curve.serialize_point(pk)
        self._digest = hpk_step(self._curve, self._digest, encoded)
        self._keys.append(pk)
        self._encoded.append(encoded)
        self._linking_base = None

    @property
    def curve(self) -> EllipticCurve:
        return self._curve

    @property
    def keys(self) -> tuple[Point, ...]:
        return tuple(self._keys)

    @property
    def encoded_keys(self) -> tuple[bytes, ...]:
        return tuple(self._encoded)

    @property
    def digest(self) -> int:
        if self._digest is None:
            raise ValidationError("HPK is undefined for an empty ring")
        return self._digest

    @property
    def digest_bytes(self) -> bytes:
        return int_to_bytes(self.digest, DIGEST_SIZE)

    @property
    def linking_base(self) -> Point:
        """L = H2P(HPK(PK_n)), cached until the ring changes."""
        if self._linking_base is None:
            self._linking_base = self._curve.hash_to_point(self._curve.scalar_to_bytes(self.digest))
        return self._linking_base

    def index_of(self, pk: Point) -> int:
        encoded = self._curve.serialize_point(pk)
        try:
            return self._encoded.index(encoded)
        except ValueError:
            raise ValidationError("Public key is not a member of the ring") from None

    def snapshot(self) -> "PublicKeyRing":
        frozen = PublicKeyRing(self._curve)
        frozen._keys = list(self._keys)
        frozen._encoded = list(self._encoded)
        frozen._digest = self._digest
        frozen._linking_base = self._linking_base
        return frozen

    def to_dict(self) -> dict:
        return {"curve": self._curve.name, "keys": [k.hex() for k in self._encoded]}

    @classmethod
    def from_encoded(cls, curve: EllipticCurve, encoded: Iterable[bytes]) -> "PublicKeyRing":
        return cls(curve, (curve.deserialize_point(item) for item in encoded))

    @classmethod
    def from_dict(cls, curve: EllipticCurve, data: dict) -> "PublicKeyRing":
        return cls.from_encoded(curve, (from_hex(item) for item in data.get("keys", [])))

    def __len__(self) -> int:
        return len(self._keys)

    def __iter__(self) -> Iterator[Point]:
        return iter(self._keys)


@lru_cache(maxsize=None)
def _signature_struct(point_size: int, scalar_size: int) -> Struct:
    return Struct(
        "ring_digest" / Bytes(DIGEST_SIZE),
        "tag" / Bytes(point_size),
        "s" / PrefixedArray(Int32ub, BytesInteger(scalar_size)),
        "c" / BytesInteger(scalar_size),
        Terminated,
    )


@dataclass(frozen=True)
class RingSignature:
    """(HPK(PK_n), T, s_1..s_n, c); the tag is kept in its serialized form."""
    ring_digest: int
    tag: bytes
    s: tuple[int, ...]
    c: int

    @property
    def size(self) -> int:
        return len(self.s)

    def raw_size(self, curve: EllipticCurve) -> int:
        """Unframed size: |T| + n*|s_i| + |c|, i.e. 32(n+3) on a 256-bit curve."""
        return curve.point_size + (self.size + 1) * curve.scalar_size

    def to_bytes(self, curve: EllipticCurve) -> bytes:
        layout = _signature_struct(curve.point_size, curve.scalar_size)
        return layout.build(dict(
            ring_digest=int_to_bytes(self.ring_digest, DIGEST_SIZE),
            tag=self.tag,
            s=list(self.s),
            c=self.c,
        ))

    @classmethod
    def from_bytes(cls, curve: EllipticCurve, data: bytes) -> "RingSignature":
        layout = _signature_struct(curve.point_size, curve.scalar_size)
        try:
            parsed = layout.parse(data)
        except ConstructError as e:
            raise ValidationError(f"Malformed ring signature encoding: {e}") from e
        return cls(
            ring_digest=bytes_to_int(parsed.ring_digest),
            tag=bytes(parsed.tag),
            s=tuple(int(v) for v in parsed.s),
            c=int(parsed.c),
        )


def challenge(curve: EllipticCurve, message: bytes, tag: bytes, a: Point, b: Point) -> int:
    """c_i = H(m || T || A_i || B_i)."""
    return curve.hash_scalar(message + tag + curve.serialize_point(a) + curve.serialize_point(b))


def sign(
    curve: EllipticCurve,
    sk: int,
    signer_index: int,
    ring: PublicKeyRing,
    message: bytes,
    rng: Optional[random.Random] = None,
) -> RingSignature:
    """Ring-sign ``message`` as member ``signer_index`` (0-based) of ``ring``."""
    rng = rng or system_rng()
    n = len(ring)
    g = curve.order
    if not 0 <= signer_index < n:
        raise ValidationError(f"Signer index {signer_index} outside ring of size {n}")
    if not 1 <= sk < g:
        raise ValidationError("Secret key outside {1, ..., g-1}")
    keys = ring.keys
    if curve.serialize_point(curve.base_mul(sk)) != ring.encoded_keys[signer_index]:
        raise ValidationError(f"Secret key does not match ring member {signer_index}")

    G = curve.generator
    L = ring.linking_base
    T = L * sk
    tag = curve.serialize_point(T)

    c = [0] * n
    s = [0] * n
    u = curve.random_scalar(rng)
    s_start = curve.random_scalar(rng)
    c[signer_index] = challenge(
        curve, message, tag,
        curve.mul_add(s_start, G, u, keys[signer_index]),
        curve.mul_add(s_start, L, u, T),
    )
    for step in range(1, n):
        i = (signer_index + step) % n
        s[i] = curve.random_scalar(rng)
        # c[i - 1] wraps to c[n - 1] when i == 0
        c[i] = challenge(
            curve, message, tag,
            curve.mul_add(s[i], G, c[i - 1], keys[i]),
            curve.mul_add(s[i], L, c[i - 1], T),
        )
    s[signer_index] = (s_start + sk * (u - c[signer_index - 1])) % g
    return RingSignature(ring_digest=ring.digest, tag=tag, s=tuple(s), c=c[n - 1])


class VerifyStatus(str, Enum):
    VALID = "VALID"
    RING_MISMATCH = "RING_MISMATCH"
    MALFORMED = "MALFORMED"
    BAD_TAG = "BAD_TAG"
    SCALAR_OUT_OF_RANGE = "SCALAR_OUT_OF_RANGE"
    CHAIN_MISMATCH = "CHAIN_MISMATCH"


@dataclass(frozen=True)
class Verification:
    status: VerifyStatus
    chain: tuple[int, ...] = ()

    def __bool__(self) -> bool:
        return self.status is VerifyStatus.VALID


def check_signature(
    curve: EllipticCurve,
    ring: PublicKeyRing,
    message: bytes,
    sig: RingSignature,
) -> Verification:
    """Verify with a diagnostic; ``chain`` holds c_1..c_n when the chain was computed."""
    if sig.ring_digest != ring.digest:
        return Verification(VerifyStatus.RING_MISMATCH)
    if len(sig.s) != len(ring):
        return Verification(VerifyStatus.MALFORMED)
    try:
        T = curve.deserialize_point(sig.tag)
    except ValidationError:
        return Verification(VerifyStatus.BAD_TAG)
    if curve.is_infinity(T):
        return Verification(VerifyStatus.BAD_TAG)
    g = curve.order
    if not 0 <= sig.c < g or any(not 0 <= s_i < g for s_i in sig.s):
        return Verification(VerifyStatus.SCALAR_OUT_OF_RANGE)

    G = curve.generator
    L = ring.linking_base
    chain = []
    c_prev = sig.c
    for s_i, pk in zip(sig.s, ring.keys):
        c_prev = challenge(
            curve, message, sig.tag,
            curve.mul_add(s_i, G, c_prev, pk),
            curve.mul_add(s_i, L, c_prev, T),
        )
        chain.append(c_prev)
    status = VerifyStatus.VALID if c_prev == sig.c else VerifyStatus.CHAIN_MISMATCH
    return Verification(status, tuple(chain))


def verify(curve: EllipticCurve, ring: PublicKeyRing, message: bytes, sig: RingSignature) -> bool:
    return bool(check_signature(curve, ring, message, sig))


def link(sig1: RingSignature, sig2: RingSignature) -> bool:
    """True iff both signatures carry the same tag; both must refer to the same ring."""
    if sig1.ring_digest != sig2.ring_digest:
        raise ValidationError("Cannot link signatures issued over different rings")
    return sig1.tag == sig2.tag
