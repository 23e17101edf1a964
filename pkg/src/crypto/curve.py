"""
Short-Weierstrass curve group and the two public hash functions.

Arithmetic is delegated to ``ecdsa.ellipticcurve`` (Jacobian coordinates).
Points are ``PointJacobi`` instances or ``ecdsa.ellipticcurve.INFINITY``;
scalars are plain ints in ``{0, ..., g-1}``.

No constant-time guarantee is made: timing hardening is best effort only,
inherited from whatever ``ecdsa`` provides.
"""

import json
import logging
import random
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Optional, Union

from ecdsa import numbertheory
from ecdsa.ellipticcurve import INFINITY, CurveFp, PointJacobi
from ecdsa.ellipticcurve import Point as AffinePoint

from config import config
from src.errors import CurveError, ValidationError
from utils.common_utils import bytes_to_int, digest, int_to_bytes, parse_int

logger = logging.getLogger(__name__)

Point = Union[PointJacobi, AffinePoint]

BUILTIN_CURVES = ("secp256k1", "toy")


@dataclass(frozen=True)
class CurveParams:
    """The public group: field prime, coefficients, generator and its prime order."""
    name: str
    p: int
    a: int
    b: int
    gx: int
    gy: int
    g: int
    cofactor: int = 1

    def __post_init__(self):
        if self.p <= 3 or not numbertheory.is_prime(self.p):
            raise ValidationError(f"Field size {self.p} is not a prime > 3")
        if self.g <= 2 or not numbertheory.is_prime(self.g):
            raise ValidationError(f"Group order {self.g} is not prime")
        if (4 * self.a ** 3 + 27 * self.b ** 2) % self.p == 0:
            raise ValidationError("Singular curve: 4a^3 + 27b^2 = 0 (mod p)")
        if (self.gy ** 2 - (self.gx ** 3 + self.a * self.gx + self.b)) % self.p != 0:
            raise ValidationError("Generator does not satisfy the curve equation")
        if self.cofactor < 1:
            raise ValidationError("Cofactor must be positive")

    @classmethod
    def from_dict(cls, data: dict, name: Optional[str] = None) -> "CurveParams":
        try:
            return cls(
                name=name or data.get("name", "custom"),
                p=parse_int(data["p"]),
                a=parse_int(data["a"]) % parse_int(data["p"]),
                b=parse_int(data["b"]) % parse_int(data["p"]),
                gx=parse_int(data["Gx"]),
                gy=parse_int(data["Gy"]),
                g=parse_int(data["g"]),
                cofactor=parse_int(data.get("cofactor", "1")),
            )
        except KeyError as e:
            raise ValidationError(f"Curve parameter file is missing field {e}") from e

    @classmethod
    def from_file(cls, path: Path) -> "CurveParams":
        if not path.exists():
            raise ValidationError(f"Curve parameter file not found: {path}")
        with open(path) as f:
            try:
                data = json.load(f)
            except json.JSONDecodeError as e:
                raise ValidationError(f"Curve parameter file {path} is not JSON: {e}") from e
        return cls.from_dict(data, name=data.get("name", path.stem))

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "p": hex(self.p),
            "a": hex(self.a),
            "b": hex(self.b),
            "Gx": hex(self.gx),
            "Gy": hex(self.gy),
            "g": hex(self.g),
            "cofactor": str(self.cofactor),
        }


class EllipticCurve:
    """Group operations, hashing and point codec over one CurveParams."""

    def __init__(self, params: CurveParams, h2p_max_attempts: Optional[int] = None):
        self.params = params
        self.curve = CurveFp(params.p, params.a, params.b, params.cofactor)
        self.generator = PointJacobi(self.curve, params.gx, params.gy, 1, params.g, generator=True)
        if not self.is_infinity(self.generator * params.g):
            raise ValidationError(f"g*G is not the identity on curve {params.name}")

        self.coord_size = (params.p.bit_length() + 7) // 8
        self.point_size = 2 * self.coord_size
        self.scalar_size = (params.g.bit_length() + 7) // 8
        self._h2p_max_attempts = h2p_max_attempts or config.H2P_MAX_ATTEMPTS
        logger.debug(f"Loaded curve {params.name}: {params.p.bit_length()}-bit field, "
                     f"point width {self.point_size} bytes")

    @property
    def name(self) -> str:
        return self.params.name

    @property
    def order(self) -> int:
        return self.params.g

    # Points

    @staticmethod
    def is_infinity(point: Point) -> bool:
        return point is INFINITY or point == INFINITY

    def is_on_curve(self, point: Point) -> bool:
        if self.is_infinity(point):
            return True
        if not isinstance(point, (PointJacobi, AffinePoint)) or point.curve() != self.curve:
            return False
        affine = point.to_affine() if isinstance(point, PointJacobi) else point
        return self.curve.contains_point(affine.x(), affine.y())

    def validate_point(self, point: Point) -> Point:
        if not self.is_on_curve(point):
            raise ValidationError(f"Point is not on curve {self.name}")
        return point

    def point(self, x: int, y: int) -> PointJacobi:
        """Build a validated point from affine coordinates."""
        if not (0 <= x < self.params.p and 0 <= y < self.params.p):
            raise ValidationError("Coordinates out of field range")
        if not self.curve.contains_point(x, y):
            raise ValidationError(f"({x}, {y}) is not on curve {self.name}")
        return PointJacobi(self.curve, x, y, 1, self.params.g)

    def affine(self, point: Point) -> Optional[tuple[int, int]]:
        """Affine coordinates, or None for the point at infinity."""
        if self.is_infinity(point):
            return None
        affine = point.to_affine() if isinstance(point, PointJacobi) else point
        return affine.x(), affine.y()

    def point_add(self, p: Point, q: Point) -> Point:
        self.validate_point(p)
        self.validate_point(q)
        if self.is_infinity(p):
            return q
        if self.is_infinity(q):
            return p
        return p + q

    def point_neg(self, p: Point) -> Point:
        self.validate_point(p)
        return p if self.is_infinity(p) else -p

    def scalar_mul(self, k: int, p: Point) -> Point:
        self.validate_point(p)
        if k < 0:
            raise ValidationError("Scalar must be non-negative")
        if k == 0 or self.is_infinity(p):
            return INFINITY
        return p * k

    def base_mul(self, k: int) -> Point:
        """k*G using the generator's precomputed table."""
        if k % self.params.g == 0:
            return INFINITY
        return self.generator * k

    def mul_add(self, a: int, p: Point, b: int, q: Point) -> Point:
        """a*P + b*Q for already validated points."""
        if self.is_infinity(p) or a % self.params.g == 0:
            return INFINITY if self.is_infinity(q) or b % self.params.g == 0 else q * b
        if self.is_infinity(q) or b % self.params.g == 0:
            return p * a
        return p.mul_add(a, q, b)

    # Scalars

    def random_scalar(self, rng: random.Random) -> int:
        """Uniform scalar in {1, ..., g-1}."""
        return rng.randrange(1, self.params.g)

    def scalar_to_bytes(self, k: int) -> bytes:
        return int_to_bytes(k % self.params.g, self.scalar_size)

    # Hashes

    def hash_scalar(self, data: bytes) -> int:
        """H: bytes -> {0, ..., g-1}; the digest is reduced mod the group order."""
        return bytes_to_int(digest(data)) % self.params.g

    def hash_to_point(self, data: bytes) -> PointJacobi:
        """H2P by try-and-increment: digest(data || counter) -> x, first x with a square rhs."""
        p, a, b = self.params.p, self.params.a, self.params.b
        for counter in range(self._h2p_max_attempts):
            x = bytes_to_int(digest(data + counter.to_bytes(4, "big"))) % p
            rhs = (x * x * x + a * x + b) % p
            if rhs == 0 or numbertheory.jacobi(rhs, p) != 1:
                continue
            y = numbertheory.square_root_mod_prime(rhs, p)
            if y & 1:
                y = p - y
            candidate = PointJacobi(self.curve, x, y, 1, self.params.g)
            if self.params.cofactor != 1:
                candidate = candidate * self.params.cofactor
                if self.is_infinity(candidate):
                    continue
            return candidate
        raise CurveError(f"hash_to_point found no point within {self._h2p_max_attempts} attempts")

    # Codec

    def serialize_point(self, point: Point) -> bytes:
        """Uncompressed fixed-width big-endian x||y; infinity is all zeros."""
        coords = self.affine(point)
        if coords is None:
            return bytes(self.point_size)
        x, y = coords
        return int_to_bytes(x, self.coord_size) + int_to_bytes(y, self.coord_size)

    def deserialize_point(self, data: bytes) -> Point:
        if len(data) != self.point_size:
            raise ValidationError(f"Point encoding must be {self.point_size} bytes, got {len(data)}")
        if data == bytes(self.point_size):
            return INFINITY
        x = bytes_to_int(data[:self.coord_size])
        y = bytes_to_int(data[self.coord_size:])
        point = self.point(x, y)
        if self.params.cofactor != 1 and not self.is_infinity(point * self.params.g):
            raise ValidationError("Point is outside the prime-order subgroup")
        return point


@lru_cache(maxsize=None)
def curve_for_params(params: CurveParams) -> EllipticCurve:
    return EllipticCurve(params)


def curve_from_dict(data: dict) -> EllipticCurve:
    """Curve recorded in a genesis or ring file; equal parameters share one instance."""
    return curve_for_params(CurveParams.from_dict(data))


@lru_cache(maxsize=None)
def load_curve(name_or_path: Optional[str] = None) -> EllipticCurve:
    """Load a built-in curve by name or any parameter file by path (cached)."""
    target = name_or_path or config.DEFAULT_CURVE
    if target in BUILTIN_CURVES:
        path = config.PARAMS_DIR / f"{target}.json"
    else:
        path = Path(target)
    return curve_for_params(CurveParams.from_file(path))


def toy_curve() -> EllipticCurve:
    return load_curve("toy")


def secp256k1_curve() -> EllipticCurve:
    return load_curve("secp256k1")
