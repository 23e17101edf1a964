import json
import random
import hashlib
import logging
from typing import Any

from src.errors import ValidationError

# Configure logging
logger = logging.getLogger(__name__)

# Fixed at build time; golden files record it.
HASH_NAME = "sha256"
DIGEST_SIZE = 32


def digest(data: bytes) -> bytes:
    """Single digest primitive used for scalars, points, labels, commitments and blocks."""
    return hashlib.new(HASH_NAME, data).digest()


def canonical_json(value: Any) -> bytes:
    """Deterministic JSON encoding (sorted keys, no whitespace)."""
    return json.dumps(value, sort_keys=True, separators=(",", ":")).encode()


def int_to_bytes(value: int, width: int) -> bytes:
    return value.to_bytes(width, "big")


def bytes_to_int(data: bytes) -> int:
    return int.from_bytes(data, "big")


def parse_int(value: str | int) -> int:
    """Parse a decimal or 0x-hex parameter string."""
    if isinstance(value, int):
        return value
    try:
        text = value.strip().lower()
        return int(text, 16) if text.startswith("0x") else int(text, 10)
    except (AttributeError, ValueError) as e:
        raise ValidationError(f"Not a decimal or 0x-hex integer: {value!r}") from e


def from_hex(text: str) -> bytes:
    try:
        cleaned = text.strip()
        if cleaned.startswith("0x"):
            cleaned = cleaned[2:]
        return bytes.fromhex(cleaned)
    except (AttributeError, ValueError) as e:
        raise ValidationError(f"Invalid hex string: {text!r}") from e


def derive_rng(seed: int, label: str) -> random.Random:
    """Derive an independent, reproducible generator for one actor of a seeded run."""
    material = digest(f"{seed}:{label}".encode())
    return random.Random(bytes_to_int(material))


def system_rng() -> random.Random:
    return random.SystemRandom()
