import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

from construct import (
    Bytes,
    ConstructError,
    GreedyBytes,
    Int32ub,
    Int64ub,
    PascalString,
    Prefixed,
    PrefixedArray,
    Struct,
    Terminated,
)

from src.errors import IntegrityError, ValidationError
from utils.common_utils import DIGEST_SIZE, canonical_json, digest, from_hex

# Configure logging
logger = logging.getLogger(__name__)

# Sender of transactions relayed by the anonymization proxy
ANONYMOUS = bytes(32)
ZERO_DIGEST = bytes(DIGEST_SIZE)

TransactionLayout = Struct(
    "sender" / Bytes(32),
    "target" / PascalString(Int32ub, "utf8"),
    "method" / PascalString(Int32ub, "utf8"),
    "args" / PrefixedArray(Int32ub, Prefixed(Int32ub, GreedyBytes)),
    "nonce" / Int64ub,
    Terminated,
)


def account_id(name: str) -> bytes:
    """32-byte account identifier for a named actor."""
    return digest(b"account:" + name.encode())


@dataclass(frozen=True)
class Transaction:
    sender: bytes
    target: str
    method: str
    args: tuple[bytes, ...] = ()
    nonce: int = 0

    def __post_init__(self):
        if len(self.sender) != 32:
            raise ValidationError("Transaction sender must be a 32-byte account id")
        if not self.target or not self.method:
            raise ValidationError("Transaction target and method must be non-empty")
        if not 0 <= self.nonce < 2 ** 64:
            raise ValidationError("Transaction nonce out of range")
        object.__setattr__(self, "args", tuple(bytes(a) for a in self.args))

    @property
    def anonymous(self) -> bool:
        return self.sender == ANONYMOUS

    def encode(self) -> bytes:
        """Canonical encoding: length-prefixed fields, big-endian lengths."""
        return TransactionLayout.build(dict(
            sender=self.sender,
            target=self.target,
            method=self.method,
            args=list(self.args),
            nonce=self.nonce,
        ))

    @classmethod
    def decode(cls, data: bytes) -> "Transaction":
        try:
            parsed = TransactionLayout.parse(data)
        except (ConstructError, UnicodeDecodeError) as e:
            raise ValidationError(f"Malformed transaction encoding: {e}") from e
        return cls(
            sender=bytes(parsed.sender),
            target=parsed.target,
            method=parsed.method,
            args=tuple(bytes(a) for a in parsed.args),
            nonce=int(parsed.nonce),
        )

    @cached_property
    def receipt(self) -> bytes:
        return digest(self.encode())


@dataclass(frozen=True)
class ExecutionOutcome:
    receipt: bytes
    height: int
    status: str
    detail: str = ""

    @property
    def ok(self) -> bool:
        return self.status == "OK"

    def to_dict(self) -> dict:
        return {"receipt": self.receipt.hex(), "height": self.height, "status": self.status, "detail": self.detail}

    @classmethod
    def from_dict(cls, data: dict) -> "ExecutionOutcome":
        return cls(from_hex(data["receipt"]), int(data["height"]), data["status"], data.get("detail", ""))


@dataclass(frozen=True)
class Block:
    height: int
    parent_digest: bytes
    transactions: tuple[Transaction, ...]
    outcomes: tuple[ExecutionOutcome, ...]
    events: tuple[str, ...]
    state_digest: bytes
    genesis: Optional[dict] = field(default=None)

    def header(self) -> dict:
        return {
            "height": self.height,
            "parent": self.parent_digest.hex(),
            "txs": [tx.receipt.hex() for tx in self.transactions],
            "outcomes": [o.to_dict() for o in self.outcomes],
            "events": list(self.events),
            "state": self.state_digest.hex(),
            "genesis": self.genesis,
        }

    @cached_property
    def digest(self) -> bytes:
        return digest(canonical_json(self.header()))

    def to_dict(self) -> dict:
        record = self.header()
        record["txs"] = [tx.encode().hex() for tx in self.transactions]
        record["digest"] = self.digest.hex()
        return record

    @classmethod
    def from_dict(cls, data: dict) -> "Block":
        try:
            block = cls(
                height=int(data["height"]),
                parent_digest=from_hex(data["parent"]),
                transactions=tuple(Transaction.decode(from_hex(tx)) for tx in data["txs"]),
                outcomes=tuple(ExecutionOutcome.from_dict(o) for o in data["outcomes"]),
                events=tuple(data["events"]),
                state_digest=from_hex(data["state"]),
                genesis=data.get("genesis"),
            )
        except (KeyError, TypeError, ValidationError) as e:
            raise IntegrityError(f"Undecodable block record: {e}") from e
        if block.digest.hex() != data.get("digest"):
            raise IntegrityError(f"Block {block.height} digest does not match its contents")
        return block
