from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Mapping

from utils.common_utils import canonical_json, digest


@dataclass(frozen=True)
class ExecutionContext:
    """What a contract sees while executing one transaction or block hook."""
    height: int
    sender: bytes
    contracts: Mapping[str, "Contract"]

    def contract(self, name: str) -> "Contract":
        return self.contracts[name]


class Contract(ABC):
    """Abstract base class for on-ledger state machines."""

    name: str = ""
    # read-only methods the ledger may call on behalf of off-ledger actors
    VIEWS: frozenset = frozenset()

    @abstractmethod
    def execute(self, ctx: ExecutionContext, method: str, args: tuple[bytes, ...]) -> str:
        """Apply one method invocation.

        Args:
            ctx (ExecutionContext): Height, sender and sibling contracts
            method (str): Method name, e.g. "Vote"
            args (tuple[bytes, ...]): Canonically encoded arguments

        Returns:
            str: Outcome detail recorded in the block

        Raises:
            RevertError: The invocation is refused; state must be left untouched
        """
        pass

    def on_block(self, ctx: ExecutionContext) -> list[str]:
        """Height-driven hook run before the block's transactions; returns fired events."""
        return []

    @abstractmethod
    def snapshot(self) -> dict:
        """Full JSON-serializable state."""
        pass

    def fingerprint(self) -> bytes:
        """Digest of the state folded into each block's state digest."""
        return digest(canonical_json(self.snapshot()))

    @staticmethod
    def describe(method: str, args: tuple[bytes, ...], status: str, detail: str) -> list[dict]:
        """Decode one invocation for the audit log; batches may expand to several records."""
        return [{"method": method, "args": [a.hex() for a in args], "status": status, "detail": detail}]

