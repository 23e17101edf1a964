from abc import ABC, abstractmethod
from typing import Optional

from src.ledger.transaction import ExecutionOutcome, Transaction


class TransactionProvider(ABC):
    """Abstract base class for submitting transactions to the ledger."""

    @abstractmethod
    def submit(self, tx: Transaction) -> bytes:
        """Queue a transaction.

        Args:
            tx (Transaction): Transaction to submit

        Returns:
            bytes: 32-byte receipt (digest of the canonical encoding)
        """
        pass

    @abstractmethod
    def confirm_transaction(self, receipt: bytes) -> Optional[ExecutionOutcome]:
        """Look up the execution outcome of a receipt.

        Args:
            receipt (bytes): Receipt returned by submit

        Returns:
            Optional[ExecutionOutcome]: Outcome once included in a block, None while pending
        """
        pass
