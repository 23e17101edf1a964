import logging
from typing import Optional

from ..interfaces.transaction_provider import TransactionProvider
from ..ledger.transaction import ExecutionOutcome, Transaction
from .ledger_provider import LedgerProvider

logger = logging.getLogger(__name__)


class LedgerTransactionProvider(TransactionProvider):
    """Identified submitter used by managers and the organizer."""

    def __init__(self, account: bytes, ledger_provider: Optional[LedgerProvider] = None):
        """Initialize LedgerTransactionProvider.

        Args:
            account (bytes): 32-byte account id every transaction is sent from
            ledger_provider (Optional[LedgerProvider]): Ledger provider instance.
                If None, uses default provider.
        """
        self._provider = ledger_provider or LedgerProvider.get_instance()
        self._account = account
        logger.debug(f"Initialized LedgerTransactionProvider for {account.hex()[:16]}")

    @property
    def account(self) -> bytes:
        return self._account

    def call(self, target: str, method: str, *args: bytes) -> bytes:
        """Send ``target.method(*args)`` from this account with its next nonce.

        Returns:
            bytes: Receipt of the queued transaction
        """
        return self._provider.ledger.call(self._account, target, method, args)

    def submit(self, tx: Transaction) -> bytes:
        if tx.sender != self._account:
            tx = Transaction(self._account, tx.target, tx.method, tx.args, tx.nonce)
        return self._provider.ledger.submit(tx)

    def confirm_transaction(self, receipt: bytes) -> Optional[ExecutionOutcome]:
        """Look up the execution outcome of a receipt.

        Args:
            receipt (bytes): Receipt returned by submit or call

        Returns:
            Optional[ExecutionOutcome]: Outcome once included in a block, None while pending
        """
        outcome = self._provider.ledger.outcome(receipt)
        if outcome is None:
            logger.debug(f"Transaction {receipt.hex()[:16]} not included yet")
        elif not outcome.ok:
            logger.warning(f"Transaction {receipt.hex()[:16]} reverted: {outcome.status} {outcome.detail}")
        return outcome
