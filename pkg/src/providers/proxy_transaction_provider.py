import logging
import threading
from dataclasses import dataclass
from typing import Optional

from config import config
from ..errors import ValidationError
from ..interfaces.transaction_provider import TransactionProvider
from ..ledger.transaction import ANONYMOUS, ExecutionOutcome, Transaction
from .ledger_provider import LedgerProvider

logger = logging.getLogger(__name__)


@dataclass
class ProxyTicket:
    """Handle for one relayed ballot; ``receipt`` is set once its transaction is sent."""
    signature: bytes
    ballot: bytes
    receipt: Optional[bytes] = None
    position: int = 0


class AnonymizationProxy(TransactionProvider):
    """
    Relays transactions with the sender replaced by ANONYMOUS.

    Ballots are packed up to ``batch_size`` per transaction; with a batch size
    of 1 every ballot becomes its own ``Vote`` transaction.
    """

    def __init__(self, ledger_provider: Optional[LedgerProvider] = None, batch_size: Optional[int] = None):
        self._provider = ledger_provider or LedgerProvider.get_instance()
        self._batch_size = batch_size or config.PROXY_BATCH_SIZE
        if self._batch_size < 1:
            raise ValidationError("Proxy batch size must be at least 1")
        self._queue: list[ProxyTicket] = []
        self._lock = threading.Lock()
        logger.debug(f"Initialized AnonymizationProxy with batch size {self._batch_size}")

    @property
    def batch_size(self) -> int:
        return self._batch_size

    def relay(self, target: str, method: str, *args: bytes) -> bytes:
        return self._provider.ledger.call(ANONYMOUS, target, method, args)

    def submit(self, tx: Transaction) -> bytes:
        return self.relay(tx.target, tx.method, *tx.args)

    def cast(self, signature: bytes, ballot: bytes) -> ProxyTicket:
        """Queue a ballot; the batch is sent as soon as it is full."""
        ticket = ProxyTicket(signature=signature, ballot=ballot)
        with self._lock:
            self._queue.append(ticket)
            if len(self._queue) >= self._batch_size:
                self._send(self._queue)
                self._queue = []
        return ticket

    def flush(self) -> int:
        """Send any partially filled batch; returns the number of ballots sent."""
        with self._lock:
            pending, self._queue = self._queue, []
            if pending:
                self._send(pending)
        return len(pending)

    def _send(self, tickets: list[ProxyTicket]):
        if self._batch_size == 1:
            receipt = self.relay("BallotBox", "Vote", tickets[0].signature, tickets[0].ballot)
        else:
            args = [item for t in tickets for item in (t.signature, t.ballot)]
            receipt = self.relay("BallotBox", "VoteBatch", *args)
        for position, ticket in enumerate(tickets):
            ticket.receipt, ticket.position = receipt, position
        logger.debug(f"Relayed {len(tickets)} ballots as {receipt.hex()[:16]}")

    def confirm_transaction(self, receipt: bytes) -> Optional[ExecutionOutcome]:
        return self._provider.ledger.outcome(receipt)
