import logging
from typing import Optional

from src.contracts.codec import encode_index
from src.contracts.conf_manager import CONF_MANAGER
from src.crypto.confidentiality import SecretShare, share_digest
from src.crypto.curve import EllipticCurve, Point
from src.ledger.transaction import account_id
from src.metrics.phases import Phase, PhaseCounters
from src.providers.ledger_provider import LedgerProvider
from src.providers.ledger_transaction_provider import LedgerTransactionProvider

logger = logging.getLogger(__name__)


class KeyCustodian:
    """A confidentiality manager holding one share of the decryption key."""

    def __init__(
        self,
        name: str,
        share: SecretShare,
        curve: EllipticCurve,
        ledger_provider: Optional[LedgerProvider] = None,
        counters: Optional[PhaseCounters] = None,
    ):
        self.name = name
        self.account = account_id(f"conf-manager:{name}")
        self.share = share
        self._curve = curve
        self._provider = ledger_provider or LedgerProvider.get_instance()
        self._tx = LedgerTransactionProvider(self.account, self._provider)
        self._counters = counters or PhaseCounters()

    def commit_share(self) -> bytes:
        """First key round: bind the share on-ledger before anything is published."""
        return self._tx.call(
            CONF_MANAGER, "CommitShare", encode_index(self.share.index), share_digest(self._curve, self.share)
        )

    def publish_key(self, ek: Point) -> bytes:
        """Second key round: check every commitment is in, then publish ek."""
        commitments = self._provider.ledger.query(CONF_MANAGER, "commitments")
        self._counters.record_read(Phase.ENCRYPTION)
        if self.share.index not in commitments:
            logger.warning(f"{self.name} publishes before its own commitment landed")
        return self._tx.call(CONF_MANAGER, "PublishKey", self._curve.serialize_point(ek))

    def reveal_share(self, value: Optional[int] = None) -> bytes:
        """Reveal the share; ``value`` overrides it to simulate a corrupt manager."""
        revealed = self.share.value if value is None else value
        return self._tx.call(
            CONF_MANAGER, "RevealShare", encode_index(self.share.index), self._curve.scalar_to_bytes(revealed)
        )

    def confirm(self, receipt: bytes):
        return self._tx.confirm_transaction(receipt)
