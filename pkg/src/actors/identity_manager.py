import logging
from typing import Optional

from src.contracts.id_storage import ID_STORAGE
from src.crypto.curve import EllipticCurve, Point
from src.interfaces.identity_verifier import IdentityVerifier
from src.ledger.transaction import account_id
from src.providers.identity_verifiers import canonical_email
from src.providers.ledger_provider import LedgerProvider
from src.providers.ledger_transaction_provider import LedgerTransactionProvider
from utils.common_utils import digest

logger = logging.getLogger(__name__)


def label_from_id_data(id_data: bytes) -> bytes:
    """Public roster label: digest of the trimmed, lowercased email."""
    return digest(canonical_email(id_data).encode())


class IdentityManager:
    """Checks identity evidence with its own predicate and endorses the voter's key on ID Storage."""

    def __init__(
        self,
        name: str,
        verifier: IdentityVerifier,
        curve: EllipticCurve,
        ledger_provider: Optional[LedgerProvider] = None,
    ):
        self.name = name
        self.account = account_id(f"identity-manager:{name}")
        self._verifier = verifier
        self._curve = curve
        self._tx = LedgerTransactionProvider(self.account, ledger_provider)
        self.rejections: list[bytes] = []

    def handle(self, id_data: bytes, pk: Point) -> Optional[bytes]:
        """Endorse (pk, label) if the evidence verifies.

        Returns:
            Optional[bytes]: Receipt of the SignUp transaction, None when the evidence is rejected
        """
        if not self._verifier.verify(id_data):
            logger.warning(f"{self.name} rejected identity data {id_data[:48]!r}")
            self.rejections.append(id_data)
            return None
        label = label_from_id_data(id_data)
        receipt = self._tx.call(ID_STORAGE, "SignUp", self._curve.serialize_point(pk), label)
        logger.debug(f"{self.name} endorsed label {label.hex()[:16]}")
        return receipt

    def confirm(self, receipt: bytes):
        return self._tx.confirm_transaction(receipt)
