import logging
from typing import Iterable, Optional

from src.contracts.deployment import deploy_contracts
from src.errors import ValidationError
from src.ledger.ledger import Ledger
from src.ledger.transaction import Block

logger = logging.getLogger(__name__)


class LedgerProvider:
    """
    LedgerProvider class that owns the ledger every actor talks to.
    Follows the singleton pattern so all actors of a process share one chain;
    tests and session runs may still build private instances directly.
    """
    _instance = None

    @classmethod
    def get_instance(cls) -> "LedgerProvider":
        """
        Get the singleton instance of the LedgerProvider class.

        Returns:
            LedgerProvider: The singleton instance
        """
        if cls._instance is None:
            cls._instance = cls()
        return cls._instance

    @classmethod
    def reset_instance(cls):
        cls._instance = None

    def __init__(self, ledger: Optional[Ledger] = None):
        self._ledger = ledger

    def deploy(self, genesis: dict) -> Ledger:
        """
        Start a fresh chain with the three contracts deployed from ``genesis``.

        Returns:
            Ledger: The new ledger, now served by this provider
        """
        self._ledger = Ledger(genesis, deploy_contracts)
        return self._ledger

    def load(self, blocks: Iterable[Block]) -> Ledger:
        """Replay an exported chain and serve the rebuilt ledger."""
        self._ledger = Ledger.replay(blocks, deploy_contracts)
        return self._ledger

    @property
    def ledger(self) -> Ledger:
        """
        Get the served ledger.

        Returns:
            Ledger: The ledger

        Raises:
            ValidationError: Nothing has been deployed yet
        """
        if self._ledger is None:
            raise ValidationError("No ledger deployed; call deploy() or load() first")
        return self._ledger
