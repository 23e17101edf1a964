from abc import ABC, abstractmethod


class IdentityVerifier(ABC):
    """Abstract base class for VerifyIdentity predicates of identity managers."""

    @abstractmethod
    def verify(self, id_data: bytes) -> bool:
        """Check a voter's identity evidence.

        Args:
            id_data (bytes): Opaque identity evidence, e.g. b"alice@example.org|<token>"

        Returns:
            bool: True if the evidence identifies an eligible voter
        """
        pass
