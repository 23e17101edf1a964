import logging
from enum import Enum
from typing import Iterable, Optional

from src.contracts.codec import decode_index, expect_args
from src.crypto.confidentiality import SecretShare, consistent_subset, share_digest
from src.crypto.curve import EllipticCurve, Point
from src.errors import RevertCode, RevertError, ValidationError
from src.interfaces.contract import Contract, ExecutionContext

# Configure logging
logger = logging.getLogger(__name__)

CONF_MANAGER = "ConfManager"


class KeyStatus(str, Enum):
    DISABLED = "DISABLED"
    IDLE = "IDLE"
    KEY_PUBLISHED = "KEY_PUBLISHED"
    DECRYPTABLE = "DECRYPTABLE"
    CORRUPT_SHARES = "CORRUPT_SHARES"
    UNDECRYPTABLE = "UNDECRYPTABLE"


class ConfManager(Contract):
    """
    Lifecycle of the ballot encryption key.

    Managers commit to their share and publish ek before voting opens; after
    voting closes they reveal shares, and once K_e of them interpolate to a key
    matching ek the decryption key becomes public state. Share index i belongs
    to the i-th configured manager.
    """

    name = CONF_MANAGER
    VIEWS = frozenset({"ek", "dk", "status", "revealed", "commitments"})

    def __init__(self, curve: EllipticCurve, managers: Iterable[bytes]):
        self._curve = curve
        self._managers = tuple(managers)
        self._k_e: Optional[int] = None
        self._enabled = False
        self._sealed = False
        self._commitments: dict[int, bytes] = {}
        self._publishers: list[bytes] = []
        self._ek: Optional[Point] = None
        self._ek_bytes: Optional[bytes] = None
        self._revealed: dict[int, int] = {}
        self._dk: Optional[int] = None

    # Hooks used by the ballot box

    @property
    def manager_count(self) -> int:
        return len(self._managers)

    def configure(self, k_e: int, n_e: int, enabled: bool):
        if not enabled:
            self._enabled = False
            self._k_e = None
            return
        if n_e != len(self._managers):
            raise RevertError(RevertCode.BAD_ARGS, f"N_e={n_e} but {len(self._managers)} managers are deployed")
        if not 1 <= k_e <= n_e:
            raise RevertError(RevertCode.BAD_ARGS, f"K_e={k_e} outside 1..{n_e}")
        self._k_e = k_e
        self._enabled = True

    def seal(self):
        """Tally window over; without a key by now the session stays undecryptable."""
        self._sealed = True
        if self._enabled and self._dk is None:
            logger.warning(f"Tally window closed with {len(self._revealed)}/{self._k_e} usable shares: undecryptable")

    # Transactions

    def execute(self, ctx: ExecutionContext, method: str, args: tuple[bytes, ...]) -> str:
        if not self._enabled:
            raise RevertError(RevertCode.WRONG_PHASE, "Threshold confidentiality is not enabled for this session")
        box = ctx.contract("BallotBox")
        if method == "CommitShare":
            expect_args(method, args, 2)
            return self._commit_share(ctx.sender, decode_index(args[0]), args[1], box)
        if method == "PublishKey":
            expect_args(method, args, 1)
            return self._publish_key(ctx.sender, args[0], box)
        if method == "RevealShare":
            expect_args(method, args, 2)
            return self._reveal_share(ctx.sender, decode_index(args[0]), args[1], box)
        raise RevertError(RevertCode.UNKNOWN_METHOD, f"{self.name} has no method {method!r}")

    def _check_holder(self, sender: bytes, index: int):
        if not 1 <= index <= len(self._managers) or self._managers[index - 1] != sender:
            raise RevertError(RevertCode.UNAUTHORIZED, f"Sender does not hold share {index}")

    def _commit_share(self, sender: bytes, index: int, commitment: bytes, box) -> str:
        self._check_holder(sender, index)
        if box.is_opened():
            raise RevertError(RevertCode.WRONG_PHASE, "Share commitments close when voting opens")
        if len(commitment) != 32:
            raise RevertError(RevertCode.BAD_ARGS, "Share commitment must be 32 bytes")
        if index in self._commitments:
            raise RevertError(RevertCode.DUPLICATE, f"Share {index} already committed")
        self._commitments[index] = commitment
        return f"COMMITTED {len(self._commitments)}/{len(self._managers)}"

    def _publish_key(self, sender: bytes, encoded_ek: bytes, box) -> str:
        if sender not in self._managers:
            raise RevertError(RevertCode.UNAUTHORIZED, "Only confidentiality managers publish the key")
        if box.is_opened():
            raise RevertError(RevertCode.WRONG_PHASE, "The key must be published before voting opens")
        if self._managers.index(sender) + 1 not in self._commitments:
            raise RevertError(RevertCode.WRONG_PHASE, "Commit to the share before publishing the key")
        if sender in self._publishers:
            raise RevertError(RevertCode.DUPLICATE, "Manager already published the key")
        try:
            ek = self._curve.deserialize_point(encoded_ek)
        except ValidationError as e:
            raise RevertError(RevertCode.BAD_ARGS, str(e)) from e
        if self._curve.is_infinity(ek):
            raise RevertError(RevertCode.BAD_ARGS, "Encryption key must not be the point at infinity")
        if self._ek_bytes is not None and self._ek_bytes != encoded_ek:
            raise RevertError(RevertCode.KEY_MISMATCH, "Published key differs from the one already on record")
        if self._ek_bytes is None:
            self._ek, self._ek_bytes = ek, encoded_ek
        self._publishers.append(sender)
        return f"PUBLISHED {len(self._publishers)}/{len(self._managers)}"

    def _reveal_share(self, sender: bytes, index: int, encoded_value: bytes, box) -> str:
        self._check_holder(sender, index)
        if not box.is_closed():
            raise RevertError(RevertCode.EARLY_DISCLOSURE, "Shares may only be revealed after voting closes")
        if self._sealed:
            raise RevertError(RevertCode.WRONG_PHASE, "Tally window is over")
        if self._ek is None:
            raise RevertError(RevertCode.WRONG_PHASE, "No encryption key was ever published")
        if len(encoded_value) != self._curve.scalar_size:
            raise RevertError(RevertCode.BAD_ARGS, f"Share value must be {self._curve.scalar_size} bytes")
        if index in self._revealed:
            raise RevertError(RevertCode.DUPLICATE, f"Share {index} already revealed")

        value = int.from_bytes(encoded_value, "big")
        if value >= self._curve.order:
            raise RevertError(RevertCode.BAD_ARGS, "Share value must be below the group order")
        share = SecretShare(index=index, value=value)
        self._revealed[index] = share.value
        matches = self._commitments.get(index) == share_digest(self._curve, share)
        detail = "MATCHES_COMMITMENT" if matches else "COMMITMENT_MISMATCH"
        if self._dk is None and len(self._revealed) >= self._k_e:
            self._dk = consistent_subset(self._curve, self.shares(), self._k_e, self._ek)
            if self._dk is None:
                logger.warning(f"{len(self._revealed)} revealed shares contain no subset consistent with ek")
            else:
                logger.info(f"Decryption key reconstructed from {len(self._revealed)} revealed shares")
        return detail

    # Views

    def shares(self) -> list[SecretShare]:
        return [SecretShare(index=i, value=v) for i, v in sorted(self._revealed.items())]

    def ek(self) -> Optional[Point]:
        return self._ek

    def dk(self) -> Optional[int]:
        return self._dk

    def revealed(self) -> dict[int, int]:
        return dict(self._revealed)

    def commitments(self) -> dict[int, bytes]:
        return dict(self._commitments)

    def status(self) -> KeyStatus:
        if not self._enabled:
            return KeyStatus.DISABLED
        if self._dk is not None:
            return KeyStatus.DECRYPTABLE
        if self._sealed:
            return KeyStatus.UNDECRYPTABLE
        if len(self._revealed) >= self._k_e:
            return KeyStatus.CORRUPT_SHARES
        if self._ek is not None:
            return KeyStatus.KEY_PUBLISHED
        return KeyStatus.IDLE

    # State

    def snapshot(self) -> dict:
        return {
            "status": self.status().value,
            "k_e": self._k_e,
            "managers": [m.hex() for m in self._managers],
            "commitments": {str(i): c.hex() for i, c in sorted(self._commitments.items())},
            "publishers": [m.hex() for m in self._publishers],
            "ek": self._ek_bytes.hex() if self._ek_bytes else None,
            "revealed": {str(i): self._curve.scalar_to_bytes(v).hex() for i, v in sorted(self._revealed.items())},
            "dk": self._curve.scalar_to_bytes(self._dk).hex() if self._dk is not None else None,
            "sealed": self._sealed,
        }

    @staticmethod
    def describe(method: str, args: tuple[bytes, ...], status: str, detail: str) -> list[dict]:
        record = {"method": method, "status": status, "detail": detail}
        if method in ("CommitShare", "RevealShare") and len(args) == 2 and len(args[0]) == 4:
            field = "commitment" if method == "CommitShare" else "value"
            record.update({"index": int.from_bytes(args[0], "big"), field: args[1].hex()})
            return [record]
        if method == "PublishKey" and len(args) == 1:
            record["ek"] = args[0].hex()
            return [record]
        return Contract.describe(method, args, status, detail)
