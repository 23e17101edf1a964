import json
import logging
from pathlib import Path
from typing import Iterable, Optional

from src.contracts.codec import expect_args
from src.crypto.curve import EllipticCurve
from src.crypto.lsag import PublicKeyRing
from src.errors import RevertCode, RevertError, ValidationError
from src.interfaces.contract import Contract, ExecutionContext
from utils.common_utils import from_hex

# Configure logging
logger = logging.getLogger(__name__)

ID_STORAGE = "IDStorage"
LABEL_SIZE = 32


class IDStorage(Contract):
    """
    Voter roster: (pk, label) entries endorsed by K_i of the N_i identity managers.

    Entries are append-only and committed only once enough distinct managers
    endorsed the same (pk, label) pair. Registration closes for good when the
    ballot box opens and freezes the ring.
    """

    name = ID_STORAGE
    VIEWS = frozenset({"ring", "entries", "is_registered", "is_closed", "endorsements"})

    def __init__(self, curve: EllipticCurve, managers: Iterable[bytes], roster: Iterable[tuple[bytes, bytes]] = ()):
        self._curve = curve
        self._managers = tuple(managers)
        self._k_i: Optional[int] = None
        self._closed = False
        self._ring = PublicKeyRing(curve)
        self._entries: list[tuple[bytes, bytes]] = []
        self._keys: set[bytes] = set()
        self._labels: set[bytes] = set()
        self._pending: dict[tuple[bytes, bytes], list[bytes]] = {}
        for pk, label in roster:
            self._commit(pk, label)
        if self._entries:
            logger.info(f"ID Storage preloaded with {len(self._entries)} registered voters")

    # Hooks used by the ballot box

    @property
    def manager_count(self) -> int:
        return len(self._managers)

    def configure(self, k_i: int):
        if not 1 <= k_i <= len(self._managers):
            raise RevertError(RevertCode.BAD_ARGS, f"K_i={k_i} outside 1..{len(self._managers)}")
        self._k_i = k_i

    def freeze(self) -> PublicKeyRing:
        """Close registration and hand out the final ring."""
        self._closed = True
        self._pending.clear()
        logger.info(f"Registration closed with {len(self._ring)} voters")
        return self._ring.snapshot()

    # Transactions

    def execute(self, ctx: ExecutionContext, method: str, args: tuple[bytes, ...]) -> str:
        if method != "SignUp":
            raise RevertError(RevertCode.UNKNOWN_METHOD, f"{self.name} has no method {method!r}")
        expect_args(method, args, 2)
        return self._sign_up(ctx.sender, args[0], args[1])

    def _sign_up(self, manager: bytes, encoded_pk: bytes, label: bytes) -> str:
        if self._k_i is None:
            raise RevertError(RevertCode.NOT_CONFIGURED, "Session has not been set up")
        if manager not in self._managers:
            raise RevertError(RevertCode.UNAUTHORIZED, "Only identity managers may sign voters up")
        if self._closed:
            raise RevertError(RevertCode.REGISTRATION_CLOSED, "Registration ended when voting opened")
        if len(label) != LABEL_SIZE:
            raise RevertError(RevertCode.BAD_ARGS, f"Label must be {LABEL_SIZE} bytes")
        try:
            pk = self._curve.deserialize_point(encoded_pk)
        except ValidationError as e:
            raise RevertError(RevertCode.BAD_ARGS, str(e)) from e
        if self._curve.is_infinity(pk):
            raise RevertError(RevertCode.BAD_ARGS, "The point at infinity cannot register")
        if encoded_pk in self._keys or label in self._labels:
            raise RevertError(RevertCode.DUPLICATE, "Public key or label already registered")

        endorsers = self._pending.setdefault((encoded_pk, label), [])
        if manager in endorsers:
            raise RevertError(RevertCode.DUPLICATE_ENDORSEMENT, "Manager already endorsed this entry")
        endorsers.append(manager)
        if len(endorsers) < self._k_i:
            return f"PENDING {len(endorsers)}/{self._k_i}"
        del self._pending[(encoded_pk, label)]
        self._commit(encoded_pk, label)
        return f"COMMITTED {len(self._entries) - 1}"

    def _commit(self, encoded_pk: bytes, label: bytes):
        if encoded_pk in self._keys or label in self._labels:
            raise ValidationError("Roster holds a duplicate public key or label")
        self._ring.append(self._curve.deserialize_point(encoded_pk))
        self._entries.append((encoded_pk, label))
        self._keys.add(encoded_pk)
        self._labels.add(label)

    # Views

    def ring(self) -> PublicKeyRing:
        return self._ring.snapshot()

    def entries(self) -> list[tuple[bytes, bytes]]:
        return list(self._entries)

    def is_registered(self, encoded_pk: bytes) -> bool:
        return encoded_pk in self._keys

    def is_closed(self) -> bool:
        return self._closed

    def endorsements(self, encoded_pk: bytes, label: bytes) -> int:
        if self.is_registered(encoded_pk):
            return self._k_i or 0
        return len(self._pending.get((encoded_pk, label), ()))

    # State

    def snapshot(self) -> dict:
        return {
            "k_i": self._k_i,
            "managers": [m.hex() for m in self._managers],
            "closed": self._closed,
            "entries": [{"pk": pk.hex(), "label": label.hex()} for pk, label in self._entries],
            "pending": [
                {"pk": pk.hex(), "label": label.hex(), "endorsers": [m.hex() for m in endorsers]}
                for (pk, label), endorsers in self._pending.items()
            ],
            "ring_digest": self._ring.digest_bytes.hex() if len(self._ring) else None,
        }

    @staticmethod
    def describe(method: str, args: tuple[bytes, ...], status: str, detail: str) -> list[dict]:
        if method == "SignUp" and len(args) == 2:
            return [{"method": method, "pk": args[0].hex(), "label": args[1].hex(), "status": status, "detail": detail}]
        return Contract.describe(method, args, status, detail)


def save_roster(entries: Iterable[tuple[bytes, bytes]], path: Path):
    """Write committed registrations so a later session can start from them."""
    records = [{"pk": pk.hex(), "label": label.hex()} for pk, label in entries]
    Path(path).write_text(json.dumps({"entries": records}, indent=2))
    logger.info(f"Saved roster of {len(records)} voters to {path}")


def load_roster(path: Path) -> list[tuple[bytes, bytes]]:
    try:
        data = json.loads(Path(path).read_text())
        return [(from_hex(e["pk"]), from_hex(e["label"])) for e in data["entries"]]
    except (json.JSONDecodeError, KeyError, TypeError) as e:
        raise ValidationError(f"Malformed roster file {path}: {e}") from e
