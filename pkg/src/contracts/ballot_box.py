import json
import logging
from dataclasses import asdict, dataclass
from enum import Enum
from typing import Any, Optional

from src.contracts.codec import decode_index, decode_json, decode_text, expect_args
from src.contracts.conf_manager import CONF_MANAGER
from src.contracts.id_storage import ID_STORAGE
from src.crypto.confidentiality import BallotCommitment, check_claim, ciphertext_from_bytes, SALT_SIZE
from src.crypto.curve import EllipticCurve
from src.crypto.lsag import PublicKeyRing, RingSignature, check_signature
from src.errors import RevertCode, RevertError, ValidationError
from src.interfaces.contract import Contract, ExecutionContext
from utils.common_utils import canonical_json, digest

# Configure logging
logger = logging.getLogger(__name__)

BALLOT_BOX = "BallotBox"
EVENTS = ("OPEN", "CLOSE", "TALLY_CLOSE")


class ConfidentialityMode(str, Enum):
    THRESHOLD = "THRESHOLD"
    VOTE_CLAIM = "VOTE_CLAIM"


class EventMode(str, Enum):
    HEIGHT = "HEIGHT"
    ORGANIZER = "ORGANIZER"


@dataclass(frozen=True)
class BoxConfig:
    """The on-ledger part of a session configuration, written once by Setup."""
    open_height: int
    close_height: int
    tally_close_height: int
    mode: ConfidentialityMode
    event_mode: EventMode
    choices: tuple[str, ...]
    overwrite: bool
    k_i: int
    k_e: int
    n_e: int

    @classmethod
    def from_dict(cls, data: dict) -> "BoxConfig":
        try:
            parsed = cls(
                open_height=int(data["open_height"]),
                close_height=int(data["close_height"]),
                tally_close_height=int(data["tally_close_height"]),
                mode=ConfidentialityMode(data["mode"]),
                event_mode=EventMode(data.get("event_mode", EventMode.HEIGHT.value)),
                choices=tuple(str(c) for c in data["choices"]),
                overwrite=bool(data["overwrite"]),
                k_i=int(data["k_i"]),
                k_e=int(data.get("k_e", 1)),
                n_e=int(data.get("n_e", 1)),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise RevertError(RevertCode.BAD_ARGS, f"Invalid session configuration: {e}") from e
        if not 0 < parsed.open_height < parsed.close_height < parsed.tally_close_height:
            raise RevertError(RevertCode.BAD_ARGS, "Heights must satisfy 0 < open < close < tally_close")
        if len(parsed.choices) < 1 or len(set(parsed.choices)) != len(parsed.choices):
            raise RevertError(RevertCode.BAD_ARGS, "Choices must be a non-empty list of distinct names")
        return parsed

    def height_of(self, event: str) -> int:
        return {"OPEN": self.open_height, "CLOSE": self.close_height, "TALLY_CLOSE": self.tally_close_height}[event]


@dataclass
class StoredBallot:
    ballot: bytes
    signature: bytes
    tag: bytes
    claim: Optional[tuple[bytes, bytes]] = None

    @property
    def digest(self) -> bytes:
        redeemed = b"" if self.claim is None else b"".join(self.claim)
        return digest(digest(self.ballot) + digest(self.signature) + digest(redeemed))

    def to_dict(self) -> dict:
        record = {"ballot": self.ballot.hex(), "signature": self.signature.hex(), "tag": self.tag.hex()}
        if self.claim is not None:
            record["plaintext"], record["salt"] = self.claim[0].hex(), self.claim[1].hex()
        return record


class BallotBox(Contract):
    """
    Ballot collection for one voting session.

    Setup configures all three contracts in one organizer write. OPEN freezes
    the registration ring; between OPEN and CLOSE ring-signed ballots are
    accepted once per linkability tag (or replaced, when overwriting is
    allowed). After CLOSE the organizer posts the result once.
    """

    name = BALLOT_BOX
    VIEWS = frozenset({
        "config", "ring", "ballots", "ballot_at", "ballot_index", "result", "fired", "is_opened", "is_active",
        "is_closed", "is_tally_closed",
    })

    def __init__(self, curve: EllipticCurve, organizer: bytes):
        self._curve = curve
        self._organizer = organizer
        self._config: Optional[BoxConfig] = None
        self._fired: list[str] = []
        self._ring: Optional[PublicKeyRing] = None
        self._ballots: list[StoredBallot] = []
        self._tags: dict[bytes, int] = {}
        self._result: Optional[dict] = None

    # Events

    def on_block(self, ctx: ExecutionContext) -> list[str]:
        if self._config is None or self._config.event_mode is not EventMode.HEIGHT:
            return []
        fired = []
        for event in EVENTS:
            if event not in self._fired and ctx.height >= self._config.height_of(event):
                self._fire(ctx, event)
                fired.append(event)
        return fired

    def _fire(self, ctx: ExecutionContext, event: str):
        if event == "OPEN":
            self._ring = ctx.contract(ID_STORAGE).freeze()
            logger.info(f"Voting open at height {ctx.height} over a ring of {len(self._ring)}")
        elif event == "CLOSE":
            logger.info(f"Voting closed at height {ctx.height} with {len(self._ballots)} ballots")
        else:
            ctx.contract(CONF_MANAGER).seal()
            logger.info(f"Tally window closed at height {ctx.height}")
        self._fired.append(event)

    # Transactions

    def execute(self, ctx: ExecutionContext, method: str, args: tuple[bytes, ...]) -> str:
        if method == "Setup":
            expect_args(method, args, 1)
            return self._setup(ctx, decode_json(args[0]))
        if method == "FireEvent":
            expect_args(method, args, 1)
            return self._fire_event(ctx, decode_text(args[0]))
        if method == "Vote":
            expect_args(method, args, 2)
            return self._cast(args[0], args[1])
        if method == "VoteBatch":
            return self._cast_batch(args)
        if method == "Redeem":
            expect_args(method, args, 3)
            return self._redeem(args[0], args[1], decode_index(args[2]))
        if method == "SetResult":
            expect_args(method, args, 1)
            return self._set_result(ctx.sender, decode_json(args[0]))
        raise RevertError(RevertCode.UNKNOWN_METHOD, f"{self.name} has no method {method!r}")

    def _require_organizer(self, sender: bytes):
        if sender != self._organizer:
            raise RevertError(RevertCode.UNAUTHORIZED, "Only the organizer may call this method")

    def _setup(self, ctx: ExecutionContext, data: Any) -> str:
        self._require_organizer(ctx.sender)
        if self._config is not None:
            raise RevertError(RevertCode.ALREADY_CONFIGURED, "Session already set up")
        if not isinstance(data, dict):
            raise RevertError(RevertCode.BAD_ARGS, "Session configuration must be a JSON object")
        config = BoxConfig.from_dict(data)
        if config.event_mode is EventMode.HEIGHT and ctx.height >= config.open_height:
            raise RevertError(RevertCode.WRONG_PHASE, f"Setup at height {ctx.height} is past the open height")

        id_storage, conf_manager = ctx.contract(ID_STORAGE), ctx.contract(CONF_MANAGER)
        threshold = config.mode is ConfidentialityMode.THRESHOLD
        if threshold and (config.n_e != conf_manager.manager_count or not 1 <= config.k_e <= config.n_e):
            raise RevertError(RevertCode.BAD_ARGS,
                              f"K_e/N_e={config.k_e}/{config.n_e} with {conf_manager.manager_count} managers")
        if not 1 <= config.k_i <= id_storage.manager_count:
            raise RevertError(RevertCode.BAD_ARGS, f"K_i={config.k_i} exceeds the deployed identity managers")
        id_storage.configure(config.k_i)
        conf_manager.configure(config.k_e, config.n_e, threshold)
        self._config = config
        logger.info(f"Session set up: {config.mode.value}, {len(config.choices)} choices, "
                    f"open/close/tally at {config.open_height}/{config.close_height}/{config.tally_close_height}")
        return "CONFIGURED"

    def _fire_event(self, ctx: ExecutionContext, event: str) -> str:
        self._require_organizer(ctx.sender)
        if self._config is None:
            raise RevertError(RevertCode.NOT_CONFIGURED, "Session has not been set up")
        if self._config.event_mode is not EventMode.ORGANIZER:
            raise RevertError(RevertCode.WRONG_PHASE, "Events are driven by block height in this session")
        expected = EVENTS[len(self._fired)] if len(self._fired) < len(EVENTS) else None
        if event != expected:
            raise RevertError(RevertCode.BAD_EVENT, f"Next event is {expected}, not {event!r}")
        self._fire(ctx, event)
        return event

    def _decode_ballot(self, ballot: bytes):
        if self._config.mode is ConfidentialityMode.VOTE_CLAIM:
            if len(ballot) != 32:
                raise RevertError(RevertCode.BAD_BALLOT, "A vote claim is a 32-byte commitment")
            return
        try:
            ciphertext_from_bytes(self._curve, ballot)
        except ValidationError as e:
            raise RevertError(RevertCode.BAD_BALLOT, str(e)) from e

    def _cast(self, encoded_sig: bytes, ballot: bytes) -> str:
        if not self.is_active():
            raise RevertError(RevertCode.VOTE_CLOSED, "Voting is not open")
        self._decode_ballot(ballot)
        try:
            sig = RingSignature.from_bytes(self._curve, encoded_sig)
        except ValidationError as e:
            raise RevertError(RevertCode.BAD_SIGNATURE, str(e)) from e
        previous = self._tags.get(sig.tag)
        if previous is not None and not self._config.overwrite:
            raise RevertError(RevertCode.DOUBLE_VOTE, "A ballot with this linkability tag is already stored")
        if len(self._ring) == 0:
            raise RevertError(RevertCode.BAD_SIGNATURE, "No voter registered")
        verification = check_signature(self._curve, self._ring, ballot, sig)
        if not verification:
            raise RevertError(RevertCode.BAD_SIGNATURE, verification.status.value)

        stored = StoredBallot(ballot=ballot, signature=encoded_sig, tag=sig.tag)
        if previous is not None:
            self._ballots[previous] = stored
            return f"REPLACED {previous}"
        self._tags[sig.tag] = len(self._ballots)
        self._ballots.append(stored)
        return f"ACCEPTED {len(self._ballots) - 1}"

    def _cast_batch(self, args: tuple[bytes, ...]) -> str:
        if not args or len(args) % 2:
            raise RevertError(RevertCode.BAD_ARGS, "VoteBatch takes (signature, ballot) pairs")
        results = []
        for position in range(0, len(args), 2):
            try:
                results.append(["OK", self._cast(args[position], args[position + 1])])
            except RevertError as e:
                logger.warning(f"Batched ballot {position // 2} reverted: {e}")
                results.append([e.code, e.message])
        return json.dumps(results)

    def _redeem(self, plaintext: bytes, salt: bytes, index: int) -> str:
        if self._config is None or self._config.mode is not ConfidentialityMode.VOTE_CLAIM:
            raise RevertError(RevertCode.WRONG_PHASE, "Redeem only exists in vote-claim sessions")
        if not self.is_closed() or self.is_tally_closed():
            raise RevertError(RevertCode.WRONG_PHASE, "Claims are redeemed between close and tally close")
        if not 0 <= index < len(self._ballots):
            raise RevertError(RevertCode.BAD_ARGS, f"No ballot at index {index}")
        stored = self._ballots[index]
        if stored.claim is not None:
            raise RevertError(RevertCode.ALREADY_REDEEMED, f"Ballot {index} was already redeemed")
        if len(salt) != SALT_SIZE or not check_claim(BallotCommitment(stored.ballot), plaintext, salt):
            raise RevertError(RevertCode.BAD_CLAIM, f"Plaintext and salt do not open ballot {index}")
        stored.claim = (plaintext, salt)
        return f"REDEEMED {index}"

    def _set_result(self, sender: bytes, result: Any) -> str:
        self._require_organizer(sender)
        if not self.is_closed():
            raise RevertError(RevertCode.WRONG_PHASE, "The result can only be posted after voting closes")
        if self._config.mode is ConfidentialityMode.VOTE_CLAIM and not self.is_tally_closed():
            raise RevertError(RevertCode.WRONG_PHASE, "Vote-claim results wait for the redeem window to end")
        if self._result is not None:
            raise RevertError(RevertCode.DUPLICATE, "The result is already posted")
        if not isinstance(result, dict) or not isinstance(result.get("counts"), dict):
            raise RevertError(RevertCode.BAD_ARGS, "Result must be an object with a counts map")
        self._result = result
        logger.info(f"Result posted: {result['counts']}")
        return "POSTED"

    # Views

    def config(self) -> Optional[BoxConfig]:
        return self._config

    def ring(self) -> Optional[PublicKeyRing]:
        return self._ring

    def ballots(self) -> list[StoredBallot]:
        return [StoredBallot(b.ballot, b.signature, b.tag, b.claim) for b in self._ballots]

    def ballot_at(self, index: int) -> StoredBallot:
        b = self._ballots[index]
        return StoredBallot(b.ballot, b.signature, b.tag, b.claim)

    def ballot_index(self, tag: bytes) -> Optional[int]:
        return self._tags.get(tag)

    def result(self) -> Optional[dict]:
        return None if self._result is None else json.loads(json.dumps(self._result))

    def fired(self) -> tuple[str, ...]:
        return tuple(self._fired)

    def is_opened(self) -> bool:
        return "OPEN" in self._fired

    def is_closed(self) -> bool:
        return "CLOSE" in self._fired

    def is_tally_closed(self) -> bool:
        return "TALLY_CLOSE" in self._fired

    def is_active(self) -> bool:
        return self.is_opened() and not self.is_closed()

    # State

    def _header(self) -> dict:
        return {
            "organizer": self._organizer.hex(),
            "config": None if self._config is None else {
                **asdict(self._config),
                "mode": self._config.mode.value,
                "event_mode": self._config.event_mode.value,
                "choices": list(self._config.choices),
            },
            "fired": list(self._fired),
            "ring_digest": self._ring.digest_bytes.hex() if self._ring else None,
            "result": self._result,
        }

    def snapshot(self) -> dict:
        return {**self._header(), "ballots": [b.to_dict() for b in self._ballots]}

    def fingerprint(self) -> bytes:
        return digest(canonical_json({**self._header(), "ballots": [b.digest.hex() for b in self._ballots]}))

    @staticmethod
    def describe(method: str, args: tuple[bytes, ...], status: str, detail: str) -> list[dict]:
        if method == "Vote" and len(args) == 2:
            return [{"method": "Vote", "signature": args[0].hex(), "ballot": args[1].hex(),
                     "status": status, "detail": detail}]
        if method == "VoteBatch" and status == "OK" and args and len(args) % 2 == 0:
            results = json.loads(detail)
            return [
                {"method": "Vote", "batch": True, "signature": args[2 * i].hex(), "ballot": args[2 * i + 1].hex(),
                 "status": ballot_status, "detail": ballot_detail}
                for i, (ballot_status, ballot_detail) in enumerate(results)
            ]
        if method == "Redeem" and len(args) == 3:
            return [{"method": method, "plaintext": args[0].hex(), "salt": args[1].hex(),
                     "index": int.from_bytes(args[2], "big"), "status": status, "detail": detail}]
        if method in ("Setup", "SetResult", "FireEvent") and len(args) == 1:
            try:
                value = args[0].decode("utf8") if method == "FireEvent" else json.loads(args[0])
            except (UnicodeDecodeError, json.JSONDecodeError):
                return Contract.describe(method, args, status, detail)
            return [{"method": method, "value": value, "status": status, "detail": detail}]
        return Contract.describe(method, args, status, detail)
