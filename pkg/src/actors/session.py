import csv
import json
import logging
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path
from typing import TYPE_CHECKING, Any, Optional

from config import config
from src.contracts.ballot_box import ConfidentialityMode, EventMode
from src.errors import ValidationError
from src.ledger.ledger import Ledger
from src.metrics.phases import PhaseCounters

if TYPE_CHECKING:
    from src.actors.custodian import KeyCustodian
    from src.actors.voter import Voter

# Configure logging
logger = logging.getLogger(__name__)

# Setup, key commitment and key publication each take one block before registration
PRE_REGISTRATION_BLOCKS = 3


@dataclass(frozen=True)
class SessionConfig:
    open_height: int
    close_height: int
    tally_close_height: int
    mode: ConfidentialityMode = ConfidentialityMode.THRESHOLD
    k_i: int = 1
    n_i: int = 1
    k_e: int = 2
    n_e: int = 3
    choices: tuple[str, ...] = ("yes", "no")
    overwrite: bool = False
    seed: int = 0
    event_mode: EventMode = EventMode.HEIGHT
    proxy_batch_size: int = 1

    def __post_init__(self):
        object.__setattr__(self, "mode", ConfidentialityMode(self.mode))
        object.__setattr__(self, "event_mode", EventMode(self.event_mode))
        object.__setattr__(self, "choices", tuple(self.choices))
        if not self.open_height < self.close_height < self.tally_close_height:
            raise ValidationError("Heights must satisfy open < close < tally_close")
        if not 1 <= self.k_i <= self.n_i:
            raise ValidationError(f"Identity threshold must satisfy 1 <= K_i <= N_i, got {self.k_i}/{self.n_i}")
        if self.mode is ConfidentialityMode.THRESHOLD and not 1 <= self.k_e <= self.n_e:
            raise ValidationError(f"Key threshold must satisfy 1 <= K_e <= N_e, got {self.k_e}/{self.n_e}")
        if self.open_height < PRE_REGISTRATION_BLOCKS + self.k_i + 1:
            raise ValidationError(f"open_height must leave room for setup and {self.k_i} registration rounds")
        if self.close_height < self.open_height + 2:
            raise ValidationError("Voting needs at least one block between open and close")
        if not self.choices or len(set(self.choices)) != len(self.choices):
            raise ValidationError("Choices must be a non-empty list of distinct names")
        if not 0 <= self.seed < 2 ** 64:
            raise ValidationError("Seed must be a 64-bit unsigned integer")
        if self.proxy_batch_size < 1:
            raise ValidationError("Proxy batch size must be at least 1")

    @property
    def threshold(self) -> bool:
        return self.mode is ConfidentialityMode.THRESHOLD

    @property
    def registration_start(self) -> int:
        return PRE_REGISTRATION_BLOCKS + 1

    @classmethod
    def from_dict(cls, data: dict) -> "SessionConfig":
        """Fill missing fields from the ``session`` section of config.yaml."""
        merged: dict[str, Any] = {**config.SESSION_DEFAULTS, **data}
        merged.setdefault("proxy_batch_size", config.PROXY_BATCH_SIZE)
        known = cls.__dataclass_fields__.keys()
        unknown = set(merged) - set(known)
        if unknown:
            raise ValidationError(f"Unknown session fields: {sorted(unknown)}")
        try:
            return cls(**merged)
        except (TypeError, ValueError) as e:
            if isinstance(e, ValidationError):
                raise
            raise ValidationError(f"Invalid session configuration: {e}") from e

    @classmethod
    def from_file(cls, path: Path) -> "SessionConfig":
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except (OSError, json.JSONDecodeError) as e:
            raise ValidationError(f"Cannot read session configuration {path}: {e}") from e

    def to_dict(self) -> dict:
        data = asdict(self)
        data.update(mode=self.mode.value, event_mode=self.event_mode.value, choices=list(self.choices))
        return data

    def to_onchain(self) -> dict:
        """The fields the ballot box stores at Setup."""
        data = self.to_dict()
        for key in ("seed", "n_i", "proxy_batch_size"):
            data.pop(key)
        return data


@dataclass
class TallyResult:
    counts: dict[str, int]
    invalid: int = 0
    unclaimed: int = 0

    @property
    def total(self) -> int:
        return sum(self.counts.values()) + self.invalid + self.unclaimed

    @classmethod
    def empty(cls, choices) -> "TallyResult":
        return cls(counts={choice: 0 for choice in choices})

    def to_dict(self) -> dict:
        return {"counts": dict(self.counts), "invalid": self.invalid, "unclaimed": self.unclaimed}

    @classmethod
    def from_dict(cls, data: dict) -> "TallyResult":
        try:
            return cls(
                counts={str(k): int(v) for k, v in data["counts"].items()},
                invalid=int(data.get("invalid", 0)),
                unclaimed=int(data.get("unclaimed", 0)),
            )
        except (KeyError, TypeError, ValueError, AttributeError) as e:
            raise ValidationError(f"Malformed tally result: {e}") from e


@dataclass
class VoterPlan:
    """What one simulated voter does during a session."""
    email: str
    votes: list[int] = field(default_factory=list)
    redeem: bool = True
    token: Optional[str] = None
    register: bool = True
    # lets tests push out-of-range choices past client-side validation
    validate: bool = True

    @classmethod
    def from_dict(cls, data: dict) -> "VoterPlan":
        try:
            return cls(**data)
        except TypeError as e:
            raise ValidationError(f"Malformed voter plan {data!r}: {e}") from e


def load_roster_csv(path: Path) -> list[VoterPlan]:
    """Voter roster as CSV rows ``email[,token[,choice]]``; a header row starting with "email" is skipped."""
    try:
        with open(path, newline="") as f:
            rows = [row for row in csv.reader(f) if row and row[0].strip()]
    except OSError as e:
        raise ValidationError(f"Cannot read voter roster {path}: {e}") from e
    if rows and rows[0][0].strip().lower() == "email":
        rows = rows[1:]
    plans = []
    for row in rows:
        cells = [cell.strip() for cell in row] + ["", ""]
        try:
            votes = [int(cells[2])] if cells[2] else []
        except ValueError as e:
            raise ValidationError(f"Choice for {cells[0]} is not an index: {cells[2]!r}") from e
        plans.append(VoterPlan(email=cells[0], token=cells[1] or None, votes=votes))
    logger.info(f"Loaded {len(plans)} voters from {path}")
    return plans


@dataclass
class SessionFaults:
    """Misbehavior injected into an otherwise honest session."""
    early_disclosers: int = 0
    withholders: int = 0
    corrupt_shares: int = 0
    forged_ballots: int = 0
    late_signups: int = 0
    doctor_result: bool = False

    @classmethod
    def from_dict(cls, data: dict) -> "SessionFaults":
        try:
            return cls(**data)
        except TypeError as e:
            raise ValidationError(f"Malformed fault specification {data!r}: {e}") from e


class SessionStatus(str, Enum):
    TALLIED = "TALLIED"
    UNDECRYPTABLE = "UNDECRYPTABLE"
    CORRUPT_SHARES = "CORRUPT_SHARES"
    INCOMPLETE = "INCOMPLETE"


@dataclass
class SessionTranscript:
    """Everything a finished session leaves behind, plus the phase log."""
    config: SessionConfig
    ledger: Ledger
    status: SessionStatus
    result: Optional[TallyResult]
    posted: Optional[dict]
    counters: PhaseCounters
    events: list[dict] = field(default_factory=list)
    voters: list["Voter"] = field(default_factory=list)
    custodians: list["KeyCustodian"] = field(default_factory=list)
    timings: dict[str, float] = field(default_factory=dict)
    confidentiality_breached: bool = False

    def to_lines(self) -> str:
        """JSON-lines: phase boundaries and receipts in the order they happened."""
        return "".join(json.dumps(event, sort_keys=True) + "\n" for event in self.events)

    def save(self, path: Path):
        Path(path).write_text(self.to_lines())
        logger.info(f"Transcript with {len(self.events)} events written to {path}")

    def summary(self) -> dict:
        return {
            "status": self.status.value,
            "height": self.ledger.height,
            "head": self.ledger.head.digest.hex(),
            "result": self.result.to_dict() if self.result else None,
            "posted": self.posted,
            "reads": self.counters.to_dict(),
            "timings": dict(self.timings),
            "confidentiality_breached": self.confidentiality_breached,
        }
