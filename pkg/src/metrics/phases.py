import threading
from enum import Enum
from typing import Optional


class Phase(str, Enum):
    SETUP = "Setup"
    REGISTRATION = "Registration"
    ENCRYPTION = "Encryption"
    VOTING = "Voting"
    TALLY = "Tally"
    OTHER = "Other"


# Ledger writes attributed to each protocol phase
PHASE_OF_METHOD = {
    "Setup": Phase.SETUP,
    "SignUp": Phase.REGISTRATION,
    "CommitShare": Phase.ENCRYPTION,
    "PublishKey": Phase.ENCRYPTION,
    "Vote": Phase.VOTING,
    "VoteBatch": Phase.VOTING,
    "RevealShare": Phase.TALLY,
    "Redeem": Phase.TALLY,
    "SetResult": Phase.OTHER,
    "FireEvent": Phase.OTHER,
}


def phase_of(method: str) -> Phase:
    return PHASE_OF_METHOD.get(method, Phase.OTHER)


class PhaseCounters:
    """Ledger reads performed by actors, per phase. Safe to share between actor threads."""

    def __init__(self):
        self._reads = {phase: 0 for phase in Phase}
        self._lock = threading.Lock()

    def record_read(self, phase: Phase, count: int = 1):
        with self._lock:
            self._reads[phase] += count

    def reads(self, phase: Optional[Phase] = None):
        with self._lock:
            return dict(self._reads) if phase is None else self._reads[phase]

    def to_dict(self) -> dict:
        return {phase.value: count for phase, count in self.reads().items()}
