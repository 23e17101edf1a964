"""
Closed-form storage and ledger-cost accounting, and the same costs measured
on a finished session chain.

Storage sizes use a 256-bit elliptic curve (64-byte public keys, 32-byte
scalars) against a 3072-bit finite-field group (384-byte elements); the
finite-field column is analytic only.
"""

import json
import logging
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

from src.crypto.lsag import FRAMING_OVERHEAD
from src.errors import ValidationError
from src.ledger.transaction import Block
from src.metrics.phases import Phase, PhaseCounters, phase_of

logger = logging.getLogger(__name__)

ECC_SCALAR_BYTES = 32
ECC_POINT_BYTES = 64
NONECC_ELEMENT_BYTES = 384

REPORTED_PHASES = (Phase.SETUP, Phase.REGISTRATION, Phase.ENCRYPTION, Phase.VOTING, Phase.TALLY)


@dataclass(frozen=True)
class StorageReport:
    n: int
    ecc_pk_bytes: int
    ecc_sig_bytes: int
    nonecc_pk_bytes: int
    nonecc_sig_bytes: int

    @property
    def framed_sig_bytes(self) -> int:
        """Size of our wire encoding: raw accounting plus ring digest and length prefix."""
        return self.ecc_sig_bytes + FRAMING_OVERHEAD

    def to_dict(self) -> dict:
        return {**asdict(self), "framed_sig_bytes": self.framed_sig_bytes}


def storage_report(n: int) -> StorageReport:
    """Ring of n keys: pk = 64n, sig = |T| + n|s| + |c| = 32(n+3); finite field 384n and 384(n+2)."""
    if n < 1:
        raise ValidationError(f"Ring size must be at least 1, got {n}")
    return StorageReport(
        n=n,
        ecc_pk_bytes=ECC_POINT_BYTES * n,
        ecc_sig_bytes=ECC_SCALAR_BYTES * (n + 3),
        nonecc_pk_bytes=NONECC_ELEMENT_BYTES * n,
        nonecc_sig_bytes=NONECC_ELEMENT_BYTES * (n + 2),
    )


@dataclass(frozen=True)
class PhaseCost:
    """Ledger writes w, reads r and sequential rounds c of one phase."""
    phase: Phase
    w: int
    r: int
    c: int

    def to_dict(self) -> dict:
        return {"phase": self.phase.value, "w": self.w, "r": self.r, "c": self.c}


def phase_costs(m: int, k_i: int, n_e: int, k_e: int, vote_claim: bool = False) -> list[PhaseCost]:
    """Per-phase cost for M voters, K_i identity endorsements and a K_e-of-N_e key.

    Registration reads are reported as 0. In vote-claim mode the encryption
    phase disappears and the tally costs one redeem per voter.
    """
    for name, value in (("M", m), ("K_i", k_i), ("N_e", n_e), ("K_e", k_e)):
        if value < 0:
            raise ValidationError(f"{name} must not be negative, got {value}")
    costs = [
        PhaseCost(Phase.SETUP, 1, 0, 1),
        PhaseCost(Phase.REGISTRATION, m * k_i, 0, k_i),
    ]
    if vote_claim:
        costs.append(PhaseCost(Phase.VOTING, m, m, 1))
        costs.append(PhaseCost(Phase.TALLY, m, 0, 1))
    else:
        costs.append(PhaseCost(Phase.ENCRYPTION, 2 * n_e, n_e, 2))
        costs.append(PhaseCost(Phase.VOTING, m, m, 1))
        costs.append(PhaseCost(Phase.TALLY, k_e, 0, 1))
    return costs


@dataclass
class SessionMeasurement:
    costs: list[PhaseCost]
    partial: bool = False
    missing: list[str] = field(default_factory=list)

    def cost(self, phase: Phase) -> Optional[PhaseCost]:
        return next((c for c in self.costs if c.phase is phase), None)

    def to_dict(self) -> dict:
        return {"costs": [c.to_dict() for c in self.costs], "partial": self.partial, "missing": self.missing}


def measure_session(blocks: Sequence[Block], counters: Optional[PhaseCounters] = None) -> SessionMeasurement:
    """Observed per-phase writes and rounds from the chain; reads from actor instrumentation.

    Every transaction counts as one write, reverted or not; a round is a
    distinct block height holding writes of the phase.
    """
    writes = {phase: 0 for phase in Phase}
    heights: dict[Phase, set[int]] = {phase: set() for phase in Phase}
    seen_events: set[str] = set()
    result_posted = False
    for block in blocks:
        seen_events.update(event.partition(":")[2] for event in block.events)
        for tx, outcome in zip(block.transactions, block.outcomes):
            phase = phase_of(tx.method)
            writes[phase] += 1
            heights[phase].add(block.height)
            if outcome.ok and tx.method == "FireEvent":
                seen_events.add(tx.args[0].decode("utf8", "replace"))
            if outcome.ok and tx.method == "SetResult":
                result_posted = True

    reads = counters.reads() if counters is not None else {phase: 0 for phase in Phase}
    costs = [
        PhaseCost(phase, writes[phase], reads[phase], len(heights[phase]))
        for phase in REPORTED_PHASES
        if writes[phase] or phase is not Phase.ENCRYPTION
    ]
    missing = [event for event in ("OPEN", "CLOSE") if event not in seen_events]
    if not result_posted:
        missing.append("RESULT")
    if missing:
        logger.warning(f"Session chain is incomplete, missing {', '.join(missing)}")
    return SessionMeasurement(costs=costs, partial=bool(missing), missing=missing)


# Rendering

def render_json(payload) -> str:
    return json.dumps(payload, indent=2, sort_keys=True)


def _table(headers: Sequence[str], rows: Sequence[Sequence]) -> str:
    cells = [list(map(str, headers))] + [[str(v) for v in row] for row in rows]
    widths = [max(len(row[i]) for row in cells) for i in range(len(headers))]
    lines = ["  ".join(cell.rjust(width) for cell, width in zip(row, widths)) for row in cells]
    lines.insert(1, "  ".join("-" * width for width in widths))
    return "\n".join(lines)


def render_storage_table(reports: Sequence[StorageReport]) -> str:
    return _table(
        ("n", "ECC pk", "ECC sig", "ECC sig (framed)", "non-ECC pk", "non-ECC sig"),
        [(r.n, r.ecc_pk_bytes, r.ecc_sig_bytes, r.framed_sig_bytes, r.nonecc_pk_bytes, r.nonecc_sig_bytes)
         for r in reports],
    )


def render_costs_table(costs: Sequence[PhaseCost], observed: Optional[Sequence[PhaseCost]] = None) -> str:
    if observed is None:
        return _table(("phase", "w", "r", "c"), [(c.phase.value, c.w, c.r, c.c) for c in costs])
    by_phase = {c.phase: c for c in observed}
    rows = []
    for cost in costs:
        seen = by_phase.get(cost.phase, PhaseCost(cost.phase, 0, 0, 0))
        rows.append((cost.phase.value, cost.w, seen.w, cost.r, seen.r, cost.c, seen.c))
    return _table(("phase", "w", "w obs", "r", "r obs", "c", "c obs"), rows)
