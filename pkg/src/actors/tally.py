"""
Counting ballots, from live contract state or from raw chain data.

``tally_oracle`` and ``verify_tally`` never touch contract objects: they
rebuild the ring, the stored ballots, the decryption key and the redeemed
claims from genesis plus the ordered transactions and outcomes, so anyone
holding an exported chain can recount.
"""

import json
import logging
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from src.actors.session import TallyResult
from src.actors.voter import decode_choice
from src.contracts.ballot_box import BALLOT_BOX, BoxConfig, ConfidentialityMode, StoredBallot
from src.contracts.codec import decode_index, decode_json
from src.contracts.conf_manager import CONF_MANAGER
from src.contracts.deployment import genesis_curve
from src.contracts.id_storage import ID_STORAGE
from src.crypto.confidentiality import SecretShare, ciphertext_from_bytes, consistent_subset, decrypt_ballot
from src.crypto.curve import EllipticCurve, Point
from src.crypto.lsag import PublicKeyRing, RingSignature, check_signature
from src.errors import IntegrityError, RevertCode, RevertError, ValidationError
from src.ledger.transaction import Block
from utils.common_utils import from_hex

logger = logging.getLogger(__name__)


def count_ballots(
    curve: EllipticCurve,
    box_config: BoxConfig,
    ballots: Sequence[StoredBallot],
    dk: Optional[int] = None,
) -> TallyResult:
    """Decode every stored ballot and count it under its choice, invalid or unclaimed.

    Raises:
        ValidationError: Threshold-mode ballots to count but no decryption key
    """
    result = TallyResult.empty(box_config.choices)
    claim_mode = box_config.mode is ConfidentialityMode.VOTE_CLAIM
    if ballots and not claim_mode and dk is None:
        raise ValidationError("Cannot count encrypted ballots without the decryption key")
    for stored in ballots:
        if claim_mode:
            if stored.claim is None:
                result.unclaimed += 1
                continue
            plaintext = stored.claim[0]
        else:
            try:
                plaintext = decrypt_ballot(curve, dk, ciphertext_from_bytes(curve, stored.ballot))
            except ValidationError:
                result.invalid += 1
                continue
        choice = decode_choice(plaintext, len(box_config.choices))
        if choice is None:
            result.invalid += 1
        else:
            result.counts[box_config.choices[choice]] += 1
    return result


@dataclass
class ChainView:
    """Session state reconstructed from transactions alone."""
    curve: EllipticCurve
    box_config: Optional[BoxConfig] = None
    ring_keys: list[bytes] = field(default_factory=list)
    ballots: list[StoredBallot] = field(default_factory=list)
    ek: Optional[Point] = None
    reveals: dict[int, int] = field(default_factory=dict)
    posted: Optional[dict] = None
    event_heights: dict[str, int] = field(default_factory=dict)
    # (status, index, value) of every RevealShare in the chain, reverted ones included
    disclosed: list[tuple[str, int, int]] = field(default_factory=list)

    @property
    def ring(self) -> PublicKeyRing:
        return PublicKeyRing.from_encoded(self.curve, self.ring_keys)

    def key_from(self, shares: Iterable[SecretShare]) -> Optional[int]:
        if self.box_config is None or self.ek is None:
            return None
        shares = list(shares)
        if len(shares) < self.box_config.k_e:
            return None
        return consistent_subset(self.curve, shares, self.box_config.k_e, self.ek)

    def dk(self) -> Optional[int]:
        return self.key_from(SecretShare(i, v) for i, v in self.reveals.items())


def _outcome_index(detail: str) -> Optional[int]:
    verb, _, index = detail.partition(" ")
    return int(index) if verb in ("ACCEPTED", "REPLACED") else None


def _store(view: ChainView, detail: str, signature: bytes, ballot: bytes):
    index = _outcome_index(detail)
    if index is None:
        return
    tag = RingSignature.from_bytes(view.curve, signature).tag
    stored = StoredBallot(ballot=ballot, signature=signature, tag=tag)
    if index == len(view.ballots):
        view.ballots.append(stored)
    elif index < len(view.ballots):
        view.ballots[index] = stored
    else:
        raise IntegrityError(f"Ballot index {index} skips ahead of {len(view.ballots)} stored ballots")


def _apply(view: ChainView, height: int, tx, status: str, detail: str):
    method, args = tx.method, tx.args
    if method == "RevealShare" and tx.target == CONF_MANAGER and len(args) == 2:
        value = int.from_bytes(args[1], "big") % view.curve.order
        view.disclosed.append((status, decode_index(args[0]), value))
    if status != "OK":
        return

    if tx.target == ID_STORAGE and method == "SignUp" and detail.startswith("COMMITTED"):
        view.ring_keys.append(args[0])
    elif tx.target == BALLOT_BOX:
        if method == "Setup":
            view.box_config = BoxConfig.from_dict(decode_json(args[0]))
        elif method == "FireEvent":
            view.event_heights.setdefault(args[0].decode("utf8"), height)
        elif method == "Vote":
            _store(view, detail, args[0], args[1])
        elif method == "VoteBatch":
            for position, (ballot_status, ballot_detail) in enumerate(json.loads(detail)):
                if ballot_status == "OK":
                    _store(view, ballot_detail, args[2 * position], args[2 * position + 1])
        elif method == "Redeem":
            stored = view.ballots[decode_index(args[2])]
            stored.claim = (args[0], args[1])
        elif method == "SetResult":
            view.posted = decode_json(args[0])
    elif tx.target == CONF_MANAGER:
        if method == "PublishKey" and view.ek is None:
            view.ek = view.curve.deserialize_point(args[0])
        elif method == "RevealShare":
            view.reveals[decode_index(args[0])] = view.disclosed[-1][2]


def read_chain(blocks: Sequence[Block]) -> ChainView:
    """Rebuild the session from an exported chain.

    Raises:
        IntegrityError: The chain has no genesis or an accepted transaction does not decode
    """
    if not blocks or blocks[0].genesis is None:
        raise IntegrityError("Chain does not start with a genesis block")
    genesis = blocks[0].genesis
    view = ChainView(curve=genesis_curve(genesis))
    view.ring_keys.extend(from_hex(entry["pk"]) for entry in genesis.get("roster", []))
    for block in blocks[1:]:
        for event in block.events:
            view.event_heights.setdefault(event.partition(":")[2], block.height)
        for tx, outcome in zip(block.transactions, block.outcomes):
            try:
                _apply(view, block.height, tx, outcome.status, outcome.detail)
            except (RevertError, ValidationError, KeyError, IndexError, ValueError) as e:
                if outcome.status == "OK":
                    raise IntegrityError(
                        f"Accepted {tx.target}.{tx.method} at height {block.height} does not decode: {e}"
                    ) from e
    return view


def tally_oracle(blocks: Sequence[Block]) -> TallyResult:
    """Independent recount from raw chain data.

    Raises:
        ValidationError: No session was set up, or the key cannot be rebuilt from on-chain reveals
    """
    view = read_chain(blocks)
    if view.box_config is None:
        raise ValidationError("Chain holds no session setup")
    dk = view.dk() if view.box_config.mode is ConfidentialityMode.THRESHOLD else None
    return count_ballots(view.curve, view.box_config, view.ballots, dk)


def disclosed_key(blocks: Sequence[Block]) -> Optional[int]:
    """Decryption key recoverable from share values published before voting closed, if any."""
    view = read_chain(blocks)
    early = {index: value for status, index, value in view.disclosed if status == RevertCode.EARLY_DISCLOSURE.value}
    return view.key_from(SecretShare(i, v) for i, v in early.items())


@dataclass
class VerifiabilityReport:
    oracle: Optional[TallyResult]
    posted: Optional[dict]
    ring_size: int
    ballots: int
    bad_signatures: int
    error: Optional[str] = None

    @property
    def matches(self) -> bool:
        if self.oracle is None or self.posted is None:
            return False
        try:
            return TallyResult.from_dict(self.posted).to_dict() == self.oracle.to_dict()
        except ValidationError:
            return False

    @property
    def verifiable(self) -> bool:
        return self.matches and self.bad_signatures == 0

    def to_dict(self) -> dict:
        return {
            "oracle": self.oracle.to_dict() if self.oracle else None,
            "posted": self.posted,
            "matches": self.matches,
            "ring_size": self.ring_size,
            "ballots": self.ballots,
            "bad_signatures": self.bad_signatures,
            "error": self.error,
        }


def verify_tally(blocks: Sequence[Block]) -> VerifiabilityReport:
    """Re-verify every stored ballot against the rebuilt ring and compare the recount with the posted result."""
    view = read_chain(blocks)
    ring = view.ring
    bad = 0
    for stored in view.ballots:
        if not check_signature(view.curve, ring, stored.ballot, RingSignature.from_bytes(view.curve, stored.signature)):
            bad += 1
    if bad:
        logger.warning(f"{bad} stored ballots do not verify against the rebuilt ring of {len(ring)}")

    oracle, error = None, None
    if view.box_config is None:
        error = "Chain holds no session setup"
    else:
        dk = view.dk() if view.box_config.mode is ConfidentialityMode.THRESHOLD else None
        try:
            oracle = count_ballots(view.curve, view.box_config, view.ballots, dk)
        except ValidationError as e:
            error = str(e)
    report = VerifiabilityReport(oracle, view.posted, len(ring), len(view.ballots), bad, error)
    if view.posted is not None and oracle is not None and not report.matches:
        logger.warning(f"Posted result {view.posted} differs from the recount {oracle.to_dict()}")
    return report
