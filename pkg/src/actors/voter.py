import logging
import random
from typing import Optional, Sequence

from src.actors.identity_manager import IdentityManager
from src.contracts.ballot_box import BALLOT_BOX, ConfidentialityMode
from src.contracts.codec import encode_index
from src.contracts.conf_manager import CONF_MANAGER
from src.crypto.confidentiality import SALT_SIZE, ciphertext_to_bytes, commit_ballot, encrypt_ballot
from src.crypto.curve import EllipticCurve
from src.crypto.lsag import KeyPair, PublicKeyRing, keygen, sign
from src.errors import ValidationError
from src.metrics.phases import Phase, PhaseCounters
from src.providers.ledger_provider import LedgerProvider
from src.providers.proxy_transaction_provider import AnonymizationProxy, ProxyTicket
from utils.common_utils import system_rng

logger = logging.getLogger(__name__)

CHOICE_SIZE = 4


def encode_plaintext(choice: int, salt: bytes) -> bytes:
    """4-byte big-endian choice index followed by the 32-byte salt."""
    return choice.to_bytes(CHOICE_SIZE, "big") + salt


def decode_choice(plaintext: bytes, n_choices: int) -> Optional[int]:
    """Choice index of a well-formed plaintext, None when it is malformed or out of range."""
    if len(plaintext) != CHOICE_SIZE + SALT_SIZE:
        return None
    choice = int.from_bytes(plaintext[:CHOICE_SIZE], "big")
    return choice if choice < n_choices else None


class Voter:
    """
    A voter's client: key pair, registration, ballots and receipts.

    Ballots go through the anonymization proxy; in vote-claim mode the
    (plaintext, salt) opening of the latest ballot is kept for redeem.
    """

    def __init__(
        self,
        id_data: bytes,
        curve: EllipticCurve,
        proxy: AnonymizationProxy,
        ledger_provider: Optional[LedgerProvider] = None,
        rng: Optional[random.Random] = None,
        counters: Optional[PhaseCounters] = None,
    ):
        self.id_data = id_data
        self._curve = curve
        self._proxy = proxy
        self._provider = ledger_provider or LedgerProvider.get_instance()
        self._rng = rng or system_rng()
        self._counters = counters or PhaseCounters()
        self.keypair: KeyPair = keygen(curve, self._rng)
        self.tickets: list[ProxyTicket] = []
        self.signup_receipts: list[bytes] = []
        self.registration_failed = False
        self._claims: dict[bytes, tuple[bytes, bytes]] = {}
        self._tag: Optional[bytes] = None
        self._next_manager = 0

    @property
    def encoded_pk(self) -> bytes:
        return self._curve.serialize_point(self.keypair.pk)

    # Registration

    def signup_round(self, managers: Sequence[IdentityManager]) -> Optional[bytes]:
        """Ask the next managers in turn until one endorses; one endorsement per call."""
        while self._next_manager < len(managers):
            manager = managers[self._next_manager]
            self._next_manager += 1
            receipt = manager.handle(self.id_data, self.keypair.pk)
            if receipt is not None:
                self.signup_receipts.append(receipt)
                return receipt
        if not self.registration_failed:
            logger.warning(f"No identity manager left to endorse {self.id_data[:48]!r}")
        self.registration_failed = True
        return None

    def signup(self, managers: Sequence[IdentityManager], endorsements: int = 1) -> list[bytes]:
        """Collect up to ``endorsements`` endorsements without waiting for blocks in between."""
        receipts = []
        for _ in range(endorsements):
            receipt = self.signup_round(managers)
            if receipt is None:
                break
            receipts.append(receipt)
        return receipts

    # Voting

    def _voting_context(self):
        ledger = self._provider.ledger
        box_config = ledger.query(BALLOT_BOX, "config")
        ring = ledger.query(BALLOT_BOX, "ring")
        if box_config is None or ring is None:
            raise ValidationError("Voting has not opened yet")
        ek = ledger.query(CONF_MANAGER, "ek") if box_config.mode is ConfidentialityMode.THRESHOLD else None
        self._counters.record_read(Phase.VOTING)
        return box_config, ring, ek

    def vote(self, choice: int, validate: bool = True) -> ProxyTicket:
        """Encrypt (or commit to) ``choice``, ring-sign it and hand it to the proxy."""
        box_config, ring, ek = self._voting_context()
        if validate and not 0 <= choice < len(box_config.choices):
            raise ValidationError(f"Choice {choice} outside 0..{len(box_config.choices) - 1}")
        salt = self._rng.randbytes(SALT_SIZE)
        plaintext = encode_plaintext(choice, salt)
        if box_config.mode is ConfidentialityMode.THRESHOLD:
            if ek is None:
                raise ValidationError("No encryption key has been published")
            ballot = ciphertext_to_bytes(self._curve, encrypt_ballot(self._curve, ek, plaintext, self._rng))
        else:
            ballot = commit_ballot(plaintext, salt).digest

        try:
            index = ring.index_of(self.keypair.pk)
            signing_ring = ring
        except ValidationError:
            # digest of this ring differs from the frozen one, so the box reverts BAD_SIGNATURE
            logger.warning("Voting with a key that is not in the frozen ring")
            signing_ring = PublicKeyRing(self._curve, list(ring.keys) + [self.keypair.pk])
            index = len(signing_ring) - 1
        sig = sign(self._curve, self.keypair.sk, index, signing_ring, ballot, self._rng)
        ticket = self._proxy.cast(sig.to_bytes(self._curve), ballot)
        self.tickets.append(ticket)
        self._claims[ballot] = (plaintext, salt)
        self._tag = sig.tag
        return ticket

    def redeem(self) -> Optional[bytes]:
        """Open the stored vote claim during the tally window."""
        if self._tag is None:
            return None
        ledger = self._provider.ledger
        index = ledger.query(BALLOT_BOX, "ballot_index", self._tag)
        if index is None:
            logger.warning("No stored ballot carries this voter's tag; nothing to redeem")
            return None
        stored = ledger.query(BALLOT_BOX, "ballot_at", index)
        if stored.ballot not in self._claims:
            logger.warning(f"Ballot {index} is not one this voter committed to")
            return None
        plaintext, salt = self._claims[stored.ballot]
        return self._proxy.relay(BALLOT_BOX, "Redeem", plaintext, salt, encode_index(index))

    def check_receipt(self, ticket: Optional[ProxyTicket] = None) -> bool:
        """Individual verifiability: the audited Vote record equals what this voter sent."""
        ticket = ticket or (self.tickets[-1] if self.tickets else None)
        if ticket is None or ticket.receipt is None:
            return False
        ledger = self._provider.ledger
        outcome = ledger.outcome(ticket.receipt)
        if outcome is None:
            return False
        records = [
            r for r in ledger.audit(outcome.height, outcome.height)
            if r["receipt"] == ticket.receipt.hex() and r["method"] == "Vote"
        ]
        if ticket.position >= len(records):
            return False
        record = records[ticket.position]
        return (
            record["status"] == "OK"
            and record["signature"] == ticket.signature.hex()
            and record["ballot"] == ticket.ballot.hex()
        )
