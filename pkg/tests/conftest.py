import json
import random
from pathlib import Path

import pytest

from src.actors.session import SessionConfig, VoterPlan
from src.contracts.ballot_box import BALLOT_BOX
from src.contracts.codec import encode_index, encode_json
from src.contracts.conf_manager import CONF_MANAGER
from src.contracts.deployment import make_genesis
from src.contracts.id_storage import ID_STORAGE
from src.crypto.confidentiality import (
    SALT_SIZE, ciphertext_to_bytes, commit_ballot, encrypt_ballot, generate_encryption_key, share_digest, share_key,
)
from src.crypto.curve import secp256k1_curve, toy_curve
from src.crypto.lsag import keygen, sign
from src.actors.voter import encode_plaintext
from src.ledger.transaction import ANONYMOUS, account_id
from src.providers.ledger_provider import LedgerProvider
from utils.common_utils import digest

GOLDEN_DIR = Path(__file__).parent / "golden"


@pytest.fixture(scope="session")
def toy():
    return toy_curve()


@pytest.fixture(scope="session")
def k1():
    return secp256k1_curve()


@pytest.fixture
def rng():
    return random.Random(1234)


@pytest.fixture
def provider():
    """Private provider so tests never share a chain through the singleton."""
    LedgerProvider.reset_instance()
    yield LedgerProvider()
    LedgerProvider.reset_instance()


@pytest.fixture(scope="session")
def golden():
    def load(name: str) -> dict:
        return json.loads((GOLDEN_DIR / name).read_text())
    return load


def session_config(**overrides) -> SessionConfig:
    """Short session: setup and keys in blocks 1-3, open 6, close 9, tally close 12."""
    data = {"open_height": 6, "close_height": 9, "tally_close_height": 12, "seed": 11}
    data.update(overrides)
    return SessionConfig.from_dict(data)


def voter_plans(choices, **fields) -> list[VoterPlan]:
    return [VoterPlan(email=f"voter{i}@example.org", votes=[c], **fields) for i, c in enumerate(choices)]


class Deployment:
    """Contracts deployed on a fresh ledger, driven transaction by transaction."""

    def __init__(self, curve, provider, rng, k_e=2, n_e=3, n_i=2):
        self.curve = curve
        self.rng = rng
        self.organizer = account_id("organizer:test")
        self.managers = [account_id(f"identity-manager:im{i}") for i in range(n_i)]
        self.custodians = [account_id(f"conf-manager:cm{i}") for i in range(n_e)]
        self.k_e, self.n_e = k_e, n_e
        self.ledger = provider.deploy(make_genesis(curve, self.organizer, self.managers, self.custodians))
        self.dk = None
        self.shares = []

    def produce(self):
        return self.ledger.produce_block()

    def outcome(self, receipt):
        return self.ledger.outcome(receipt)

    def status(self, receipt) -> str:
        return self.ledger.outcome(receipt).status

    def setup(self, **overrides) -> bytes:
        data = {
            "open_height": 6, "close_height": 9, "tally_close_height": 12, "mode": "THRESHOLD",
            "event_mode": "HEIGHT", "choices": ["yes", "no"], "overwrite": False, "k_i": 1,
            "k_e": self.k_e, "n_e": self.n_e,
        }
        data.update(overrides)
        receipt = self.ledger.call(self.organizer, BALLOT_BOX, "Setup", [encode_json(data)])
        self.produce()
        return receipt

    def publish_keys(self):
        keypair = generate_encryption_key(self.curve, self.rng)
        self.dk = keypair.dk
        self.shares = share_key(self.curve, keypair.dk, self.k_e, self.n_e, self.rng)
        for account, share in zip(self.custodians, self.shares):
            self.ledger.call(account, CONF_MANAGER, "CommitShare",
                             [encode_index(share.index), share_digest(self.curve, share)])
        self.produce()
        for account in self.custodians:
            self.ledger.call(account, CONF_MANAGER, "PublishKey", [self.curve.serialize_point(keypair.ek)])
        self.produce()
        return keypair

    def reveal(self, position: int, value=None) -> bytes:
        share = self.shares[position]
        revealed = share.value if value is None else value
        return self.ledger.call(self.custodians[position], CONF_MANAGER, "RevealShare",
                                [encode_index(share.index), self.curve.scalar_to_bytes(revealed)])

    def sign_up(self, pk, email: str, manager: int = 0) -> bytes:
        label = digest(email.encode())
        return self.ledger.call(self.managers[manager], ID_STORAGE, "SignUp",
                                [self.curve.serialize_point(pk), label])

    def register(self, count: int):
        keys = [keygen(self.curve, self.rng) for _ in range(count)]
        for i, keypair in enumerate(keys):
            self.sign_up(keypair.pk, f"voter{i}@example.org")
        self.produce()
        return keys

    def ballot(self, choice: int) -> tuple[bytes, bytes]:
        """(plaintext, ballot bytes) for the session's confidentiality mode."""
        salt = self.rng.randbytes(SALT_SIZE)
        plaintext = encode_plaintext(choice, salt)
        config = self.ledger.query(BALLOT_BOX, "config")
        if config.mode.value == "VOTE_CLAIM":
            return plaintext, commit_ballot(plaintext, salt).digest
        ek = self.ledger.query(CONF_MANAGER, "ek")
        return plaintext, ciphertext_to_bytes(self.curve, encrypt_ballot(self.curve, ek, plaintext, self.rng))

    def signed(self, keypair, ballot: bytes) -> bytes:
        ring = self.ledger.query(BALLOT_BOX, "ring")
        sig = sign(self.curve, keypair.sk, ring.index_of(keypair.pk), ring, ballot, self.rng)
        return sig.to_bytes(self.curve)

    def vote(self, keypair, choice: int) -> bytes:
        _, ballot = self.ballot(choice)
        return self.ledger.call(ANONYMOUS, BALLOT_BOX, "Vote", [self.signed(keypair, ballot), ballot])

    def advance_to(self, height: int):
        self.ledger.produce_until(height)


@pytest.fixture
def deployment(toy, provider, rng):
    return Deployment(toy, provider, rng)
