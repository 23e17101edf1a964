import logging
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Optional, Sequence

from src.actors.custodian import KeyCustodian
from src.actors.identity_manager import IdentityManager
from src.actors.session import (
    SessionConfig, SessionFaults, SessionStatus, SessionTranscript, TallyResult, VoterPlan,
)
from src.actors.tally import count_ballots, disclosed_key
from src.actors.voter import Voter, encode_plaintext
from src.contracts.ballot_box import BALLOT_BOX, EVENTS, ConfidentialityMode, EventMode
from src.contracts.codec import encode_json
from src.contracts.conf_manager import CONF_MANAGER, KeyStatus
from src.contracts.deployment import make_genesis
from src.crypto.confidentiality import (
    SALT_SIZE, ciphertext_to_bytes, encrypt_ballot, generate_encryption_key, share_key,
)
from src.crypto.curve import EllipticCurve, load_curve
from src.crypto.lsag import RingSignature
from src.errors import RevertError, ValidationError
from src.interfaces.identity_verifier import IdentityVerifier
from src.ledger.transaction import Block, account_id
from src.metrics.phases import PhaseCounters
from src.providers.identity_verifiers import AllowListVerifier
from src.providers.ledger_provider import LedgerProvider
from src.providers.ledger_transaction_provider import LedgerTransactionProvider
from src.providers.proxy_transaction_provider import AnonymizationProxy
from utils.common_utils import derive_rng

# Configure logging
logger = logging.getLogger(__name__)

ResultDoctor = Callable[[TallyResult], dict]


def doctor_first_choice(result: TallyResult) -> dict:
    """Fault hook: move one vote onto the first choice before posting."""
    doctored = result.to_dict()
    first = next(iter(doctored["counts"]))
    doctored["counts"][first] += 1
    return doctored


class Organizer:
    """
    Sets the session up, fires events when they are organizer-driven, and
    tallies once the decryption key is public (or the redeem window closed).
    """

    def __init__(
        self,
        curve: EllipticCurve,
        ledger_provider: Optional[LedgerProvider] = None,
        name: str = "organizer",
        result_doctor: Optional[ResultDoctor] = None,
    ):
        self.name = name
        self.account = account_id(f"organizer:{name}")
        self._curve = curve
        self._provider = ledger_provider or LedgerProvider.get_instance()
        self._tx = LedgerTransactionProvider(self.account, self._provider)
        self._doctor = result_doctor
        self.result: Optional[TallyResult] = None
        self.result_receipt: Optional[bytes] = None

    def setup(self, config: SessionConfig) -> bytes:
        return self._tx.call(BALLOT_BOX, "Setup", encode_json(config.to_onchain()))

    def fire(self, event: str) -> bytes:
        return self._tx.call(BALLOT_BOX, "FireEvent", event.encode("utf8"))

    def ready(self) -> bool:
        """Tally precondition: key reconstructed (threshold) or redeem window over (vote claim)."""
        ledger = self._provider.ledger
        box_config = ledger.query(BALLOT_BOX, "config")
        if box_config is None or not ledger.query(BALLOT_BOX, "is_closed"):
            return False
        if box_config.mode is ConfidentialityMode.VOTE_CLAIM:
            return ledger.query(BALLOT_BOX, "is_tally_closed")
        return ledger.query(CONF_MANAGER, "status") is KeyStatus.DECRYPTABLE

    def tally(self) -> TallyResult:
        """Decrypt (or collect redeemed claims of) every stored ballot and count.

        Raises:
            ValidationError: The tally preconditions do not hold yet
        """
        if not self.ready():
            raise ValidationError("Tally preconditions not met: key not reconstructed or redeem window open")
        ledger = self._provider.ledger
        box_config = ledger.query(BALLOT_BOX, "config")
        dk = ledger.query(CONF_MANAGER, "dk") if box_config.mode is ConfidentialityMode.THRESHOLD else None
        self.result = count_ballots(self._curve, box_config, ledger.query(BALLOT_BOX, "ballots"), dk)
        logger.info(f"Tally: {self.result.to_dict()}")
        return self.result

    def post_result(self, result: TallyResult) -> bytes:
        posted = self._doctor(result) if self._doctor else result.to_dict()
        if self._doctor:
            logger.warning(f"Posting doctored result {posted}")
        self.result_receipt = self._tx.call(BALLOT_BOX, "SetResult", encode_json(posted))
        return self.result_receipt

    def on_block(self, block: Block):
        """Block listener: tally and post as soon as the preconditions hold."""
        if self.result_receipt is None and self.ready():
            self.post_result(self.tally())

    def watch(self):
        self._provider.ledger.add_listener(self.on_block)


def _forge_signature(curve: EllipticCurve, ring, rng) -> bytes:
    """Random well-formed signature over ``ring``; verifies only with negligible probability."""
    g = curve.order
    tag = curve.serialize_point(curve.base_mul(rng.randrange(1, g)))
    sig = RingSignature(
        ring_digest=ring.digest,
        tag=tag,
        s=tuple(rng.randrange(0, g) for _ in range(len(ring))),
        c=rng.randrange(0, g),
    )
    return sig.to_bytes(curve)


class SessionRunner:
    """
    Drives one complete session over a private ledger.

    Height plan with ``PRE_REGISTRATION_BLOCKS`` = 3: Setup in block 1,
    CommitShare in block 2, PublishKey in block 3, one registration round per
    block from block 4, ballots from the block after OPEN, reveals (or
    redeems) in the CLOSE block, the result in the block after the key
    becomes public.
    """

    def __init__(
        self,
        config: SessionConfig,
        plans: Sequence[VoterPlan],
        faults: Optional[SessionFaults] = None,
        curve: Optional[EllipticCurve] = None,
        verifiers: Optional[Sequence[IdentityVerifier]] = None,
        parallel_voters: bool = False,
    ):
        self.config = config
        self.plans = list(plans)
        self.faults = faults or SessionFaults()
        self.curve = curve or load_curve()
        self.parallel_voters = parallel_voters
        self._check_faults()

        self.provider = LedgerProvider()
        self.counters = PhaseCounters()
        self.events: list[dict] = []
        self.timings: dict[str, float] = {}

        eligible = [p.email for p in self.plans if p.register]
        if verifiers is None:
            verifiers = [AllowListVerifier(eligible) for _ in range(config.n_i)]
        if len(verifiers) != config.n_i:
            raise ValidationError(f"{len(verifiers)} identity verifiers for N_i={config.n_i}")
        self.managers = [
            IdentityManager(f"im{i + 1}", verifier, self.curve, self.provider) for i, verifier in enumerate(verifiers)
        ]
        doctor = doctor_first_choice if self.faults.doctor_result else None
        self.organizer = Organizer(self.curve, self.provider, result_doctor=doctor)
        self.custodians: list[KeyCustodian] = []
        self.ek = None
        if config.threshold:
            dealer = derive_rng(config.seed, "dealer")
            keypair = generate_encryption_key(self.curve, dealer)
            shares = share_key(self.curve, keypair.dk, config.k_e, config.n_e, dealer)
            self.ek = keypair.ek
            self.custodians = [
                KeyCustodian(f"cm{share.index}", share, self.curve, self.provider, self.counters) for share in shares
            ]

        genesis = make_genesis(
            self.curve,
            self.organizer.account,
            [m.account for m in self.managers],
            [c.account for c in self.custodians],
        )
        self.ledger = self.provider.deploy(genesis)
        self.ledger.add_listener(self._log_block)
        self.organizer.watch()
        self.proxy = AnonymizationProxy(self.provider, config.proxy_batch_size)
        self.voters = [
            Voter(self._id_data(plan), self.curve, self.proxy, self.provider, derive_rng(config.seed, f"voter:{i}"),
                  self.counters)
            for i, plan in enumerate(self.plans)
        ]

    def _check_faults(self):
        faults = self.faults
        n = self.config.n_e if self.config.threshold else 0
        if faults.early_disclosers > n or faults.withholders + faults.corrupt_shares > n:
            raise ValidationError(f"Fault counts exceed the {n} confidentiality managers")
        if faults.late_signups > len(self.plans):
            raise ValidationError("More late signups than voters")

    @staticmethod
    def _id_data(plan: VoterPlan) -> bytes:
        return plan.email.encode() + (b"|" + plan.token.encode() if plan.token else b"")

    # Transcript

    def _record(self, kind: str, **fields):
        self.events.append({"kind": kind, "height": self.ledger.height, **fields})

    def _phase(self, name: str):
        logger.info(f"Phase {name} from height {self.ledger.height + 1}")
        self._record("phase", phase=name)

    def _receipt(self, actor: str, method: str, receipt: Optional[bytes]):
        if receipt is not None:
            self._record("receipt", actor=actor, method=method, receipt=receipt.hex())

    def _log_block(self, block: Block):
        self.events.append({
            "kind": "block",
            "height": block.height,
            "digest": block.digest.hex(),
            "transactions": len(block.transactions),
            "events": list(block.events),
        })

    def _fire_due(self):
        """Queue FireEvent for the next block ahead of anything else submitted for it."""
        if self.config.event_mode is not EventMode.ORGANIZER:
            return
        for event in EVENTS:
            if self.ledger.height + 1 == self._height_of(event):
                self._receipt(self.organizer.name, "FireEvent", self.organizer.fire(event))

    def _produce(self) -> Block:
        self.proxy.flush()
        block = self.ledger.produce_block()
        self._fire_due()
        return block

    def _produce_until(self, height: int):
        while self.ledger.height < height:
            self._produce()

    def _height_of(self, event: str) -> int:
        return {"OPEN": self.config.open_height, "CLOSE": self.config.close_height,
                "TALLY_CLOSE": self.config.tally_close_height}[event]

    def _each_voter(self, action: Callable[[int, Voter], None]):
        if self.parallel_voters:
            with ThreadPoolExecutor() as pool:
                list(pool.map(lambda pair: action(*pair), enumerate(self.voters)))
        else:
            for i, voter in enumerate(self.voters):
                action(i, voter)

    # Phases

    def _setup(self):
        self._phase("Setup")
        receipt = self.organizer.setup(self.config)
        self._receipt(self.organizer.name, "Setup", receipt)
        self._produce()
        outcome = self.ledger.outcome(receipt)
        if not outcome.ok:
            raise RevertError(outcome.status, f"Session setup rejected: {outcome.detail}")

    def _encryption(self):
        if not self.custodians:
            return
        self._phase("Encryption")
        for custodian in self.custodians:
            self._receipt(custodian.name, "CommitShare", custodian.commit_share())
        self._produce()
        for custodian in self.custodians:
            self._receipt(custodian.name, "PublishKey", custodian.publish_key(self.ek))
        self._produce()

    def _late(self, i: int) -> bool:
        registering = [j for j, plan in enumerate(self.plans) if plan.register]
        return i in registering[len(registering) - self.faults.late_signups:] if self.faults.late_signups else False

    def _registration(self):
        self._phase("Registration")
        self._produce_until(self.config.registration_start - 1)

        def signup(i: int, voter: Voter):
            if not self._late(i):
                self._receipt(f"voter:{i}", "SignUp", voter.signup_round(self.managers))

        for _ in range(self.config.k_i):
            self._each_voter(signup)
            self._produce()
        self._produce_until(self.config.open_height)

    def _voting(self):
        self._phase("Voting")
        for i, voter in enumerate(self.voters):
            if self._late(i):
                for _ in range(self.config.k_i):
                    self._receipt(f"voter:{i}", "SignUp", voter.signup_round(self.managers))
        for custodian in self.custodians[:self.faults.early_disclosers]:
            logger.warning(f"{custodian.name} discloses its share while voting is open")
            self._receipt(custodian.name, "RevealShare", custodian.reveal_share())

        rounds = max((len(plan.votes) for plan in self.plans), default=0)
        for round_ in range(rounds):
            def cast(i: int, voter: Voter):
                plan = self.plans[i]
                if round_ >= len(plan.votes):
                    return
                try:
                    voter.vote(plan.votes[round_], validate=plan.validate)
                except ValidationError as e:
                    logger.warning(f"voter:{i} could not vote: {e}")

            self._each_voter(cast)
            self._produce()
            self._record_tickets(round_)
        if self.faults.forged_ballots:
            self._flood()
        self._produce_until(self.config.close_height - 1)

    def _record_tickets(self, round_: int):
        for i, voter in enumerate(self.voters):
            if round_ < len(self.plans[i].votes) and len(voter.tickets) > round_:
                self._receipt(f"voter:{i}", "Vote", voter.tickets[round_].receipt)

    def _flood(self):
        """One block of random signatures through the proxy; times forging and on-ledger rejection."""
        if self.ledger.height + 1 >= self.config.close_height:
            logger.warning("Forged ballots land after voting closed and are rejected before verification")
        ring = self.ledger.query(BALLOT_BOX, "ring")
        rng = derive_rng(self.config.seed, "forger")
        started = time.perf_counter()
        forged = []
        for _ in range(self.faults.forged_ballots):
            if self.config.threshold:
                plaintext = encode_plaintext(0, rng.randbytes(SALT_SIZE))
                ballot = ciphertext_to_bytes(self.curve, encrypt_ballot(self.curve, self.ek, plaintext, rng))
            else:
                ballot = rng.randbytes(32)
            forged.append((_forge_signature(self.curve, ring, rng), ballot))
        self.timings["forge"] = time.perf_counter() - started

        for signature, ballot in forged:
            self.proxy.cast(signature, ballot)
        started = time.perf_counter()
        block = self._produce()
        self.timings["verify"] = time.perf_counter() - started
        accepted = sum(1 for record in self.ledger.audit(block.height, block.height)
                       if record["method"] == "Vote" and record["status"] == "OK")
        self._record("flood", ballots=len(forged), accepted=accepted)
        logger.info(f"Flood of {len(forged)} forged ballots: {accepted} accepted, "
                    f"forge {self.timings['forge']:.3f}s, verify {self.timings['verify']:.3f}s")

    def _tally(self):
        self._phase("Tally")
        self._produce_until(self.config.close_height - 1)
        if self.config.threshold:
            available = self.custodians[:len(self.custodians) - self.faults.withholders]
            for custodian in self.custodians[len(available):]:
                logger.warning(f"{custodian.name} withholds its share")
            # K_e reveals first; the rest only if those do not rebuild the key
            self._reveal(available[:self.config.k_e])
            self._produce()
            if available[self.config.k_e:] and self.ledger.query(CONF_MANAGER, "status") is not KeyStatus.DECRYPTABLE:
                self._reveal(available[self.config.k_e:])
                self._produce()
        else:
            for i, voter in enumerate(self.voters):
                if self.plans[i].redeem:
                    self._receipt(f"voter:{i}", "Redeem", voter.redeem())
            self._produce()
        self._produce_until(self.config.tally_close_height)
        if self.organizer.result_receipt is not None and self.ledger.outcome(self.organizer.result_receipt) is None:
            self._produce()

    def _reveal(self, custodians: Sequence[KeyCustodian]):
        for custodian in custodians:
            corrupt = self.custodians.index(custodian) < self.faults.corrupt_shares
            value = (custodian.share.value + 1) % self.curve.order if corrupt else None
            self._receipt(custodian.name, "RevealShare", custodian.reveal_share(value))

    def _status(self) -> SessionStatus:
        if self.ledger.query(BALLOT_BOX, "result") is not None:
            return SessionStatus.TALLIED
        if self.config.threshold:
            key_status = self.ledger.query(CONF_MANAGER, "status")
            if key_status is KeyStatus.UNDECRYPTABLE:
                revealed = len(self.ledger.query(CONF_MANAGER, "revealed"))
                return SessionStatus.CORRUPT_SHARES if revealed >= self.config.k_e else SessionStatus.UNDECRYPTABLE
        return SessionStatus.INCOMPLETE

    def run(self) -> SessionTranscript:
        started = time.perf_counter()
        self._setup()
        self._encryption()
        self._registration()
        self._voting()
        self._tally()
        self.timings["total"] = time.perf_counter() - started

        status = self._status()
        breached = self.config.threshold and disclosed_key(self.ledger.blocks) is not None
        if breached:
            logger.warning("Enough shares were disclosed before close to decrypt ballots during voting")
        self._record("end", status=status.value, confidentiality_breached=breached)
        logger.info(f"Session finished at height {self.ledger.height}: {status.value}")
        return SessionTranscript(
            config=self.config,
            ledger=self.ledger,
            status=status,
            result=self.organizer.result,
            posted=self.ledger.query(BALLOT_BOX, "result"),
            counters=self.counters,
            events=self.events,
            voters=self.voters,
            custodians=self.custodians,
            timings=self.timings,
            confidentiality_breached=breached,
        )


def run_session(
    config: SessionConfig,
    plans: Sequence[VoterPlan],
    faults: Optional[SessionFaults] = None,
    curve: Optional[EllipticCurve] = None,
    verifiers: Optional[Sequence[IdentityVerifier]] = None,
    parallel_voters: bool = False,
) -> SessionTranscript:
    """Run every phase of a session from genesis to the posted result."""
    return SessionRunner(config, plans, faults, curve, verifiers, parallel_voters).run()
