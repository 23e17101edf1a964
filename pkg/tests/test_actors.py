import json
import random

import pytest

from src.actors import (
    IdentityManager, Organizer, SessionConfig, SessionFaults, SessionStatus, TallyResult, Voter, VoterPlan,
    disclosed_key, label_from_id_data, load_roster_csv, read_chain, run_session, tally_oracle, verify_tally,
)
from src.contracts import BALLOT_BOX, ID_STORAGE, make_genesis
from src.errors import IntegrityError, ValidationError
from src.ledger.ledger import Ledger
from src.ledger.transaction import account_id
from src.providers.identity_verifiers import AllowListVerifier, HmacTokenVerifier, canonical_email
from src.providers.proxy_transaction_provider import AnonymizationProxy, ProxyTicket
from tests.conftest import session_config, voter_plans

CHOICES = [0, 1, 1, 0, 1]


def statuses(ledger, method):
    return [r["status"] for r in ledger.audit() if r["method"] == method]


class TestSessionConfig:
    def test_defaults_come_from_config_file(self):
        config = SessionConfig.from_dict({})
        assert (config.open_height, config.close_height, config.tally_close_height) == (10, 20, 30)
        assert config.threshold and config.k_e == 2 and config.n_e == 3
        assert config.proxy_batch_size == 1

    @pytest.mark.parametrize("overrides", [
        {"close_height": 6},
        {"open_height": 4},
        {"close_height": 7},
        {"k_i": 2, "n_i": 1},
        {"k_e": 4, "n_e": 3},
        {"choices": ["a", "a"]},
        {"seed": -1},
        {"proxy_batch_size": 0},
        {"mode": "SECRET"},
        {"colour": "blue"},
    ])
    def test_rejected(self, overrides):
        with pytest.raises(ValidationError):
            session_config(**overrides)

    def test_vote_claim_ignores_key_threshold(self):
        assert not session_config(mode="VOTE_CLAIM", k_e=9, n_e=1).threshold

    def test_onchain_fields(self):
        onchain = session_config().to_onchain()
        assert "seed" not in onchain and "n_i" not in onchain
        assert onchain["mode"] == "THRESHOLD" and onchain["choices"] == ["yes", "no"]

    def test_file(self, tmp_path):
        path = tmp_path / "session.json"
        path.write_text(json.dumps(session_config(k_e=3, n_e=5).to_dict()))
        assert SessionConfig.from_file(path) == session_config(k_e=3, n_e=5)
        with pytest.raises(ValidationError):
            SessionConfig.from_file(tmp_path / "absent.json")

    def test_roster_csv(self, tmp_path):
        path = tmp_path / "roster.csv"
        path.write_text("email,token,choice\nA@Example.org,,1\nb@example.org,tok,\n\n")
        plans = load_roster_csv(path)
        assert [(p.email, p.token, p.votes) for p in plans] == [("A@Example.org", None, [1]), ("b@example.org", "tok", [])]
        path.write_text("c@example.org,,maybe\n")
        with pytest.raises(ValidationError):
            load_roster_csv(path)

    def test_tally_result_parsing(self):
        assert TallyResult.from_dict({"counts": {"yes": "2"}}).to_dict() == {"counts": {"yes": 2}, "invalid": 0,
                                                                               "unclaimed": 0}
        with pytest.raises(ValidationError):
            TallyResult.from_dict({"yes": 2})


class TestIdentity:
    def test_labels_ignore_case_and_whitespace(self):
        assert label_from_id_data(b" Alice@Example.org ") == label_from_id_data(b"alice@example.org|token")
        with pytest.raises(ValidationError):
            canonical_email(b"not-an-email")

    def test_allow_list(self):
        verifier = AllowListVerifier(["alice@example.org"])
        assert verifier.verify(b"ALICE@example.org")
        assert not verifier.verify(b"mallory@example.org")
        assert not verifier.verify(b"\xff\xfe")

    def test_hmac_tokens(self):
        verifier = HmacTokenVerifier(b"registrar-secret-key")
        assert verifier.verify(verifier.issue("alice@example.org"))
        assert not verifier.verify(b"alice@example.org")
        assert not verifier.verify(b"alice@example.org|" + verifier.token("bob@example.org").encode())
        with pytest.raises(ValidationError):
            HmacTokenVerifier(b"short")


class TestVoterClient:
    @pytest.fixture
    def voter(self, deployment, toy, provider):
        deployment.setup()
        deployment.publish_keys()
        proxy = AnonymizationProxy(provider, 1)
        voter = Voter(b"alice@example.org", toy, proxy, provider, random.Random(5))
        manager = IdentityManager("im0", AllowListVerifier(["alice@example.org"]), toy, provider)
        voter.signup([manager])
        deployment.produce()
        return voter

    def test_cannot_vote_before_open(self, voter):
        with pytest.raises(ValidationError):
            voter.vote(0)

    def test_vote_and_receipt(self, deployment, voter):
        deployment.advance_to(6)
        with pytest.raises(ValidationError):
            voter.vote(2)
        ticket = voter.vote(1)
        assert not voter.check_receipt(ticket)
        deployment.produce()
        assert voter.check_receipt(ticket)
        assert voter.check_receipt()
        forged = ProxyTicket(ticket.signature, b"\x00" + ticket.ballot[1:], ticket.receipt, ticket.position)
        assert not voter.check_receipt(forged)
        assert not voter.check_receipt(ProxyTicket(ticket.signature, ticket.ballot))

    def test_unvalidated_choice_still_cast(self, deployment, voter):
        deployment.advance_to(6)
        ticket = voter.vote(7, validate=False)
        deployment.produce()
        assert voter.check_receipt(ticket)

    def test_rejected_identity(self, deployment, toy, provider):
        deployment.setup()
        manager = IdentityManager("im0", AllowListVerifier([]), toy, provider)
        voter = Voter(b"eve@example.org", toy, AnonymizationProxy(provider, 1), provider, random.Random(6))
        assert voter.signup([manager]) == []
        assert voter.registration_failed
        assert manager.rejections == [b"eve@example.org"]


class TestHonestSessions:
    def test_threshold(self, toy):
        transcript = run_session(session_config(), voter_plans(CHOICES), curve=toy)
        assert transcript.status is SessionStatus.TALLIED
        assert transcript.result.to_dict() == {"counts": {"yes": 2, "no": 3}, "invalid": 0, "unclaimed": 0}
        assert transcript.posted == transcript.result.to_dict()
        assert not transcript.confidentiality_breached
        assert all(voter.check_receipt() for voter in transcript.voters)

        report = verify_tally(transcript.ledger.blocks)
        assert report.verifiable and report.ring_size == 5 and report.ballots == 5
        assert tally_oracle(transcript.ledger.blocks) == transcript.result
        assert disclosed_key(transcript.ledger.blocks) is None

    def test_height_plan(self, toy):
        transcript = run_session(session_config(), voter_plans(CHOICES), curve=toy)
        heights = {method: {r["height"] for r in transcript.ledger.audit() if r["method"] == method}
                   for method in ("Setup", "CommitShare", "PublishKey", "SignUp", "Vote", "RevealShare", "SetResult")}
        assert heights == {"Setup": {1}, "CommitShare": {2}, "PublishKey": {3}, "SignUp": {4}, "Vote": {7},
                           "RevealShare": {9}, "SetResult": {10}}
        assert transcript.ledger.height == 12

    def test_transcript(self, toy, tmp_path):
        transcript = run_session(session_config(), voter_plans(CHOICES), curve=toy)
        events = [json.loads(line) for line in transcript.to_lines().splitlines()]
        phases = [e["phase"] for e in events if e["kind"] == "phase"]
        assert phases == ["Setup", "Encryption", "Registration", "Voting", "Tally"]
        assert events[-1] == {"kind": "end", "height": 12, "status": "TALLIED", "confidentiality_breached": False}
        assert sum(1 for e in events if e["kind"] == "receipt" and e["method"] == "Vote") == 5
        path = tmp_path / "transcript.jsonl"
        transcript.save(path)
        assert path.read_text() == transcript.to_lines()

        summary = transcript.summary()
        assert summary["status"] == "TALLIED" and summary["height"] == 12
        assert summary["reads"]["Encryption"] == 3 and summary["reads"]["Voting"] == 5

    def test_vote_claim(self, toy):
        plans = voter_plans(CHOICES)
        plans[2].redeem = False
        transcript = run_session(session_config(mode="VOTE_CLAIM"), plans, curve=toy)
        assert transcript.status is SessionStatus.TALLIED
        assert transcript.result.to_dict() == {"counts": {"yes": 2, "no": 2}, "invalid": 0, "unclaimed": 1}
        assert not transcript.custodians
        assert statuses(transcript.ledger, "Redeem") == ["OK"] * 4
        assert verify_tally(transcript.ledger.blocks).verifiable
        assert transcript.ledger.height == 13

    def test_organizer_events(self, toy):
        transcript = run_session(session_config(event_mode="ORGANIZER"), voter_plans(CHOICES), curve=toy)
        assert transcript.status is SessionStatus.TALLIED
        fired = [(r["height"], r["value"]) for r in transcript.ledger.audit() if r["method"] == "FireEvent"]
        assert fired == [(6, "OPEN"), (9, "CLOSE"), (12, "TALLY_CLOSE")]
        assert all(not block.events for block in transcript.ledger.blocks)
        assert tally_oracle(transcript.ledger.blocks) == transcript.result

    def test_two_of_two_identity_managers(self, toy):
        transcript = run_session(session_config(k_i=2, n_i=2), voter_plans(CHOICES), curve=toy)
        assert transcript.status is SessionStatus.TALLIED
        details = [r["detail"].split()[0] for r in transcript.ledger.audit() if r["method"] == "SignUp"]
        assert details.count("PENDING") == 5 and details.count("COMMITTED") == 5
        assert len(transcript.ledger.query(ID_STORAGE, "entries")) == 5

    def test_invalid_choice_counted_invalid(self, toy):
        plans = voter_plans(CHOICES)
        plans[0] = VoterPlan(email=plans[0].email, votes=[7], validate=False)
        transcript = run_session(session_config(), plans, curve=toy)
        assert transcript.result.invalid == 1
        assert sum(transcript.result.counts.values()) == 4

    def test_batched_proxy(self, toy):
        transcript = run_session(session_config(proxy_batch_size=2), voter_plans(CHOICES), curve=toy)
        assert transcript.status is SessionStatus.TALLIED
        assert transcript.result.counts == {"yes": 2, "no": 3}
        batches = [tx for b in transcript.ledger.blocks for tx in b.transactions if tx.method == "VoteBatch"]
        assert [len(tx.args) // 2 for tx in batches] == [2, 2, 1]
        assert statuses(transcript.ledger, "Vote") == ["OK"] * 5
        assert all(voter.check_receipt() for voter in transcript.voters)

    def test_parallel_voters(self, toy):
        transcript = run_session(session_config(), voter_plans(CHOICES), curve=toy, parallel_voters=True)
        assert transcript.status is SessionStatus.TALLIED
        assert transcript.result.counts == {"yes": 2, "no": 3}

    def test_no_voters(self, toy):
        transcript = run_session(session_config(), [], curve=toy)
        assert transcript.status is SessionStatus.TALLIED
        assert transcript.result.to_dict() == {"counts": {"yes": 0, "no": 0}, "invalid": 0, "unclaimed": 0}

    def test_deterministic_from_seed(self, toy):
        first = run_session(session_config(seed=42), voter_plans(CHOICES), curve=toy)
        second = run_session(session_config(seed=42), voter_plans(CHOICES), curve=toy)
        other = run_session(session_config(seed=43), voter_plans(CHOICES), curve=toy)
        assert first.ledger.export_lines() == second.ledger.export_lines()
        assert first.ledger.export_lines() != other.ledger.export_lines()

    def test_exported_chain_recounts(self, toy, tmp_path):
        transcript = run_session(session_config(), voter_plans(CHOICES), curve=toy)
        path = tmp_path / "chain.jsonl"
        transcript.ledger.export_chain(path)
        blocks = Ledger.load_chain(path)
        assert verify_tally(blocks).verifiable
        assert read_chain(blocks).posted == transcript.posted


class TestMisbehavingParticipants:
    def test_unregistered_voter(self, toy):
        plans = voter_plans(CHOICES)
        plans[4].register = False
        transcript = run_session(session_config(), plans, curve=toy)
        assert transcript.voters[4].registration_failed
        assert statuses(transcript.ledger, "Vote").count("BAD_SIGNATURE") == 1
        assert transcript.result.counts == {"yes": 2, "no": 2}
        assert not transcript.voters[4].check_receipt()
        assert verify_tally(transcript.ledger.blocks).verifiable

    def test_hmac_registration(self, toy):
        verifier = HmacTokenVerifier(b"registrar-secret-key")
        plans = voter_plans(CHOICES)
        for plan in plans[:4]:
            plan.token = verifier.token(plan.email)
        plans[4].token = "0" * 64
        transcript = run_session(session_config(), plans, curve=toy, verifiers=[verifier])
        assert len(transcript.ledger.query(BALLOT_BOX, "ring")) == 4
        assert transcript.result.counts == {"yes": 2, "no": 2}

    def test_wrong_number_of_verifiers(self, toy):
        with pytest.raises(ValidationError):
            run_session(session_config(n_i=2), voter_plans(CHOICES), curve=toy,
                        verifiers=[AllowListVerifier([])])

    def test_late_signup_refused(self, toy):
        transcript = run_session(session_config(), voter_plans(CHOICES), SessionFaults(late_signups=1), curve=toy)
        assert statuses(transcript.ledger, "SignUp").count("REGISTRATION_CLOSED") == 1
        assert len(transcript.ledger.query(BALLOT_BOX, "ring")) == 4
        assert transcript.result.counts == {"yes": 2, "no": 2}

    def test_doctored_result_detected(self, toy):
        transcript = run_session(session_config(), voter_plans(CHOICES), SessionFaults(doctor_result=True), curve=toy)
        assert transcript.status is SessionStatus.TALLIED
        assert transcript.posted["counts"] == {"yes": 3, "no": 3}
        report = verify_tally(transcript.ledger.blocks)
        assert not report.matches and not report.verifiable
        assert report.oracle == transcript.result

    def test_forged_ballot_flood(self, toy):
        transcript = run_session(session_config(close_height=10, tally_close_height=13), voter_plans(CHOICES),
                                 SessionFaults(forged_ballots=20), curve=toy)
        flood = [e for e in transcript.events if e["kind"] == "flood"]
        assert flood == [{"kind": "flood", "height": 8, "ballots": 20, "accepted": 0}]
        assert {"forge", "verify", "total"} <= set(transcript.timings)
        assert transcript.result.counts == {"yes": 2, "no": 3}

    def test_fault_counts_bounded(self, toy):
        with pytest.raises(ValidationError):
            run_session(session_config(), voter_plans(CHOICES), SessionFaults(withholders=2, corrupt_shares=2), curve=toy)
        with pytest.raises(ValidationError):
            run_session(session_config(), voter_plans(CHOICES), SessionFaults(late_signups=6), curve=toy)

    def test_organizer_cannot_tally_early(self, deployment, toy, provider):
        deployment.setup()
        with pytest.raises(ValidationError):
            Organizer(toy, provider).tally()


class TestThresholdTolerance:
    """Failure happens exactly at K_e early disclosers, or at N_e - K_e + 1 unusable shares."""

    CASES = [(2, 3), (3, 5), (4, 7)]

    @staticmethod
    def run(toy, k, n, **faults):
        return run_session(session_config(k_e=k, n_e=n), voter_plans([0, 1, 1]), SessionFaults(**faults), curve=toy)

    @pytest.mark.parametrize("k,n", CASES)
    def test_early_disclosure(self, toy, k, n):
        assert not self.run(toy, k, n, early_disclosers=k - 1).confidentiality_breached
        breached = self.run(toy, k, n, early_disclosers=k)
        assert breached.confidentiality_breached
        assert statuses(breached.ledger, "RevealShare").count("EARLY_DISCLOSURE") == k
        assert breached.status is SessionStatus.TALLIED

    @pytest.mark.parametrize("k,n", CASES)
    def test_withheld_shares(self, toy, k, n):
        tolerated = self.run(toy, k, n, withholders=n - k)
        assert tolerated.status is SessionStatus.TALLIED
        assert tolerated.result.counts == {"yes": 1, "no": 2}
        assert self.run(toy, k, n, withholders=n - k + 1).status is SessionStatus.UNDECRYPTABLE

    @pytest.mark.parametrize("k,n", CASES)
    def test_corrupt_shares(self, toy, k, n):
        tolerated = self.run(toy, k, n, corrupt_shares=n - k)
        assert tolerated.status is SessionStatus.TALLIED
        assert tolerated.result.counts == {"yes": 1, "no": 2}
        assert self.run(toy, k, n, corrupt_shares=n - k + 1).status is SessionStatus.CORRUPT_SHARES

    def test_undecryptable_session_cannot_be_recounted(self, toy):
        transcript = self.run(toy, 2, 3, withholders=2)
        assert transcript.posted is None and transcript.result is None
        report = verify_tally(transcript.ledger.blocks)
        assert report.oracle is None and report.error
        assert not report.verifiable


def double_vote_session(curve, seed: int, overwrite: bool):
    rng = random.Random(seed)
    choices = [rng.randrange(2) for _ in range(4)]
    plans = voter_plans(choices)
    second = 1 - choices[0]
    plans[0].votes.append(second)
    transcript = run_session(session_config(seed=seed, overwrite=overwrite), plans, curve=curve)
    expected = {"yes": 0, "no": 0}
    for choice in [second if overwrite else choices[0]] + choices[1:]:
        expected[("yes", "no")[choice]] += 1
    return transcript, expected


class TestDoubleVoting:
    @pytest.mark.parametrize("seed", range(3))
    def test_counted_once(self, k1, seed):
        transcript, expected = double_vote_session(k1, seed, overwrite=False)
        assert statuses(transcript.ledger, "Vote").count("DOUBLE_VOTE") == 1
        assert transcript.result.counts == expected

    @pytest.mark.parametrize("seed", range(3))
    def test_later_ballot_wins_with_overwrite(self, k1, seed):
        transcript, expected = double_vote_session(k1, seed, overwrite=True)
        details = [r["detail"] for r in transcript.ledger.audit() if r["method"] == "Vote"]
        assert details.count("REPLACED 0") == 1
        assert transcript.result.counts == expected

    @pytest.mark.slow
    @pytest.mark.parametrize("overwrite", [False, True])
    def test_hundred_sessions(self, k1, overwrite):
        for seed in range(100):
            transcript, expected = double_vote_session(k1, 1000 + seed, overwrite=overwrite)
            vote_statuses = statuses(transcript.ledger, "Vote")
            details = [r["detail"] for r in transcript.ledger.audit() if r["method"] == "Vote"]
            if overwrite:
                assert "DOUBLE_VOTE" not in vote_statuses
                assert sum(d.startswith("REPLACED") for d in details) == 1
            else:
                assert vote_statuses.count("DOUBLE_VOTE") == 1
            assert transcript.result.counts == expected


def random_session(curve, seed: int, doctor: bool = False):
    rng = random.Random(seed)
    choices = ["a", "b", "c"][:rng.randint(1, 3)]
    mode = rng.choice(["THRESHOLD", "VOTE_CLAIM"])
    plans = voter_plans([rng.randrange(len(choices)) for _ in range(rng.randint(1, 50))])
    config = session_config(seed=seed, mode=mode, choices=choices)
    return run_session(config, plans, SessionFaults(doctor_result=doctor), curve=curve)


class TestUniversalVerifiability:
    @pytest.mark.parametrize("seed", range(4))
    def test_recount_matches(self, toy, seed):
        transcript = random_session(toy, seed)
        assert transcript.status is SessionStatus.TALLIED
        assert tally_oracle(transcript.ledger.blocks).to_dict() == transcript.posted

    @pytest.mark.parametrize("seed", range(4))
    def test_doctoring_flagged(self, toy, seed):
        assert not verify_tally(random_session(toy, seed, doctor=True).ledger.blocks).matches

    @pytest.mark.slow
    def test_hundred_sessions(self, toy):
        for seed in range(100):
            honest = random_session(toy, 500 + seed)
            assert tally_oracle(honest.ledger.blocks).to_dict() == honest.posted
            assert not verify_tally(random_session(toy, 500 + seed, doctor=True).ledger.blocks).matches

    def test_chain_without_setup(self, toy, provider):
        genesis = make_genesis(toy, account_id("org"), [account_id("im")], [account_id("cm")])
        ledger = provider.deploy(genesis)
        ledger.produce_block()
        with pytest.raises(ValidationError):
            tally_oracle(ledger.blocks)
        assert verify_tally(ledger.blocks).error
        with pytest.raises(IntegrityError):
            read_chain(ledger.blocks[1:])
