import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

from config import PROJECT_ROOT
from src.actors.organizer import run_session
from src.actors.session import SessionConfig, SessionFaults, SessionTranscript, VoterPlan
from src.actors.tally import verify_tally
from src.contracts.ballot_box import BALLOT_BOX
from src.crypto.curve import EllipticCurve
from src.errors import ValidationError

logger = logging.getLogger(__name__)

SCENARIO_DIR = PROJECT_ROOT / "scenarios"

ACTIONS = ("signup", "vote", "redeem", "fault")
FAULT_KINDS = tuple(SessionFaults.__dataclass_fields__)


def resolve_scenario(name_or_path: str) -> Path:
    """A scenario file path, or the name of a bundled fixture under scenarios/."""
    path = Path(name_or_path)
    if path.exists():
        return path
    bundled = SCENARIO_DIR / (path.name if path.suffix == ".json" else f"{path.name}.json")
    if bundled.exists():
        return bundled
    raise ValidationError(f"No scenario file or bundled scenario named {name_or_path!r}")


@dataclass
class Check:
    name: str
    expected: Any
    actual: Any

    @property
    def passed(self) -> bool:
        return self.expected == self.actual

    def to_dict(self) -> dict:
        return {"check": self.name, "expected": self.expected, "actual": self.actual, "passed": self.passed}


@dataclass
class ScenarioOutcome:
    name: str
    transcript: SessionTranscript
    checks: list[Check] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    def to_dict(self) -> dict:
        return {
            "scenario": self.name,
            "passed": self.passed,
            "checks": [c.to_dict() for c in self.checks],
            "session": self.transcript.summary(),
        }


@dataclass
class ScenarioScript:
    """
    A declared electorate, an ordered list of actions and the expected outcome.

    Actions: ``signup`` (only listed voters register when any signup action is
    present), ``vote`` (choice per voter, in order), ``redeem`` (vote-claim
    sessions; only listed voters redeem when any redeem action is present),
    ``fault`` (one of the session fault kinds with a count).
    """
    name: str
    session: dict
    voters: list[str]
    actions: list[dict] = field(default_factory=list)
    expect: dict = field(default_factory=dict)
    description: str = ""

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioScript":
        try:
            voters = data["voters"]
            if isinstance(voters, dict):
                domain = voters.get("domain", "example.org")
                voters = [f"voter{i}@{domain}" for i in range(int(voters["count"]))]
            script = cls(
                name=data["name"],
                session=dict(data.get("session", {})),
                voters=[str(v) for v in voters],
                actions=list(data.get("actions", [])),
                expect=dict(data.get("expect", {})),
                description=data.get("description", ""),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise ValidationError(f"Malformed scenario: {e}") from e
        script.validate()
        return script

    @classmethod
    def load(cls, name_or_path: str) -> "ScenarioScript":
        path = resolve_scenario(name_or_path)
        try:
            return cls.from_dict(json.loads(path.read_text()))
        except json.JSONDecodeError as e:
            raise ValidationError(f"Scenario {path} is not JSON: {e}") from e

    def _targets(self, action: dict) -> list[str]:
        if action.get("voters") == "all":
            return list(self.voters)
        targets = action.get("voters", [action["voter"]] if "voter" in action else [])
        return [self.voters[t] if isinstance(t, int) else t for t in targets]

    def validate(self):
        if len(set(self.voters)) != len(self.voters):
            raise ValidationError(f"Scenario {self.name} declares a voter twice")
        declared = set(self.voters)
        for position, action in enumerate(self.actions):
            kind = action.get("do")
            if kind not in ACTIONS:
                raise ValidationError(f"Action {position} of {self.name}: unknown action {kind!r}")
            if kind == "fault":
                if action.get("kind") not in FAULT_KINDS:
                    raise ValidationError(f"Action {position} of {self.name}: unknown fault {action.get('kind')!r}")
                continue
            try:
                targets = self._targets(action)
            except IndexError as e:
                raise ValidationError(f"Action {position} of {self.name} names a voter index out of range") from e
            undeclared = set(targets) - declared
            if not targets or undeclared:
                raise ValidationError(f"Action {position} of {self.name} references undeclared voters {undeclared}")
            if kind == "vote" and not isinstance(action.get("choice"), int):
                raise ValidationError(f"Action {position} of {self.name}: vote needs an integer choice")

    def compile(self) -> tuple[list[VoterPlan], SessionFaults]:
        """Voter plans and faults the session runner executes."""
        plans = {email: VoterPlan(email=email) for email in self.voters}
        faults = SessionFaults()
        by_kind = Counter(action["do"] for action in self.actions)
        if by_kind["signup"]:
            for plan in plans.values():
                plan.register = False
        if by_kind["redeem"]:
            for plan in plans.values():
                plan.redeem = False
        for action in self.actions:
            kind = action["do"]
            if kind == "fault":
                value = action.get("count", True)
                setattr(faults, action["kind"], value if isinstance(value, bool) else int(value))
                continue
            for email in self._targets(action):
                plan = plans[email]
                if kind == "signup":
                    plan.register = True
                elif kind == "vote":
                    plan.votes.append(action["choice"])
                    plan.validate = action.get("validate", plan.validate)
                else:
                    plan.redeem = True
        return list(plans.values()), faults

    def run(self, curve: Optional[EllipticCurve] = None, seed: Optional[int] = None) -> ScenarioOutcome:
        session = dict(self.session)
        if seed is not None:
            session["seed"] = seed
        config = SessionConfig.from_dict(session)
        plans, faults = self.compile()
        logger.info(f"Scenario {self.name}: {len(plans)} voters, {len(self.actions)} actions")
        transcript = run_session(config, plans, faults, curve=curve)
        outcome = ScenarioOutcome(self.name, transcript, self._check(transcript))
        for check in outcome.checks:
            if not check.passed:
                logger.warning(f"Scenario {self.name}: {check.name} expected {check.expected}, got {check.actual}")
        return outcome

    def _check(self, transcript: SessionTranscript) -> list[Check]:
        ledger = transcript.ledger
        records = ledger.audit()
        observed: dict[str, Any] = {}
        for name in self.expect:
            if name == "status":
                observed[name] = transcript.status.value
            elif name in ("counts", "invalid", "unclaimed"):
                result = transcript.posted or {}
                observed[name] = result.get(name)
            elif name == "reverts":
                codes = Counter(r["status"] for r in records if r["status"] != "OK")
                observed[name] = {code: codes.get(code, 0) for code in self.expect[name]}
            elif name == "replacements":
                observed[name] = sum(1 for r in records if r["method"] == "Vote" and r["detail"].startswith("REPLACED"))
            elif name == "ballots":
                observed[name] = len(ledger.query(BALLOT_BOX, "ballots"))
            elif name in ("oracle_matches", "bad_signatures"):
                report = verify_tally(ledger.blocks)
                observed[name] = report.matches if name == "oracle_matches" else report.bad_signatures
            elif name == "confidentiality_breached":
                observed[name] = transcript.confidentiality_breached
            elif name == "flood_accepted":
                flood = next((e for e in transcript.events if e["kind"] == "flood"), None)
                observed[name] = flood["accepted"] if flood else None
            elif name == "receipts_verified":
                observed[name] = all(v.check_receipt(t) for v in transcript.voters for t in v.tickets
                                     if t.receipt is not None and ledger.outcome(t.receipt) is not None
                                     and ledger.outcome(t.receipt).ok)
            else:
                raise ValidationError(f"Scenario {self.name} expects unknown property {name!r}")
        return [Check(name, self.expect[name], observed[name]) for name in self.expect]
