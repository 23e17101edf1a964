#!/usr/bin/env python3
"""
ringvote - linkable ring signatures and ledger-backed voting sessions
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional

from config import config
from src.actors.organizer import run_session
from src.actors.session import SessionConfig, load_roster_csv
from src.actors.tally import verify_tally
from src.crypto.curve import load_curve
from src.crypto.lsag import PublicKeyRing, RingSignature, check_signature, keygen, link, sign
from src.errors import IntegrityError, RevertError, RingVoteError, ValidationError
from src.ledger.ledger import Ledger
from src.metrics.reports import (
    measure_session, phase_costs, render_costs_table, render_json, render_storage_table, storage_report,
)
from src.providers.ledger_provider import LedgerProvider
from src.scenarios.runner import ScenarioScript
from utils.common_utils import bytes_to_int, derive_rng, from_hex, system_rng

logger = logging.getLogger(__name__)

EXIT_FAILURE = 1
EXIT_VALIDATION = 2
EXIT_REVERT = 3
EXIT_INTEGRITY = 4


def configure_logging(level: str, to_stderr: bool):
    # Configure logging
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.INFO),
        format=config.LOG_FORMAT,
        handlers=[
            logging.StreamHandler(sys.stderr if to_stderr else sys.stdout)
        ],
        force=True,
    )


def emit(args, payload, text: Optional[str] = None):
    """JSON on stdout with --json, otherwise the human rendering."""
    if args.json:
        print(render_json(payload))
    else:
        print(text if text is not None else render_json(payload))


def _rng(args, label: str):
    return system_rng() if args.seed is None else derive_rng(args.seed, label)


def _read_text(path: str) -> str:
    try:
        return Path(path).read_text().strip()
    except OSError as e:
        raise ValidationError(f"Cannot read {path}: {e}") from e


def _read_json(path: str):
    try:
        return json.loads(_read_text(path))
    except json.JSONDecodeError as e:
        raise ValidationError(f"{path} is not JSON: {e}") from e


def _read_sk(path: str) -> int:
    """Secret key file: keygen JSON or a bare hex scalar."""
    text = _read_text(path)
    if text.startswith("{"):
        text = str(_read_json(path).get("sk", ""))
    if not text:
        raise ValidationError(f"No secret key in {path}")
    return bytes_to_int(from_hex(text))


def _read_signature(curve, path: str) -> RingSignature:
    return RingSignature.from_bytes(curve, from_hex(_read_text(path)))


def _read_chain(path: str) -> Ledger:
    """Replay an exported chain; any divergence is an integrity failure."""
    return LedgerProvider().load(Ledger.load_chain(Path(path)))


# Commands

def cmd_keygen(args) -> int:
    curve = load_curve(args.curve)
    keypair = keygen(curve, _rng(args, "keygen"))
    record = {"curve": curve.name, "sk": curve.scalar_to_bytes(keypair.sk).hex(),
              "pk": curve.serialize_point(keypair.pk).hex()}
    if args.out:
        Path(args.out).write_text(json.dumps(record, indent=2))
        logger.info(f"Key pair written to {args.out}")
    if args.ring:
        ring_path = Path(args.ring)
        ring = PublicKeyRing.from_dict(curve, _read_json(args.ring)) if ring_path.exists() else PublicKeyRing(curve)
        ring.append(keypair.pk)
        ring_path.write_text(json.dumps(ring.to_dict(), indent=2))
        logger.info(f"Public key appended to {args.ring} ({len(ring)} keys)")
    emit(args, record if not args.out else {"pk": record["pk"], "out": args.out}, record["pk"])
    return 0


def cmd_ring_sign(args) -> int:
    curve = load_curve(args.curve)
    ring = PublicKeyRing.from_dict(curve, _read_json(args.ring))
    sk = _read_sk(args.sk)
    message = Path(args.msg).read_bytes()
    signer_index = ring.index_of(curve.base_mul(sk))
    sig = sign(curve, sk, signer_index, ring, message, _rng(args, "sign"))
    encoded = sig.to_bytes(curve).hex()
    if args.out:
        Path(args.out).write_text(encoded)
    emit(args, {"signature": encoded, "ring_size": len(ring), "tag": sig.tag.hex()}, encoded)
    return 0


def cmd_ring_verify(args) -> int:
    curve = load_curve(args.curve)
    ring = PublicKeyRing.from_dict(curve, _read_json(args.ring))
    verification = check_signature(curve, ring, Path(args.msg).read_bytes(), _read_signature(curve, args.sig))
    emit(args, {"valid": bool(verification), "status": verification.status.value}, verification.status.value)
    return 0 if verification else EXIT_FAILURE


def cmd_ring_link(args) -> int:
    curve = load_curve(args.curve)
    linked = link(_read_signature(curve, args.sig1), _read_signature(curve, args.sig2))
    emit(args, {"linked": linked}, "linked" if linked else "not linked")
    return 0


def cmd_session_init(args) -> int:
    overrides = {}
    if args.mode:
        overrides["mode"] = args.mode
    if args.seed is not None:
        overrides["seed"] = args.seed
    session = SessionConfig.from_dict(overrides)
    Path(args.out).write_text(json.dumps(session.to_dict(), indent=2))
    emit(args, session.to_dict(), f"Session configuration written to {args.out}")
    return 0


def cmd_session_run(args) -> int:
    session = SessionConfig.from_file(Path(args.config))
    if args.seed is not None:
        session = SessionConfig.from_dict({**session.to_dict(), "seed": args.seed})
    plans = load_roster_csv(Path(args.roster))
    transcript = run_session(session, plans, curve=load_curve(args.curve))
    transcript.ledger.export_chain(Path(args.chain))
    if args.transcript:
        transcript.save(Path(args.transcript))
    if args.snapshot:
        transcript.ledger.save_snapshot(Path(args.snapshot))
    summary = transcript.summary()
    emit(args, summary, f"{summary['status']} at height {summary['height']}: {summary['posted']}")
    return 0


def cmd_session_tally(args) -> int:
    ledger = _read_chain(args.chain)
    report = verify_tally(ledger.blocks)
    emit(args, report.to_dict(),
         f"oracle {report.oracle.to_dict() if report.oracle else report.error}\n"
         f"posted {report.posted}\nmatches {report.matches}, bad signatures {report.bad_signatures}")
    if report.posted is not None and not report.verifiable:
        return EXIT_FAILURE
    return 0


def cmd_session_audit(args) -> int:
    ledger = _read_chain(args.chain)
    records = ledger.audit(args.start, args.end)
    lines = [f"{r['height']:>6} {r['position']:>4} {r['target']}.{r['method']} {r['status']} {r['detail']}"
             for r in records]
    emit(args, records, "\n".join(lines))
    return 0


def cmd_metrics_storage(args) -> int:
    reports = [storage_report(n) for n in args.n]
    emit(args, [r.to_dict() for r in reports], render_storage_table(reports))
    return 0


def cmd_metrics_phases(args) -> int:
    costs = phase_costs(args.m, args.k_i, args.n_e, args.k_e, vote_claim=args.vote_claim)
    payload = {"formula": [c.to_dict() for c in costs]}
    observed = None
    if args.chain:
        measurement = measure_session(_read_chain(args.chain).blocks)
        payload["observed"] = measurement.to_dict()
        observed = measurement.costs
    emit(args, payload, render_costs_table(costs, observed))
    return 0


def cmd_scenario_run(args) -> int:
    outcome = ScenarioScript.load(args.scenario).run(curve=load_curve(args.curve), seed=args.seed)
    lines = [f"{'PASS' if c.passed else 'FAIL'} {c.name}: expected {c.expected}, got {c.actual}"
             for c in outcome.checks]
    lines.append(f"scenario {outcome.name}: {'passed' if outcome.passed else 'FAILED'}")
    emit(args, outcome.to_dict(), "\n".join(lines))
    return 0 if outcome.passed else EXIT_FAILURE


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="machine-readable JSON on stdout")
    common.add_argument("--seed", type=int, help="seed for reproducible randomness")
    common.add_argument("--curve", help="built-in curve name or parameter file (default from config)")
    common.add_argument("--log-level", default=None, help="override the configured log level")

    parser = argparse.ArgumentParser(prog="ringvote", description=__doc__.strip())
    commands = parser.add_subparsers(dest="command", required=True)

    p = commands.add_parser("keygen", parents=[common], help="generate a key pair")
    p.add_argument("--out", help="write the key pair as JSON")
    p.add_argument("--ring", help="append the public key to this ring file")
    p.set_defaults(handler=cmd_keygen)

    ring = commands.add_parser("ring", help="ring signature tools").add_subparsers(dest="action", required=True)
    p = ring.add_parser("sign", parents=[common])
    p.add_argument("--ring", required=True)
    p.add_argument("--sk", required=True)
    p.add_argument("--msg", required=True)
    p.add_argument("--out")
    p.set_defaults(handler=cmd_ring_sign)
    p = ring.add_parser("verify", parents=[common])
    p.add_argument("--ring", required=True)
    p.add_argument("--msg", required=True)
    p.add_argument("--sig", required=True)
    p.set_defaults(handler=cmd_ring_verify)
    p = ring.add_parser("link", parents=[common])
    p.add_argument("--sig1", required=True)
    p.add_argument("--sig2", required=True)
    p.set_defaults(handler=cmd_ring_link)

    session = commands.add_parser("session", help="voting sessions").add_subparsers(dest="action", required=True)
    p = session.add_parser("init", parents=[common])
    p.add_argument("--out", required=True)
    p.add_argument("--mode", choices=["THRESHOLD", "VOTE_CLAIM"])
    p.set_defaults(handler=cmd_session_init)
    p = session.add_parser("run", parents=[common])
    p.add_argument("--config", required=True)
    p.add_argument("--roster", required=True, help="CSV rows email[,token[,choice]]")
    p.add_argument("--chain", default="chain.jsonl")
    p.add_argument("--transcript")
    p.add_argument("--snapshot")
    p.set_defaults(handler=cmd_session_run)
    p = session.add_parser("tally", parents=[common])
    p.add_argument("--chain", required=True)
    p.set_defaults(handler=cmd_session_tally)
    p = session.add_parser("audit", parents=[common])
    p.add_argument("--chain", required=True)
    p.add_argument("--from", dest="start", type=int, default=0)
    p.add_argument("--to", dest="end", type=int)
    p.set_defaults(handler=cmd_session_audit)

    metrics = commands.add_parser("metrics", help="cost reports").add_subparsers(dest="action", required=True)
    p = metrics.add_parser("storage", parents=[common])
    p.add_argument("--n", type=int, nargs="+", default=[10, 100, 1000])
    p.add_argument("--format", choices=["json", "table"], default="table")
    p.set_defaults(handler=cmd_metrics_storage)
    p = metrics.add_parser("phases", parents=[common])
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--k-i", type=int, default=1)
    p.add_argument("--n-e", type=int, default=3)
    p.add_argument("--k-e", type=int, default=2)
    p.add_argument("--vote-claim", action="store_true")
    p.add_argument("--chain", help="also measure an exported session chain")
    p.add_argument("--format", choices=["json", "table"], default="table")
    p.set_defaults(handler=cmd_metrics_phases)

    scenario = commands.add_parser("scenario", help="scripted scenarios").add_subparsers(dest="action", required=True)
    p = scenario.add_parser("run", parents=[common])
    p.add_argument("scenario", help="bundled scenario name or path to a scenario JSON file")
    p.set_defaults(handler=cmd_scenario_run)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "format", None) == "json":
        args.json = True
    configure_logging(args.log_level or config.LOG_LEVEL, to_stderr=args.json)
    try:
        return args.handler(args)
    except ValidationError as e:
        logger.error(f"Invalid input: {e}")
        return EXIT_VALIDATION
    except RevertError as e:
        logger.error(f"Reverted: {e}")
        return EXIT_REVERT
    except IntegrityError as e:
        logger.error(f"Integrity failure: {e}")
        return EXIT_INTEGRITY
    except (RingVoteError, OSError) as e:
        logger.error(f"Failed: {e}")
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
