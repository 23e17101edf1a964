"""
Protocol actors

Voters, identity managers, confidentiality managers (key custodians) and the
organizer, plus the session runner that drives them through every phase and
the chain-only tally oracle.
"""

from .custodian import KeyCustodian
from .identity_manager import IdentityManager, label_from_id_data
from .organizer import Organizer, SessionRunner, run_session
from .session import (
    SessionConfig, SessionFaults, SessionStatus, SessionTranscript, TallyResult, VoterPlan, load_roster_csv,
)
from .tally import VerifiabilityReport, count_ballots, disclosed_key, read_chain, tally_oracle, verify_tally
from .voter import Voter, decode_choice, encode_plaintext

__all__ = [
    'KeyCustodian',
    'IdentityManager',
    'label_from_id_data',
    'Organizer',
    'SessionRunner',
    'run_session',
    'SessionConfig',
    'SessionFaults',
    'SessionStatus',
    'SessionTranscript',
    'TallyResult',
    'VoterPlan',
    'load_roster_csv',
    'VerifiabilityReport',
    'count_ballots',
    'disclosed_key',
    'read_chain',
    'tally_oracle',
    'verify_tally',
    'Voter',
    'decode_choice',
    'encode_plaintext',
]
