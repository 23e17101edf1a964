"""
On-ledger contracts

ID Storage (voter roster), Ballot Box (ballot collection and session events)
and Confidentiality Manager (encryption key lifecycle), plus the genesis
factory that deploys them together.
"""

from .ballot_box import BALLOT_BOX, BallotBox, BoxConfig, ConfidentialityMode, EventMode, StoredBallot
from .conf_manager import CONF_MANAGER, ConfManager, KeyStatus
from .deployment import deploy_contracts, genesis_curve, make_genesis
from .id_storage import ID_STORAGE, IDStorage, load_roster, save_roster

__all__ = [
    'BALLOT_BOX',
    'BallotBox',
    'BoxConfig',
    'ConfidentialityMode',
    'EventMode',
    'StoredBallot',
    'CONF_MANAGER',
    'ConfManager',
    'KeyStatus',
    'deploy_contracts',
    'genesis_curve',
    'make_genesis',
    'ID_STORAGE',
    'IDStorage',
    'load_roster',
    'save_roster',
]
