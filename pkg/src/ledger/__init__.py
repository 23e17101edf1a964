"""
Deterministic in-memory ledger

Transactions, blocks, and the single-sequencer ledger that executes the
contract state machines.
"""

from .transaction import ANONYMOUS, Block, ExecutionOutcome, Transaction, account_id
from .ledger import ContractFactory, Ledger

__all__ = [
    'ANONYMOUS',
    'Block',
    'ExecutionOutcome',
    'Transaction',
    'account_id',
    'ContractFactory',
    'Ledger',
]
