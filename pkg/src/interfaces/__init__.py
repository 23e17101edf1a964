"""
Abstract Interfaces for the voting protocol

This package contains abstract base classes that define contracts
for on-ledger state machines, transaction submitters, and identity
verification predicates.
"""

from .contract import Contract, ExecutionContext
from .identity_verifier import IdentityVerifier
from .transaction_provider import TransactionProvider

__all__ = [
    'Contract',
    'ExecutionContext',
    'IdentityVerifier',
    'TransactionProvider',
]
