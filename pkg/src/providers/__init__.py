"""
Ledger Provider Implementations

This package contains the in-process implementations of the abstract interfaces:
the shared ledger provider, identified and anonymized transaction submitters,
and the built-in identity verification predicates.
"""

from .ledger_provider import LedgerProvider
from .ledger_transaction_provider import LedgerTransactionProvider
from .proxy_transaction_provider import AnonymizationProxy, ProxyTicket
from .identity_verifiers import AllowListVerifier, HmacTokenVerifier, canonical_email

__all__ = [
    'LedgerProvider',
    'LedgerTransactionProvider',
    'AnonymizationProxy',
    'ProxyTicket',
    'AllowListVerifier',
    'HmacTokenVerifier',
    'canonical_email',
]
