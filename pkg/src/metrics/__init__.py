"""
Cost accounting

Storage sizes of ring signatures and public keys, per-phase ledger cost
formulas, and the same costs measured on a session chain.
"""

from .phases import PHASE_OF_METHOD, Phase, PhaseCounters, phase_of
from .reports import (
    PhaseCost, SessionMeasurement, StorageReport, measure_session, phase_costs, render_costs_table, render_json,
    render_storage_table, storage_report,
)

__all__ = [
    'PHASE_OF_METHOD',
    'Phase',
    'PhaseCounters',
    'phase_of',
    'PhaseCost',
    'SessionMeasurement',
    'StorageReport',
    'measure_session',
    'phase_costs',
    'render_costs_table',
    'render_json',
    'render_storage_table',
    'storage_report',
]
