"""
Scripted scenarios

Declarative JSON descriptions of an electorate, its actions and the expected
outcome, compiled into a session run and checked against the finished chain.
"""

from .runner import ACTIONS, FAULT_KINDS, SCENARIO_DIR, Check, ScenarioOutcome, ScenarioScript, resolve_scenario

__all__ = [
    'ACTIONS',
    'FAULT_KINDS',
    'SCENARIO_DIR',
    'Check',
    'ScenarioOutcome',
    'ScenarioScript',
    'resolve_scenario',
]
