"""KPI2KVI: staged multi-agent workflow from service description to bounded KVI results."""

from importlib import resources

from .formula import Interval, brute_force_range, eval_interval, eval_point, parse_formula
from .kvi import KviResult, compute_kvi, verify_result
from .orchestrator import Orchestrator, SessionState, SessionStore, create_session
from .providers import HttpProvider, Playbook, RecordingProvider, ScriptedProvider
from .taxonomy import DegradationSpec, Taxonomy, degrade_taxonomy, load_taxonomy

__all__ = [
    "Interval",
    "parse_formula",
    "eval_point",
    "eval_interval",
    "brute_force_range",
    "KviResult",
    "compute_kvi",
    "verify_result",
    "Orchestrator",
    "SessionState",
    "SessionStore",
    "create_session",
    "Playbook",
    "ScriptedProvider",
    "HttpProvider",
    "RecordingProvider",
    "Taxonomy",
    "DegradationSpec",
    "load_taxonomy",
    "degrade_taxonomy",
    "fixture_text",
    "fixture_path",
]


def fixture_text(name: str) -> str:
    return resources.files("kpi2kvi.fixtures").joinpath(name).read_text(encoding="utf-8")


def fixture_path(name: str) -> str:
    return str(resources.files("kpi2kvi.fixtures").joinpath(name))
