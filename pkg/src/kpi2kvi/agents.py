"""The nine agent contracts and their execution against a provider.

Conversational agents signal stage completion with a sentinel line;
structured agents return a fenced JSON block validated per agent.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Any, Optional

from .providers import Provider

SENTINEL = "[[STEP_COMPLETE]]"

CONVERSATIONAL = "conversational"
STRUCTURED = "structured"


class StageOrderError(RuntimeError):
    """An agent was asked to run before its inputs were produced."""


class StructuredOutputError(ValueError):
    """Agent reply lacked or violated the expected JSON schema."""

    def __init__(self, message: str, flag: Optional[str] = None):
        super().__init__(message)
        self.flag = flag


@dataclass(frozen=True)
class AgentSpec:
    name: str
    kind: str
    stage: int
    context_keys: tuple[str, ...]
    output_key: str
    prompt_template: str
    cot_enabled: bool = True


@dataclass(frozen=True)
class PromptPayload:
    system_prompt: str
    messages: tuple[dict, ...]


@dataclass(frozen=True)
class AgentOutput:
    display_text: str
    complete: bool
    artifact: Any = None


# Fixture interview prompt; editable configuration, not normative content.
_INSPECTOR_PROMPT = """\
You are the service inspector. Interview the user about the described service:
what data are processed and stored, who can access recordings or records,
which regulations apply, and the expected user base. Ask focused questions,
one topic at a time. When the picture is complete, summarize the findings and
end your final message with the line {sentinel}."""

_EXTRACTOR_PROMPT = """\
You are the KVI category extractor. Using the taxonomy below as a controlled
vocabulary, map the interviewed service to the most relevant KVI categories.
Reply with a short justification and a fenced JSON block:
{{"category_ids": [...], "notes": "..."}} (ranked, most relevant first).

Taxonomy:
{taxonomy}

Interview transcript:
{interview_transcript}"""

_EVALUATOR_PROMPT = """\
You are the KVI category evaluator. Justify the proposed categories below and
invite the user to add, remove, or replace entries based on their domain
knowledge and stakeholder priorities. When the user confirms the set, end your
final message with the line {sentinel}.

Proposed categories:
{candidate_categories}

Taxonomy:
{taxonomy}"""

_FINALIZER_PROMPT = """\
You are the KVI category finalizer. Consolidate the final category set from
the extractor proposal and the refinement conversation, resolving duplicates
and keeping IDs consistent. Reply with a fenced JSON block:
{{"category_ids": [...], "notes": "..."}}.

Extractor proposal:
{candidate_categories}

Refinement transcript:
{refinement_transcript}"""

_KPI_GENERATOR_PROMPT = """\
You are the KPI generator. Propose a compact set of service-specific KPIs
that provide measurable evidence for the finalized KVI categories. Give each
KPI an id, a formula symbol, a name, a description, and a unit. Reply with a
fenced JSON block: {{"kpis": [{{"id", "symbol", "name", "description", "unit"}}]}}.

Interview transcript:
{interview_transcript}

Finalized categories:
{finalized_categories}"""

_COLLECTOR_PROMPT = """\
You are the KPI collector. Collect one KPI value at a time from the user,
following the measurement plan below. The user may give a point value, an
interval, or delegate the estimate to you; delegated values are assumptions,
not observations. After the last KPI is collected, acknowledge and end your
final message with the line {sentinel}.

Measurement plan:
{kpi_plan}"""

_STRUCTURER_PROMPT = """\
You are the KPI structurer. Convert the collection conversation into a
machine-readable table of KPI values with provenance flags and normalized
units. Reply with a fenced JSON block matching the KPI table schema.

Measurement plan:
{kpi_plan}

Collection transcript:
{kpi_collection_transcript}"""

_CALCULATOR_PROMPT = """\
You are the KVI calculator. Compute the target KVI from the structured KPI
table, producing an exact value with explicit min/max bounds and a short
rationale citing the exact KPIs and assumptions used. Reply with a fenced
JSON block matching the KVI result schema.
{narrative}
Target KVI definition:
{kvi_definition}

KPI table:
{kpi_table}"""

_ADVISOR_PROMPT = """\
You are the KVI advisor. Answer the user's questions about the computed
results, explain trade-offs with traceable justifications, and suggest which
KPIs would most reduce uncertainty if measured more precisely.

Advisor context:
{advisor_context}"""


REGISTRY: dict[str, AgentSpec] = {
    spec.name: spec
    for spec in [
        AgentSpec("inspector", CONVERSATIONAL, 1, (), "interview_transcript", _INSPECTOR_PROMPT),
        AgentSpec(
            "kvi_category_extractor",
            STRUCTURED,
            2,
            ("interview_transcript",),
            "candidate_categories",
            _EXTRACTOR_PROMPT,
        ),
        AgentSpec(
            "kvi_category_evaluator",
            CONVERSATIONAL,
            3,
            ("candidate_categories",),
            "refinement_transcript",
            _EVALUATOR_PROMPT,
        ),
        AgentSpec(
            "kvi_category_finalizer",
            STRUCTURED,
            4,
            ("candidate_categories", "refinement_transcript"),
            "finalized_categories",
            _FINALIZER_PROMPT,
        ),
        AgentSpec(
            "kpi_generator",
            STRUCTURED,
            5,
            ("interview_transcript", "finalized_categories"),
            "kpi_plan",
            _KPI_GENERATOR_PROMPT,
        ),
        AgentSpec(
            "kpi_collector",
            CONVERSATIONAL,
            6,
            ("kpi_plan",),
            "kpi_collection_transcript",
            _COLLECTOR_PROMPT,
        ),
        AgentSpec(
            "kpi_structurer",
            STRUCTURED,
            7,
            ("kpi_plan", "kpi_collection_transcript"),
            "kpi_table",
            _STRUCTURER_PROMPT,
        ),
        AgentSpec(
            "kvi_calculator",
            STRUCTURED,
            8,
            ("finalized_categories", "kpi_table"),
            "kvi_result",
            _CALCULATOR_PROMPT,
        ),
        AgentSpec(
            "kvi_advisor",
            CONVERSATIONAL,
            9,
            ("finalized_categories", "kpi_table"),
            "advisor_context",
            _ADVISOR_PROMPT,
        ),
    ]
}

STAGE_ORDER = tuple(sorted(REGISTRY.values(), key=lambda s: s.stage))


def build_context(spec: AgentSpec, session, extras: Optional[dict] = None) -> PromptPayload:
    """Fill the agent's prompt template from the session artifact store.

    `session` needs `.artifacts` (key -> serialized text) and `.history`
    (list of (role, agent, text)). `extras` supplies non-artifact
    placeholders such as the taxonomy rendering.
    """
    values = dict(extras or {})
    values.setdefault("sentinel", SENTINEL)
    for key in spec.context_keys:
        if key not in session.artifacts:
            raise StageOrderError(
                f"agent {spec.name!r} requires artifact {key!r} which is not stored yet"
            )
        values[key] = session.artifacts[key]
    if spec.name == "kvi_calculator":
        values["narrative"] = (
            "\nFollow the definition's step-by-step calculation narrative.\n"
            if spec.cot_enabled
            else "\n"
        )
    try:
        system_prompt = spec.prompt_template.format(**values)
    except KeyError as exc:
        raise StageOrderError(f"agent {spec.name!r} is missing context value {exc}") from exc
    messages = tuple(
        {"role": "user" if role == "user" else "assistant", "content": text}
        for role, _agent, text in session.history
    )
    return PromptPayload(system_prompt=system_prompt, messages=messages)


def detect_completion(spec: AgentSpec, text: str) -> bool:
    if spec.kind == STRUCTURED:
        return True
    lines = [ln for ln in text.strip().splitlines() if ln.strip()]
    return bool(lines) and lines[-1].strip() == SENTINEL


def strip_sentinel(text: str) -> str:
    lines = [ln for ln in text.splitlines() if ln.strip() != SENTINEL]
    return "\n".join(lines).strip()


_FENCE_RE = re.compile(r"```(?:json)?\s*\n(.*?)```", re.DOTALL)

_SCHEMAS = {
    "kvi_category_extractor": '{"category_ids": [str, ...], "notes"?: str}',
    "kvi_category_finalizer": '{"category_ids": [str, ...], "notes"?: str}',
    "kpi_generator": '{"kpis": [{"id": str, "symbol": str, "name": str, "description": str, "unit": str}, ...]}',
    "kpi_structurer": '{"complete": bool, "rows": [{"kpi_id", "symbol", "unit", "value", "provenance", "raw_text"}, ...]}',
    "kvi_calculator": '{"code": str, "exact": num, "min": num, "max": num, "unit": str, "rationale": str, "cited_kpis": [str, ...]}',
}

_SYMBOL_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


def parse_structured_output(spec: AgentSpec, text: str) -> Any:
    """Extract and validate the first fenced JSON block of a structured reply."""
    m = _FENCE_RE.search(text)
    if m is None:
        raise StructuredOutputError(
            f"{spec.name}: reply contains no fenced JSON block", flag="structured-output"
        )
    try:
        data = json.loads(m.group(1))
    except json.JSONDecodeError as exc:
        raise StructuredOutputError(
            f"{spec.name}: fenced block is not valid JSON: {exc}", flag="structured-output"
        ) from exc
    _validate(spec.name, data)
    return data


def _validate(agent: str, data: Any) -> None:
    def fail(msg):
        raise StructuredOutputError(f"{agent}: {msg}")

    if agent in ("kvi_category_extractor", "kvi_category_finalizer"):
        if not isinstance(data, dict) or "category_ids" not in data:
            fail("missing field 'category_ids'")
        ids = data["category_ids"]
        if not isinstance(ids, list) or not all(isinstance(i, str) and i for i in ids):
            fail("'category_ids' must be a list of non-empty strings")
    elif agent == "kpi_generator":
        if not isinstance(data, dict) or not isinstance(data.get("kpis"), list):
            fail("missing field 'kpis'")
        for i, kpi in enumerate(data["kpis"]):
            for f in ("id", "symbol", "name", "description", "unit"):
                if not isinstance(kpi.get(f), str):
                    fail(f"kpis[{i}] missing field {f!r}")
            if not _SYMBOL_RE.match(kpi["symbol"]):
                fail(f"kpis[{i}] symbol {kpi['symbol']!r} is not a valid formula symbol")
    elif agent == "kpi_structurer":
        if not isinstance(data, dict) or not isinstance(data.get("rows"), list):
            fail("missing field 'rows'")
        for i, row in enumerate(data["rows"]):
            for f in ("kpi_id", "symbol", "unit", "value", "provenance"):
                if f not in row:
                    fail(f"rows[{i}] missing field {f!r}")
    elif agent == "kvi_calculator":
        for f in ("code", "exact", "min", "max", "unit", "rationale", "cited_kpis"):
            if not isinstance(data, dict) or f not in data:
                fail(f"missing field {f!r}")
    else:
        fail("not a structured agent")


def run_agent(spec: AgentSpec, payload: PromptPayload, provider: Provider) -> AgentOutput:
    """Execute one agent turn. Never mutates session state.

    Structured agents get one automatic schema-restating re-prompt before a
    hard "structured-output" failure.
    """
    text = provider.complete(payload.system_prompt, list(payload.messages), spec.name)
    if spec.kind == CONVERSATIONAL:
        complete = detect_completion(spec, text)
        return AgentOutput(display_text=strip_sentinel(text), complete=complete)
    try:
        artifact = parse_structured_output(spec, text)
    except StructuredOutputError:
        retry = list(payload.messages) + [
            {
                "role": "user",
                "content": (
                    "Your reply must contain a fenced JSON block matching this schema: "
                    + _SCHEMAS[spec.name]
                ),
            }
        ]
        text = provider.complete(payload.system_prompt, retry, spec.name)
        artifact = parse_structured_output(spec, text)  # raises with flag on repeat failure
    return AgentOutput(display_text=text, complete=True, artifact=artifact)
