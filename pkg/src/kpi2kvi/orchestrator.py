"""Staged state machine driving the nine-agent workflow.

Each session stores the chat history, the current agent, and a key->artifact
store. A user turn runs the current agent; completed conversational stages
auto-chain through the following structured stages, and stage 8 loops the
calculator over every KVI code implied by the finalized categories.
"""

from __future__ import annotations

import json
import os
import time
import uuid
from dataclasses import dataclass, field
from typing import Iterator, Optional

from .agents import (
    CONVERSATIONAL,
    REGISTRY,
    AgentOutput,
    StageOrderError,
    StructuredOutputError,
    build_context,
    run_agent,
)
from .evidence import (
    Kpi,
    UnitError,
    UtteranceError,
    normalize_unit,
    parse_value_utterance,
    table_from_json,
    table_to_json,
)
from .kvi import KviComputationError, KviResult, compute_kvi, result_to_json
from .providers import Provider, ProviderError
from .taxonomy import Taxonomy, TaxonomyError, lookup_codes, serialize_taxonomy

ENV_STORE_DIR = "KPI2KVI_STORE_DIR"

_STAGE_AGENTS = {spec.stage: spec.name for spec in REGISTRY.values()}

EVENT_TYPES = ("progress", "content", "artifact", "error", "done")


class SessionError(RuntimeError):
    pass


class SessionNotFound(SessionError):
    pass


class SessionIntegrityError(SessionError):
    pass


@dataclass
class SessionState:
    session_id: str
    history: list[tuple[str, str, str]] = field(default_factory=list)  # (role, agent, text)
    current_agent: str = "inspector"
    stage_index: int = 1
    artifacts: dict[str, str] = field(default_factory=dict)
    kvi_cursor: int = 0
    # parsed KPI value records accumulated during stage 6
    collection: list[dict] = field(default_factory=list)
    created: float = 0.0
    updated: float = 0.0


@dataclass(frozen=True)
class Event:
    type: str
    agent: str
    stage: int
    payload: object = None


def create_session(description: Optional[str] = None) -> SessionState:
    now = time.time()
    s = SessionState(session_id=uuid.uuid4().hex, created=now, updated=now)
    if description:
        s.history.append(("user", "inspector", description))
    return s


class Orchestrator:
    """Owns the taxonomy and all session writes."""

    def __init__(self, taxonomy: Taxonomy):
        self.taxonomy = taxonomy
        self._taxonomy_text = serialize_taxonomy(taxonomy)

    # -- main entry -------------------------------------------------------

    def handle_user_turn(
        self, session: SessionState, message: str, provider: Provider
    ) -> Iterator[Event]:
        """Run one user turn, yielding events in order, ending with `done`."""
        session.history.append(("user", session.current_agent, message))
        try:
            yield from self._dispatch(session, message, provider)
        except (ProviderError, StageOrderError, StructuredOutputError, TaxonomyError) as exc:
            yield Event("error", session.current_agent, session.stage_index, str(exc))
        session.updated = time.time()
        yield Event("done", session.current_agent, session.stage_index)

    def _dispatch(self, session: SessionState, message: str, provider: Provider):
        stage = session.stage_index
        spec = REGISTRY[session.current_agent]
        assert spec.kind == CONVERSATIONAL, "structured stages never await user input"

        if stage == 9:
            yield from self._advisor_turn(session, provider)
            return
        if stage == 6:
            out = yield from self._collector_turn(session, message, provider)
            if out is None:
                return
        else:
            payload = build_context(spec, session, self._extras(spec))
            out = run_agent(spec, payload, provider)
            session.history.append(("assistant", spec.name, out.display_text))
            yield Event("content", spec.name, stage, out.display_text)
        if not out.complete:
            return

        self._store_transcript(session, spec.name)
        self._advance(session)
        yield from self._auto_chain(session, provider)

    # -- stage helpers ----------------------------------------------------

    def _extras(self, spec) -> dict:
        extras = {}
        if spec.name in ("kvi_category_extractor", "kvi_category_evaluator"):
            extras["taxonomy"] = self._taxonomy_text
        return extras

    def _advance(self, session: SessionState):
        session.stage_index += 1
        session.current_agent = _STAGE_AGENTS[session.stage_index]

    def _store_transcript(self, session: SessionState, agent_name: str):
        spec = REGISTRY[agent_name]
        exchanges = [
            {"role": role, "text": text}
            for role, agent, text in session.history
            if agent == agent_name
        ]
        doc: dict = {"agent": agent_name, "exchanges": exchanges}
        if agent_name == "kpi_collector":
            doc["collected"] = session.collection
        session.artifacts[spec.output_key] = json.dumps(doc, sort_keys=True)

    def _auto_chain(self, session: SessionState, provider: Provider):
        """Run structured stages (and the stage-8 loop) until a conversational stop."""
        while True:
            stage = session.stage_index
            spec = REGISTRY[session.current_agent]
            if stage == 8:
                yield Event("progress", spec.name, 8)
                yield from self._calculation_loop(session)
                self._advance(session)
                yield Event("progress", session.current_agent, 9)
                continue
            if spec.kind == CONVERSATIONAL:
                return
            yield Event("progress", spec.name, stage)
            payload = build_context(spec, session, self._extras(spec))
            out = run_agent(spec, payload, provider)
            artifact_text = self._canonical_artifact(session, spec.name, out)
            session.artifacts[spec.output_key] = artifact_text
            session.history.append(("assistant", spec.name, out.display_text))
            yield Event("content", spec.name, stage, out.display_text)
            yield Event("artifact", spec.name, stage, {spec.output_key: artifact_text})
            self._advance(session)

    def _canonical_artifact(self, session: SessionState, agent_name: str, out: AgentOutput) -> str:
        data = out.artifact
        if agent_name in ("kvi_category_extractor", "kvi_category_finalizer"):
            known = {c.id for c in self.taxonomy.categories}
            unknown = [i for i in data["category_ids"] if i not in known]
            if unknown:
                raise StructuredOutputError(
                    f"{agent_name}: unknown category id(s) {unknown}", flag="structured-output"
                )
        if agent_name == "kpi_structurer":
            plan = self._kpi_plan(session)
            table = table_from_json(json.dumps(data), plan)
            return table_to_json(table)
        return json.dumps(data, sort_keys=True)

    def _kpi_plan(self, session: SessionState) -> list[Kpi]:
        raw = json.loads(session.artifacts["kpi_plan"])
        return [Kpi(**k) for k in raw["kpis"]]

    def _collector_turn(self, session: SessionState, message: str, provider: Provider):
        """Parse one KPI value from the user, then let the collector reply.

        Returns the collector's AgentOutput, or None when the turn ended
        early (unparseable value re-prompt).
        """
        spec = REGISTRY["kpi_collector"]
        plan = self._kpi_plan(session)
        collected_ids = {rec["kpi_id"] for rec in session.collection}
        pending = [k for k in plan if k.id not in collected_ids]

        if pending:
            target = pending[0]
            try:
                parsed = parse_value_utterance(message)
            except UtteranceError:
                reply = (
                    f"I could not read a value from {message!r}. For {target.name} "
                    f"({target.unit}), give a number, a range like 'between 7 and 9', "
                    "or say 'please estimate it' to delegate."
                )
                session.history.append(("assistant", spec.name, reply))
                yield Event("content", spec.name, 6, reply)
                return None
            provenance = "user-provided"
            raw_text = message
            if parsed.kind == "delegate":
                payload = build_context(spec, session, self._extras(spec))
                estimate_messages = list(payload.messages) + [
                    {
                        "role": "user",
                        "content": (
                            f"Estimate a plausible value or interval for KPI "
                            f"{target.name!r} ({target.unit}). Reply with the value only."
                        ),
                    }
                ]
                estimate = provider.complete(payload.system_prompt, estimate_messages, spec.name)
                parsed = parse_value_utterance(estimate)
                if parsed.kind == "delegate":
                    raise StructuredOutputError(
                        f"kpi_collector: delegated estimate {estimate!r} is not a value"
                    )
                provenance = "system-decided"
                raw_text = estimate.strip()
            try:
                parsed = normalize_unit(parsed, target.unit)
            except UnitError as exc:
                reply = f"{exc}. Please restate the value for {target.name} in {target.unit}."
                session.history.append(("assistant", spec.name, reply))
                yield Event("content", spec.name, 6, reply)
                return None
            record = {
                "kpi_id": target.id,
                "kind": parsed.kind,
                "provenance": provenance,
                "raw_text": raw_text,
                "unit": target.unit,
            }
            if parsed.kind == "point":
                record["point"] = parsed.point
            else:
                record["lo"], record["hi"] = parsed.lo, parsed.hi
            session.collection.append(record)
            collected_ids.add(target.id)

        payload = build_context(spec, session, self._extras(spec))
        out = run_agent(spec, payload, provider)
        session.history.append(("assistant", spec.name, out.display_text))
        yield Event("content", spec.name, 6, out.display_text)
        all_collected = len(collected_ids) == len(plan)
        return AgentOutput(
            display_text=out.display_text, complete=out.complete and all_collected
        )

    def _calculation_loop(self, session: SessionState):
        finalized = json.loads(session.artifacts["finalized_categories"])["category_ids"]
        defs = lookup_codes(self.taxonomy, finalized)
        plan = self._kpi_plan(session)
        table = table_from_json(session.artifacts["kpi_table"], plan)
        for i, defn in enumerate(defs[session.kvi_cursor :], start=session.kvi_cursor):
            session.kvi_cursor = i
            try:
                result = compute_kvi(defn, table)
            except KviComputationError as exc:
                # flagged placeholder: the advisor can explain the gap
                result = KviResult(
                    code=defn.code,
                    exact=float("nan"),
                    min=float("nan"),
                    max=float("nan"),
                    unit=defn.unit,
                    rationale=f"Computation failed: {exc}",
                    cited_kpis=(),
                    flags=("computation-error",),
                )
            key = f"kvi_result:{defn.code}"
            text = result_to_json(result)
            session.artifacts[key] = text
            yield Event("artifact", "kvi_calculator", 8, {key: text})
        session.kvi_cursor = len(defs)

    def _advisor_turn(self, session: SessionState, provider: Provider):
        spec = REGISTRY["kvi_advisor"]
        extras = {"advisor_context": advisor_context(session)}
        payload = build_context(spec, session, extras)
        out = run_agent(spec, payload, provider)
        session.history.append(("assistant", spec.name, out.display_text))
        yield Event("content", spec.name, 9, out.display_text)


def advisor_context(session: SessionState) -> str:
    """Finalized categories, KPI table, and per-KVI results, in code order."""
    if session.stage_index != 9:
        raise SessionError(f"advisor context requires stage 9, session is at {session.stage_index}")
    parts = [
        "finalized_categories: " + session.artifacts["finalized_categories"],
        "kpi_table: " + session.artifacts["kpi_table"],
    ]
    result_keys = sorted(k for k in session.artifacts if k.startswith("kvi_result:"))
    for key in result_keys:
        parts.append(f"{key}: {session.artifacts[key]}")
    return "\n".join(parts)


# ---------------------------------------------------------------------------
# Session persistence: one JSON document per session, atomic rename on write.


class SessionStore:
    def __init__(self, directory: Optional[str] = None):
        self.directory = directory or os.environ.get(ENV_STORE_DIR, ".kpi2kvi-sessions")
        os.makedirs(self.directory, exist_ok=True)

    def _path(self, session_id: str) -> str:
        return os.path.join(self.directory, f"{session_id}.session.json")

    def save(self, session: SessionState) -> None:
        doc = {
            "session_id": session.session_id,
            "history": [list(h) for h in session.history],
            "current_agent": session.current_agent,
            "stage_index": session.stage_index,
            "artifacts": session.artifacts,
            "kvi_cursor": session.kvi_cursor,
            "collection": session.collection,
            "created": session.created,
            "updated": session.updated,
        }
        path = self._path(session.session_id)
        tmp = path + ".tmp"
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, sort_keys=True)
        os.replace(tmp, path)

    def load(self, session_id: str) -> SessionState:
        path = self._path(session_id)
        if not os.path.exists(path):
            raise SessionNotFound(f"no session {session_id!r}")
        try:
            with open(path, encoding="utf-8") as fh:
                doc = json.load(fh)
            return SessionState(
                session_id=doc["session_id"],
                history=[tuple(h) for h in doc["history"]],
                current_agent=doc["current_agent"],
                stage_index=doc["stage_index"],
                artifacts=doc["artifacts"],
                kvi_cursor=doc["kvi_cursor"],
                collection=doc["collection"],
                created=doc["created"],
                updated=doc["updated"],
            )
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise SessionIntegrityError(f"corrupt session file {path}: {exc}") from exc
