"""Text-completion providers: scripted playbook, HTTP client, recording proxy."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from typing import Optional, Protocol

import httpx

ENV_PROVIDER_URL = "KPI2KVI_PROVIDER_URL"
ENV_PROVIDER_KEY = "KPI2KVI_PROVIDER_KEY"
ENV_MODEL = "KPI2KVI_MODEL"


class ProviderError(RuntimeError):
    """Transport-level provider failure; retriable."""


class PlaybookExhausted(ProviderError):
    """No playbook entry matches the requested (agent, turn)."""


class Provider(Protocol):
    name: str

    def complete(self, system_prompt: str, messages: list[dict], agent: str) -> str:
        ...


@dataclass(frozen=True)
class Playbook:
    """Deterministic (agent, turn) -> response script."""

    entries: dict[tuple[str, int], str]
    exhaustion: str = "error"  # "error" | "empty"

    @staticmethod
    def from_json(document: str) -> "Playbook":
        raw = json.loads(document)
        entries: dict[tuple[str, int], str] = {}
        for item in raw:
            key = (item["agent"], int(item["turn"]))
            if key in entries:
                raise ValueError(f"ambiguous playbook matcher {key}")
            entries[key] = item["response"]
        return Playbook(entries=entries)

    @staticmethod
    def load(path: str) -> "Playbook":
        with open(path, encoding="utf-8") as fh:
            return Playbook.from_json(fh.read())


class ScriptedProvider:
    """Replays a playbook; keeps a per-agent call counter.

    Deterministic: the same call sequence always yields the same texts.
    One instance serves one session/run.
    """

    def __init__(self, playbook: Playbook, transform=None):
        self.name = "scripted"
        self.playbook = playbook
        self.turns: dict[str, int] = {}
        # optional hook (agent, turn, text) -> text, used by the eval noise model
        self.transform = transform

    def complete(self, system_prompt: str, messages: list[dict], agent: str) -> str:
        turn = self.turns.get(agent, 0)
        self.turns[agent] = turn + 1
        try:
            text = self.playbook.entries[(agent, turn)]
        except KeyError:
            if self.playbook.exhaustion == "empty":
                text = ""
            else:
                raise PlaybookExhausted(f"no playbook entry for agent {agent!r} turn {turn}")
        if self.transform is not None:
            text = self.transform(agent, turn, text)
        return text


class HttpProvider:
    """Client for a chat-completions-style endpoint."""

    def __init__(
        self,
        base_url: Optional[str] = None,
        api_key: Optional[str] = None,
        model: Optional[str] = None,
        temperature: float = 0.0,
        timeout: float = 60.0,
    ):
        self.name = "http"
        self.base_url = (base_url or os.environ.get(ENV_PROVIDER_URL, "")).rstrip("/")
        self.api_key = api_key or os.environ.get(ENV_PROVIDER_KEY)
        self.model = model or os.environ.get(ENV_MODEL, "")
        self.temperature = temperature
        self.timeout = timeout
        if not self.base_url:
            raise ValueError(f"no provider URL; set {ENV_PROVIDER_URL}")

    def complete(self, system_prompt: str, messages: list[dict], agent: str) -> str:
        payload = {
            "model": self.model,
            "messages": [{"role": "system", "content": system_prompt}] + messages,
            "temperature": self.temperature,
        }
        headers = {}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        try:
            resp = httpx.post(
                f"{self.base_url}/v1/chat/completions",
                json=payload,
                headers=headers,
                timeout=self.timeout,
            )
            resp.raise_for_status()
            return resp.json()["choices"][0]["message"]["content"]
        except (httpx.HTTPError, KeyError, IndexError, ValueError) as exc:
            raise ProviderError(f"provider call failed for {agent!r}: {exc}") from exc


@dataclass
class RecordingProvider:
    """Wraps another provider and logs its traffic for later replay."""

    inner: Provider
    records: list[dict] = field(default_factory=list)
    name: str = "recording"

    def complete(self, system_prompt: str, messages: list[dict], agent: str) -> str:
        turn = sum(1 for r in self.records if r["agent"] == agent)
        text = self.inner.complete(system_prompt, messages, agent)
        self.records.append(
            {
                "agent": agent,
                "turn": turn,
                "system_prompt": system_prompt,
                "messages": messages,
                "response": text,
            }
        )
        return text

    def to_playbook_json(self) -> str:
        return json.dumps(
            [
                {"agent": r["agent"], "turn": r["turn"], "response": r["response"]}
                for r in self.records
            ],
            indent=2,
        )
