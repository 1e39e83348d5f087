"""Record a golden SSE transcript from the scripted backend.

Replays the bundled telemedicine conversation against an in-process app and
writes the raw SSE bytes (all turns concatenated) plus the final artifact
snapshot into tests/fixtures/. Run from the frontend/ directory:

    python3 scripts/record_transcript.py
"""

import json
import pathlib

from fastapi.testclient import TestClient

from kpi2kvi import fixture_text
from kpi2kvi.orchestrator import Orchestrator, SessionStore
from kpi2kvi.providers import Playbook, ScriptedProvider
from kpi2kvi.service import create_app
from kpi2kvi.taxonomy import load_taxonomy

FIXTURES = pathlib.Path(__file__).resolve().parent.parent / "tests" / "fixtures"


def main():
    taxonomy = load_taxonomy(fixture_text("default.taxonomy.json"))
    playbook = Playbook.from_json(fixture_text("telemedicine.playbook.json"))
    case = json.loads(fixture_text("telemedicine.case.json"))
    store = SessionStore(str(FIXTURES / ".tmp-store"))
    app = create_app(Orchestrator(taxonomy), store, lambda: ScriptedProvider(playbook))
    client = TestClient(app)

    sid = client.post("/api/sessions").json()["session_id"]
    chunks = []
    for message in case["messages"]:
        resp = client.post(f"/api/sessions/{sid}/messages", json={"message": message})
        resp.raise_for_status()
        chunks.append(resp.text)

    FIXTURES.mkdir(parents=True, exist_ok=True)
    (FIXTURES / "golden.sse").write_text("".join(chunks), encoding="utf-8")
    snapshot = client.get(f"/api/sessions/{sid}/artifacts").json()
    (FIXTURES / "golden.artifacts.json").write_text(
        json.dumps(snapshot, indent=2, sort_keys=True), encoding="utf-8"
    )
    print(f"wrote {FIXTURES / 'golden.sse'} ({sum(len(c) for c in chunks)} bytes)")


if __name__ == "__main__":
    main()
