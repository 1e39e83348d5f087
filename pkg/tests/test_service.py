import json

import pytest
from fastapi.testclient import TestClient

from kpi2kvi import fixture_text
from kpi2kvi.orchestrator import Orchestrator, SessionStore
from kpi2kvi.providers import Playbook, ScriptedProvider
from kpi2kvi.service import create_app


@pytest.fixture()
def client(tmp_path, taxonomy):
    playbook = Playbook.from_json(fixture_text("telemedicine.playbook.json"))
    app = create_app(
        Orchestrator(taxonomy),
        SessionStore(str(tmp_path)),
        lambda: ScriptedProvider(playbook),
    )
    return TestClient(app)


def parse_sse(body: str):
    """(event, data) pairs from an SSE body, comment frames skipped."""
    out = []
    for frame in body.split("\n\n"):
        if not frame.strip() or frame.startswith(":"):
            continue
        lines = frame.splitlines()
        event = lines[0].removeprefix("event: ")
        data = json.loads(lines[1].removeprefix("data: "))
        out.append((event, data))
    return out


def send(client, session_id, message):
    resp = client.post(f"/api/sessions/{session_id}/messages", json={"message": message})
    assert resp.status_code == 200
    assert resp.headers["content-type"].startswith("text/event-stream")
    return parse_sse(resp.text)


def test_create_session(client):
    resp = client.post("/api/sessions", json={"description": None})
    assert resp.status_code == 201
    body = resp.json()
    assert body["stage"] == 1
    assert body["session_id"]


def test_create_session_rejects_non_json(client):
    resp = client.post("/api/sessions", content=b"not json", headers={"content-type": "text/plain"})
    assert resp.status_code == 400


def test_message_unknown_session(client):
    resp = client.post("/api/sessions/nope/messages", json={"message": "hi"})
    assert resp.status_code == 404


def test_message_requires_message_field(client):
    sid = client.post("/api/sessions").json()["session_id"]
    resp = client.post(f"/api/sessions/{sid}/messages", json={"wrong": 1})
    assert resp.status_code == 400


def test_full_conversation_over_sse(client, telemedicine_case):
    sid = client.post("/api/sessions").json()["session_id"]
    all_frames = []
    for message in telemedicine_case["messages"]:
        frames = send(client, sid, message)
        # every stream ends with exactly one done frame
        assert [e for e, _ in frames].count("done") == 1
        assert frames[-1][0] == "done"
        assert all(d["session_id"] == sid for _, d in frames)
        all_frames.extend(frames)

    types = [e for e, _ in all_frames]
    assert "progress" in types and "artifact" in types and "content" in types

    snapshot = client.get(f"/api/sessions/{sid}/artifacts").json()
    assert snapshot["stage"] == 9
    keys = set(snapshot["artifacts"])
    fixed = {
        "interview_transcript",
        "candidate_categories",
        "refinement_transcript",
        "finalized_categories",
        "kpi_plan",
        "kpi_collection_transcript",
        "kpi_table",
    }
    assert fixed < keys
    assert {k for k in keys if k.startswith("kvi_result:")} == {
        "kvi_result:PUC-UPCA",
        "kvi_result:PUC-USCA",
        "kvi_result:RPS-DDSS",
    }
    assert keys == fixed | {k for k in keys if k.startswith("kvi_result:")}


def test_artifacts_unknown_session(client):
    assert client.get("/api/sessions/absent/artifacts").status_code == 404


def test_done_frame_persists_session(client, tmp_path):
    sid = client.post("/api/sessions").json()["session_id"]
    send(client, sid, "Please assess this service.")
    stored = json.loads((tmp_path / f"{sid}.session.json").read_text())
    # the persisted history already contains this turn
    assert stored["history"][0][2] == "Please assess this service."
    assert len(stored["history"]) >= 2
