"""Streaming HTTP service exposing the orchestrator to the chat UI.

Routes:
    POST /api/sessions                    -> 201 {"session_id", "stage"}
    POST /api/sessions/{id}/messages      -> SSE stream of orchestrator events
    GET  /api/sessions/{id}/artifacts     -> {"stage", "artifacts"}
"""

from __future__ import annotations

import json
import queue
import threading
from typing import Callable, Optional

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, StreamingResponse

from .orchestrator import (
    Event,
    Orchestrator,
    SessionNotFound,
    SessionStore,
    create_session,
)
from .providers import Provider

HEARTBEAT_SECONDS = 15.0


def sse_frame(event: Event, session_id: str) -> str:
    data = {
        "session_id": session_id,
        "agent": event.agent,
        "stage": event.stage,
        "payload": event.payload,
    }
    return f"event: {event.type}\ndata: {json.dumps(data, sort_keys=True)}\n\n"


def create_app(
    orchestrator: Orchestrator,
    store: SessionStore,
    provider_factory: Callable[[], Provider],
    allowed_origin: Optional[str] = None,
) -> FastAPI:
    """Wire the orchestrator behind the three documented endpoints.

    provider_factory is called once per session so scripted providers keep
    independent per-session turn counters.
    """
    app = FastAPI(title="kpi2kvi")
    if allowed_origin:
        app.add_middleware(
            CORSMiddleware,
            allow_origins=[allowed_origin],
            allow_methods=["*"],
            allow_headers=["*"],
        )

    locks: dict[str, threading.Lock] = {}
    providers: dict[str, Provider] = {}
    registry_lock = threading.Lock()

    def session_lock(session_id: str) -> threading.Lock:
        with registry_lock:
            return locks.setdefault(session_id, threading.Lock())

    def session_provider(session_id: str) -> Provider:
        with registry_lock:
            if session_id not in providers:
                providers[session_id] = provider_factory()
            return providers[session_id]

    @app.post("/api/sessions", status_code=201)
    async def create_session_endpoint(request: Request):
        body = await request.body()
        description = None
        if body:
            try:
                payload = json.loads(body)
            except json.JSONDecodeError:
                return JSONResponse({"error": "body must be JSON"}, status_code=400)
            if not isinstance(payload, dict):
                return JSONResponse({"error": "body must be a JSON object"}, status_code=400)
            description = payload.get("description")
        session = create_session(description)
        store.save(session)
        return {"session_id": session.session_id, "stage": session.stage_index}

    @app.post("/api/sessions/{session_id}/messages")
    async def message_endpoint(session_id: str, request: Request):
        try:
            payload = json.loads(await request.body())
            message = payload["message"]
        except (json.JSONDecodeError, KeyError, TypeError):
            return JSONResponse({"error": "body must be {\"message\": str}"}, status_code=400)
        try:
            session = store.load(session_id)
        except SessionNotFound:
            return JSONResponse({"error": f"unknown session {session_id}"}, status_code=404)

        lock = session_lock(session_id)
        if not lock.acquire(blocking=False):
            return JSONResponse({"error": "session busy"}, status_code=409)
        provider = session_provider(session_id)

        frames: queue.Queue = queue.Queue()
        _SENTINEL = object()

        def worker():
            try:
                for event in orchestrator.handle_user_turn(session, message, provider):
                    if event.type == "done":
                        # persist before the done frame reaches the client
                        store.save(session)
                    frames.put(sse_frame(event, session_id))
            except Exception as exc:  # defensive: stream must still terminate
                err = Event("error", session.current_agent, session.stage_index, str(exc))
                frames.put(sse_frame(err, session_id))
                done = Event("done", session.current_agent, session.stage_index)
                store.save(session)
                frames.put(sse_frame(done, session_id))
            finally:
                frames.put(_SENTINEL)

        def stream():
            thread = threading.Thread(target=worker, daemon=True)
            thread.start()
            try:
                while True:
                    try:
                        item = frames.get(timeout=HEARTBEAT_SECONDS)
                    except queue.Empty:
                        yield ": heartbeat\n\n"
                        continue
                    if item is _SENTINEL:
                        break
                    yield item
            finally:
                lock.release()

        return StreamingResponse(stream(), media_type="text/event-stream")

    @app.get("/api/sessions/{session_id}/artifacts")
    async def artifacts_endpoint(session_id: str):
        try:
            session = store.load(session_id)
        except SessionNotFound:
            return JSONResponse({"error": f"unknown session {session_id}"}, status_code=404)
        return {"stage": session.stage_index, "artifacts": session.artifacts}

    return app
