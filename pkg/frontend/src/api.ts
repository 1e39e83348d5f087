import { SseParser } from "./sse.js";
import type { SseEvent } from "./types.js";

// Build-time configurable API base; same-origin by default.
declare const __API_BASE__: string | undefined;
export const API_BASE: string =
  typeof __API_BASE__ === "string" ? __API_BASE__ : "";

export class BusyError extends Error {}

export async function createSession(description?: string): Promise<{ session_id: string; stage: number }> {
  const resp = await fetch(`${API_BASE}/api/sessions`, {
    method: "POST",
    headers: { "content-type": "application/json" },
    body: JSON.stringify(description ? { description } : {}),
  });
  if (!resp.ok) throw new Error(`create session failed: ${resp.status}`);
  return resp.json();
}

export async function getArtifacts(sessionId: string): Promise<{ stage: number; artifacts: Record<string, string> }> {
  const resp = await fetch(`${API_BASE}/api/sessions/${sessionId}/artifacts`);
  if (!resp.ok) throw new Error(`artifacts fetch failed: ${resp.status}`);
  return resp.json();
}

/**
 * POST one message and stream the SSE reply, invoking onEvent per frame.
 * Resolves after the stream closes (the backend always ends with `done`).
 */
export async function streamTurn(
  sessionId: string,
  message: string,
  onEvent: (event: SseEvent) => void,
): Promise<void> {
  const resp = await fetch(`${API_BASE}/api/sessions/${sessionId}/messages`, {
    method: "POST",
    headers: { "content-type": "application/json" },
    body: JSON.stringify({ message }),
  });
  if (resp.status === 409) throw new BusyError("turn in progress");
  if (!resp.ok || resp.body === null) throw new Error(`message failed: ${resp.status}`);

  const reader = resp.body.getReader();
  const decoder = new TextDecoder();
  const parser = new SseParser();
  for (;;) {
    const { done, value } = await reader.read();
    if (done) break;
    for (const event of parser.feed(decoder.decode(value, { stream: true }))) {
      onEvent(event);
    }
  }
  for (const event of parser.feed(decoder.decode())) onEvent(event);
}
