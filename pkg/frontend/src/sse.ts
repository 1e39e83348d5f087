import type { EventData, EventType, SseEvent } from "./types.js";

const EVENT_TYPES = new Set(["progress", "content", "artifact", "error", "done"]);

/**
 * Incremental SSE parser for the backend's POST-response streams.
 *
 * EventSource only speaks GET, so message turns read the response body
 * manually and feed chunks here. Frames are `event:` + `data:` pairs
 * separated by a blank line; `:`-prefixed heartbeat comments are dropped.
 */
export class SseParser {
  private buffer = "";

  feed(chunk: string): SseEvent[] {
    this.buffer += chunk;
    const events: SseEvent[] = [];
    let sep;
    while ((sep = this.buffer.indexOf("\n\n")) !== -1) {
      const frame = this.buffer.slice(0, sep);
      this.buffer = this.buffer.slice(sep + 2);
      const parsed = parseFrame(frame);
      if (parsed) events.push(parsed);
    }
    return events;
  }

  /** Remaining unterminated input; non-empty means a truncated stream. */
  pending(): string {
    return this.buffer;
  }
}

function parseFrame(frame: string): SseEvent | null {
  let type: string | null = null;
  let data: string | null = null;
  for (const line of frame.split("\n")) {
    if (line.startsWith(":") || line === "") continue; // comment / padding
    if (line.startsWith("event:")) type = line.slice(6).trim();
    else if (line.startsWith("data:")) data = line.slice(5).trim();
  }
  if (type === null || data === null || !EVENT_TYPES.has(type)) return null;
  return { type: type as EventType, data: JSON.parse(data) as EventData };
}

/** Parse a complete recorded transcript in one go. */
export function parseTranscript(text: string): SseEvent[] {
  return new SseParser().feed(text);
}
