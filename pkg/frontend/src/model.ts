import type { ArtifactPayload, KpiTableDoc, KviResultDoc, SseEvent } from "./types.js";

export interface ChatBubble {
  role: "user" | "agent" | "error";
  agent: string | null;
  text: string;
}

export interface KpiRow {
  kpiId: string;
  symbol: string;
  unit: string;
  display: string; // verbatim numbers from the artifact payload
  badge: "user" | "assumption";
  rawText: string;
}

export interface KviCard {
  code: string;
  unit: string;
  exact: string;
  min: string;
  max: string;
  rationale: string;
  flags: string[];
  fallbackJson?: string; // set when the payload failed schema checks
}

export interface PanelModel {
  categories: string[];
  kpiRows: KpiRow[];
  kviCards: KviCard[];
}

export type ConnectionState = "idle" | "streaming" | "error";

export interface UiSession {
  sessionId: string | null;
  bubbles: ChatBubble[];
  stage: number;
  connection: ConnectionState;
  composerEnabled: boolean;
  panels: PanelModel;
  artifacts: Record<string, string>;
}

export function createUiSession(): UiSession {
  return {
    sessionId: null,
    bubbles: [],
    stage: 1,
    connection: "idle",
    composerEnabled: true,
    panels: { categories: [], kpiRows: [], kviCards: [] },
    artifacts: {},
  };
}

/** Numbers render via standard decimal formatting, nothing re-computed. */
function fmt(n: number): string {
  return String(n);
}

/** Lock the composer for the duration of one streamed turn. */
export function beginTurn(state: UiSession, message: string): void {
  state.bubbles.push({ role: "user", agent: null, text: message });
  state.composerEnabled = false;
  state.connection = "streaming";
}

export function applyEvent(state: UiSession, event: SseEvent): void {
  const { type, data } = event;
  if (state.sessionId === null) state.sessionId = data.session_id;
  switch (type) {
    case "content":
      state.bubbles.push({ role: "agent", agent: data.agent, text: String(data.payload) });
      break;
    case "progress":
      state.stage = data.stage;
      break;
    case "artifact":
      for (const [key, text] of Object.entries(data.payload as ArtifactPayload)) {
        state.artifacts[key] = text;
        applyArtifact(state.panels, key, text);
      }
      break;
    case "error":
      state.bubbles.push({ role: "error", agent: data.agent, text: String(data.payload) });
      break;
    case "done":
      state.stage = data.stage;
      state.composerEnabled = true;
      state.connection = "idle";
      break;
  }
}

/** Rebuild panels from a GET artifacts snapshot (reconnect path). */
export function applySnapshot(state: UiSession, stage: number, artifacts: Record<string, string>): void {
  state.stage = stage;
  state.artifacts = { ...artifacts };
  state.panels = { categories: [], kpiRows: [], kviCards: [] };
  for (const [key, text] of Object.entries(artifacts)) {
    applyArtifact(state.panels, key, text);
  }
}

function applyArtifact(panels: PanelModel, key: string, text: string): void {
  if (key === "finalized_categories") {
    const doc = JSON.parse(text) as { category_ids: string[] };
    panels.categories = doc.category_ids;
  } else if (key === "kpi_table") {
    const doc = JSON.parse(text) as KpiTableDoc;
    panels.kpiRows = doc.rows.map((row) => ({
      kpiId: row.kpi_id,
      symbol: row.symbol,
      unit: row.unit,
      display:
        row.value.kind === "point"
          ? fmt(row.value.point)
          : `[${fmt(row.value.lo)}, ${fmt(row.value.hi)}]`,
      badge: row.provenance === "system-decided" ? "assumption" : "user",
      rawText: row.raw_text,
    }));
  } else if (key.startsWith("kvi_result:")) {
    upsertCard(panels.kviCards, toCard(key.slice("kvi_result:".length), text));
  }
}

function toCard(code: string, text: string): KviCard {
  try {
    const doc = JSON.parse(text) as KviResultDoc;
    for (const field of ["code", "exact", "min", "max", "unit", "rationale", "flags"]) {
      if (!(field in doc)) throw new Error(`missing ${field}`);
    }
    return {
      code: doc.code,
      unit: doc.unit,
      exact: fmt(doc.exact),
      min: fmt(doc.min),
      max: fmt(doc.max),
      rationale: doc.rationale,
      flags: doc.flags,
    };
  } catch {
    // schema-invalid payload: keep the raw JSON visible rather than hiding it
    return { code, unit: "", exact: "", min: "", max: "", rationale: "", flags: [], fallbackJson: text };
  }
}

function upsertCard(cards: KviCard[], card: KviCard): void {
  const idx = cards.findIndex((c) => c.code === card.code);
  if (idx === -1) cards.push(card);
  else cards[idx] = card;
  cards.sort((a, b) => (a.code < b.code ? -1 : a.code > b.code ? 1 : 0));
}

/** Offline replay of a recorded transcript (tests, reconnect recovery). */
export function replayTranscript(events: SseEvent[]): UiSession {
  const state = createUiSession();
  for (const event of events) applyEvent(state, event);
  return state;
}
