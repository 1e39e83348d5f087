// Wire types for the backend's SSE frames and artifact payloads.

export type EventType = "progress" | "content" | "artifact" | "error" | "done";

export interface SseEvent {
  type: EventType;
  data: EventData;
}

export interface EventData {
  session_id: string;
  agent: string;
  stage: number;
  payload: unknown;
}

// artifact payloads are JSON-serialized strings keyed by artifact name
export type ArtifactPayload = Record<string, string>;

export interface KpiTableDoc {
  complete: boolean;
  rows: KpiTableRow[];
}

export interface KpiTableRow {
  kpi_id: string;
  symbol: string;
  unit: string;
  value: { kind: "point"; point: number } | { kind: "interval"; lo: number; hi: number };
  provenance: "user-provided" | "system-decided";
  raw_text: string;
}

export interface KviResultDoc {
  code: string;
  exact: number;
  min: number;
  max: number;
  unit: string;
  rationale: string;
  cited_kpis: string[];
  flags: string[];
}
