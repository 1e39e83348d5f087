import { readFileSync } from "node:fs";
import { describe, expect, it } from "vitest";

import { replayTranscript } from "../src/model.js";
import { renderKpiTable, renderKviCard, renderPanels, renderStageChips } from "../src/render.js";
import { parseTranscript } from "../src/sse.js";

const golden = readFileSync(new URL("./fixtures/golden.sse", import.meta.url), "utf-8");
const state = replayTranscript(parseTranscript(golden));

describe("render", () => {
  it("marks the active stage chip", () => {
    const html = renderStageChips(state.stage);
    expect(html).toContain('data-stage="9"');
    expect(html).toContain('class="chip active">9<');
  });

  it("renders provenance badges on KPI rows", () => {
    const html = renderKpiTable(state.panels);
    expect(html.match(/badge assumption/g)).toHaveLength(1);
    expect(html.match(/badge user/g)).toHaveLength(2);
    expect(html).toContain("[7, 9]");
  });

  it("renders the verbatim numbers and a range bar with marker", () => {
    const card = state.panels.kviCards.find((c) => c.code === "PUC-UPCA")!;
    const html = renderKviCard(card);
    expect(html).toContain('<span class="min">70</span>');
    expect(html).toContain('<span class="exact">80</span>');
    expect(html).toContain('<span class="max">90</span>');
    expect(html).toContain('style="left: 50%"'); // 80 sits midway in [70, 90]
    expect(html).not.toContain("degenerate");
  });

  it("collapses degenerate ranges to a zero-width bar", () => {
    const html = renderKviCard({
      code: "A-B", unit: "%", exact: "5", min: "5", max: "5",
      rationale: "", flags: [],
    });
    expect(html).toContain("degenerate");
  });

  it("shows flag badges on flagged results", () => {
    const html = renderKviCard({
      code: "A-B", unit: "%", exact: "120", min: "110", max: "130",
      rationale: "", flags: ["percent-range"],
    });
    expect(html).toContain("badge flagged");
    expect(html).toContain("percent-range");
  });

  it("falls back to raw JSON for invalid payloads", () => {
    const html = renderKviCard({
      code: "A-B", unit: "", exact: "", min: "", max: "",
      rationale: "", flags: [], fallbackJson: '{"odd": 1}',
    });
    expect(html).toContain("fallback");
    expect(html).toContain("&quot;odd&quot;");
  });

  it("escapes injected markup in chat-derived content", () => {
    const html = renderPanels(state);
    expect(html).not.toContain("<script");
  });
});
