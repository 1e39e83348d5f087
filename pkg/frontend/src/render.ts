import type { ChatBubble, KviCard, PanelModel, UiSession } from "./model.js";

// Pure HTML-string renderers; main.ts assigns them into the page. Keeping
// them DOM-free lets the tests assert on output without a browser.

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function renderStageChips(stage: number): string {
  const chips = [];
  for (let s = 1; s <= 9; s++) {
    const cls = s < stage ? "chip passed" : s === stage ? "chip active" : "chip";
    chips.push(`<span class="${cls}">${s}</span>`);
  }
  return `<div class="stage-chips" data-stage="${stage}">${chips.join("")}</div>`;
}

export function renderBubble(bubble: ChatBubble): string {
  const who = bubble.role === "user" ? "you" : bubble.agent ?? "system";
  return (
    `<div class="bubble ${bubble.role}">` +
    `<span class="author">${escapeHtml(who)}</span>` +
    `<p>${escapeHtml(bubble.text)}</p>` +
    (bubble.role === "error" ? `<button class="retry" data-action="retry">retry</button>` : "") +
    `</div>`
  );
}

export function renderChat(bubbles: ChatBubble[]): string {
  return bubbles.map(renderBubble).join("");
}

export function renderCategories(categories: string[]): string {
  if (categories.length === 0) return `<p class="empty">no categories yet</p>`;
  const items = categories.map((id) => `<li class="category">${escapeHtml(id)}</li>`);
  return `<ul class="categories">${items.join("")}</ul>`;
}

export function renderKpiTable(panels: PanelModel): string {
  if (panels.kpiRows.length === 0) return `<p class="empty">no KPI values yet</p>`;
  const rows = panels.kpiRows.map(
    (row) =>
      `<tr>` +
      `<td>${escapeHtml(row.kpiId)}</td>` +
      `<td><code>${escapeHtml(row.symbol)}</code></td>` +
      `<td class="value">${escapeHtml(row.display)}</td>` +
      `<td>${escapeHtml(row.unit)}</td>` +
      `<td><span class="badge ${row.badge}">${row.badge}</span></td>` +
      `</tr>`,
  );
  return (
    `<table class="kpi-table"><thead><tr>` +
    `<th>KPI</th><th>symbol</th><th>value</th><th>unit</th><th>source</th>` +
    `</tr></thead><tbody>${rows.join("")}</tbody></table>`
  );
}

export function renderKviCard(card: KviCard): string {
  if (card.fallbackJson !== undefined) {
    return (
      `<div class="kvi-card fallback" data-code="${escapeHtml(card.code)}">` +
      `<pre>${escapeHtml(card.fallbackJson)}</pre></div>`
    );
  }
  const min = Number(card.min);
  const max = Number(card.max);
  const exact = Number(card.exact);
  // bar geometry only; the displayed numbers stay verbatim from the payload
  const span = max - min;
  const marker = span === 0 ? 50 : ((exact - min) / span) * 100;
  const flags = card.flags.length
    ? `<span class="badge flagged">${card.flags.map(escapeHtml).join(", ")}</span>`
    : "";
  return (
    `<div class="kvi-card" data-code="${escapeHtml(card.code)}">` +
    `<h3>${escapeHtml(card.code)} <small>${escapeHtml(card.unit)}</small> ${flags}</h3>` +
    `<div class="numbers">` +
    `<span class="min">${escapeHtml(card.min)}</span>` +
    `<span class="exact">${escapeHtml(card.exact)}</span>` +
    `<span class="max">${escapeHtml(card.max)}</span>` +
    `</div>` +
    `<div class="range-bar${span === 0 ? " degenerate" : ""}">` +
    `<span class="marker" style="left: ${marker}%"></span>` +
    `</div>` +
    `<details><summary>rationale</summary><p>${escapeHtml(card.rationale)}</p></details>` +
    `</div>`
  );
}

export function renderKviCards(panels: PanelModel): string {
  if (panels.kviCards.length === 0) return `<p class="empty">no results yet</p>`;
  return panels.kviCards.map(renderKviCard).join("");
}

export function renderPanels(state: UiSession): string {
  return (
    `<section class="panel"><h2>Categories</h2>${renderCategories(state.panels.categories)}</section>` +
    `<section class="panel"><h2>KPI evidence</h2>${renderKpiTable(state.panels)}</section>` +
    `<section class="panel"><h2>KVI results</h2>${renderKviCards(state.panels)}</section>`
  );
}
