import type { UiSession } from "./model.js";

// Quick-action serializations; the collector parses these shapes verbatim.

export function intervalMessage(lo: string | number, hi: string | number): string {
  return `between ${lo} and ${hi}`;
}

export function delegateMessage(): string {
  return "please estimate it";
}

export function pointMessage(text: string): string {
  return text.trim();
}

export function canSend(state: UiSession): boolean {
  return state.composerEnabled && state.connection !== "streaming";
}

/** Value helpers only make sense while the collector is asking for KPIs. */
export function helpersVisible(state: UiSession): boolean {
  return state.stage === 6;
}
