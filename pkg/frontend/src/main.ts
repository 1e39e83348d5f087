import { BusyError, createSession, getArtifacts, streamTurn } from "./api.js";
import { canSend, delegateMessage, helpersVisible, intervalMessage, pointMessage } from "./composer.js";
import { applyEvent, applySnapshot, beginTurn, createUiSession } from "./model.js";
import { renderChat, renderPanels, renderStageChips } from "./render.js";

const state = createUiSession();

const el = (id: string) => document.getElementById(id)!;
const input = () => el("composer-input") as HTMLInputElement;

function redraw(): void {
  el("stage").innerHTML = renderStageChips(state.stage);
  el("chat").innerHTML = renderChat(state.bubbles);
  el("panels").innerHTML = renderPanels(state);
  el("chat").scrollTop = el("chat").scrollHeight;

  const enabled = canSend(state);
  for (const id of ["composer-input", "composer-send", "interval-lo", "interval-hi", "interval-send", "delegate"]) {
    (el(id) as HTMLButtonElement | HTMLInputElement).disabled = !enabled;
  }
  el("value-helpers").style.display = helpersVisible(state) ? "flex" : "none";
  el("connection").textContent = state.connection === "streaming" ? "streaming..." : "";
}

function toast(text: string): void {
  const node = el("toast");
  node.textContent = text;
  node.classList.add("visible");
  setTimeout(() => node.classList.remove("visible"), 2500);
}

async function send(message: string): Promise<void> {
  if (!canSend(state) || state.sessionId === null || !message) return;
  beginTurn(state, message);
  redraw();
  try {
    await streamTurn(state.sessionId, message, (event) => {
      applyEvent(state, event);
      redraw();
    });
  } catch (err) {
    if (err instanceof BusyError) {
      toast("turn in progress");
      return; // keep the composer disabled; the running stream will re-enable it
    }
    // dropped stream: recover panel state from the snapshot endpoint
    state.connection = "error";
    state.bubbles.push({ role: "error", agent: null, text: "connection lost, reloading state" });
    const snapshot = await getArtifacts(state.sessionId);
    applySnapshot(state, snapshot.stage, snapshot.artifacts);
    state.composerEnabled = true;
    state.connection = "idle";
  }
  redraw();
}

function wireComposer(): void {
  el("composer-send").addEventListener("click", () => {
    const text = pointMessage(input().value);
    input().value = "";
    void send(text);
  });
  input().addEventListener("keydown", (ev) => {
    if ((ev as KeyboardEvent).key === "Enter") (el("composer-send") as HTMLButtonElement).click();
  });
  el("interval-send").addEventListener("click", () => {
    const lo = (el("interval-lo") as HTMLInputElement).value.trim();
    const hi = (el("interval-hi") as HTMLInputElement).value.trim();
    if (lo && hi) void send(intervalMessage(lo, hi));
  });
  el("delegate").addEventListener("click", () => void send(delegateMessage()));
  el("chat").addEventListener("click", (ev) => {
    const target = ev.target as HTMLElement;
    if (target.dataset.action === "retry" && state.sessionId) {
      const lastUser = [...state.bubbles].reverse().find((b) => b.role === "user");
      if (lastUser) void send(lastUser.text);
    }
  });
}

async function boot(): Promise<void> {
  const fromUrl = new URLSearchParams(location.search).get("session");
  if (fromUrl) {
    state.sessionId = fromUrl;
    const snapshot = await getArtifacts(fromUrl);
    applySnapshot(state, snapshot.stage, snapshot.artifacts);
  } else {
    const created = await createSession();
    state.sessionId = created.session_id;
    state.stage = created.stage;
    history.replaceState(null, "", `?session=${created.session_id}`);
  }
  wireComposer();
  redraw();
}

void boot();
