/**
 * Browser shell. Wires polling, gestures, and a single render loop around
 * the pure reducer. All DOM access lives here.
 */

import { ApiClient } from "./api.js";
import {
  applyApi,
  applyGesture,
  initialState,
  type ConsoleState,
  type Gesture,
} from "./state.js";
import {
  buildEstimateOverlay,
  buildTopologyView,
  renderActionsHtml,
  renderBannerHtml,
  renderEstimatePanelHtml,
  renderInboxHtml,
  renderRepliesHtml,
  renderStatusHtml,
  renderToastsHtml,
  renderTopologySvg,
  renderVictimsHtml,
} from "./views.js";

const TOPOLOGY_MS = 2000;
const MESSAGES_MS = 2000;
const VICTIMS_MS = 5000;
const ESTIMATE_MS = 5000;

function start(): void {
  let state: ConsoleState = initialState();
  const client = new ApiClient("", (url, init) => fetch(url, init));

  const regions = new Map<string, string>();
  const el = (id: string): HTMLElement => {
    const node = document.getElementById(id);
    if (!node) throw new Error(`missing element #${id}`);
    return node;
  };

  let renderQueued = false;
  function render(): void {
    renderQueued = false;
    const topo = buildTopologyView(state);
    const overlay = buildEstimateOverlay(state, topo.transform);
    const patch = (id: string, html: string): void => {
      if (regions.get(id) === html) return;
      regions.set(id, html);
      el(id).innerHTML = html;
    };
    patch("map", renderTopologySvg(topo, overlay));
    patch("banner", renderBannerHtml(state));
    patch("status", renderStatusHtml(state));
    patch("estimate-panel", renderEstimatePanelHtml(state, overlay));
    patch("victims", renderVictimsHtml(state));
    patch("inbox", renderInboxHtml(state));
    patch("replies", renderRepliesHtml(state));
    patch("actions", renderActionsHtml(state));
    patch("toasts", renderToastsHtml(state));
  }

  function scheduleRender(): void {
    if (renderQueued) return;
    renderQueued = true;
    requestAnimationFrame(render);
  }

  function dispatch(input: Parameters<typeof applyApi>[1]): void {
    state = applyApi(state, input);
    scheduleRender();
  }

  function gesture(g: Gesture): void {
    const result = applyGesture(state, g);
    state = result.state;
    scheduleRender();
    if (result.command) {
      void client.runCommand(result.command).then(dispatch);
    }
  }

  function pollTopology(): void {
    void client.fetchTopology().then(dispatch);
  }
  function pollMessages(): void {
    const since = state.inbox.length ? state.inbox[state.inbox.length - 1]!.seq : 0;
    void client.fetchMessages(since).then(dispatch);
  }
  function pollVictims(): void {
    void client.fetchVictims().then(dispatch);
  }
  function pollEstimate(): void {
    if (state.selectedVictim) {
      void client.fetchEstimate(state.selectedVictim).then(dispatch);
    }
  }
  async function eventLoop(): Promise<void> {
    for (;;) {
      const input = await client.fetchEvents(state.eventsNext);
      dispatch(input);
      if (input.type === "fetch_failed") {
        await new Promise((resolve) => setTimeout(resolve, 2000));
      }
    }
  }

  el("victims").addEventListener("click", (ev) => {
    const row = (ev.target as HTMLElement).closest("[data-victim]");
    if (!row) return;
    const victim = row.getAttribute("data-victim");
    gesture({ type: "select_victim", victim });
    pollEstimate();
  });

  el("mark-read").addEventListener("click", () => gesture({ type: "mark_read" }));

  el("reply-form").addEventListener("submit", (ev) => {
    ev.preventDefault();
    const victim = state.selectedVictim;
    if (!victim) return;
    const text = (el("reply-text") as HTMLInputElement).value.trim();
    if (!text) return;
    const priority = Number((el("reply-priority") as HTMLSelectElement).value);
    gesture({ type: "submit_reply", victim, text, priority });
  });

  el("action-form").addEventListener("submit", (ev) => {
    ev.preventDefault();
    const action = (el("action-name") as HTMLSelectElement).value;
    const raw = (el("action-args") as HTMLInputElement).value.trim() || "{}";
    let args: Record<string, unknown>;
    try {
      args = JSON.parse(raw) as Record<string, unknown>;
    } catch {
      return;
    }
    gesture({ type: "trigger_action", action, args });
  });

  el("toasts").addEventListener("click", (ev) => {
    const toast = (ev.target as HTMLElement).closest("[data-toast-id]");
    if (!toast) return;
    gesture({ type: "dismiss_toast", id: Number(toast.getAttribute("data-toast-id")) });
  });

  pollTopology();
  pollMessages();
  pollVictims();
  setInterval(pollTopology, TOPOLOGY_MS);
  setInterval(pollMessages, MESSAGES_MS);
  setInterval(pollVictims, VICTIMS_MS);
  setInterval(pollEstimate, ESTIMATE_MS);
  void eventLoop();
  scheduleRender();
}

if (typeof document !== "undefined") {
  if (document.readyState === "loading") {
    document.addEventListener("DOMContentLoaded", start);
  } else {
    start();
  }
}
