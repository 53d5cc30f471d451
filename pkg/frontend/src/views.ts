/**
 * View-model builders and SVG rendering.
 *
 * Builders map ConsoleState to plain data; renderers map that data to markup
 * strings. Both are deterministic, so an unchanged state renders to an
 * identical string and the DOM shell can skip the update entirely.
 */

import type { ConsoleState, EstimateView, PendingAction, ReplyEntry } from "./state.js";
import { unreadCount } from "./state.js";
import type { NodeKind, NodeMode } from "./types.js";

export interface Transform {
  scale: number;
  offsetX: number;
  offsetY: number;
  width: number;
  height: number;
}

export interface VertexView {
  id: string;
  kind: NodeKind;
  x: number;
  y: number;
  shape: "circle" | "square" | "star";
  fill: string;
  down: boolean;
  dormant: boolean;
  anchored: boolean;
  battery: number;
  hops: number | null;
}

export interface EdgeView {
  a: string;
  b: string;
  x1: number;
  y1: number;
  x2: number;
  y2: number;
}

export interface TopologyView {
  vertices: VertexView[];
  edges: EdgeView[];
  transform: Transform;
  seq: number;
  now: number | null;
  stale: number | null;
}

export type EstimateOverlay =
  | { kind: "disk"; cx: number; cy: number; r: number; centroid: { x: number; y: number } | null; anchor: string; radiusM: number }
  | { kind: "empty"; message: string }
  | { kind: "error"; message: string };

const PAD = 40;

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function fmt(v: number): string {
  return String(Math.round(v * 100) / 100);
}

export function computeTransform(
  points: { x: number; y: number }[],
  width: number,
  height: number,
): Transform {
  if (points.length === 0) {
    return { scale: 1, offsetX: width / 2, offsetY: height / 2, width, height };
  }
  let minX = Infinity;
  let maxX = -Infinity;
  let minY = Infinity;
  let maxY = -Infinity;
  for (const p of points) {
    if (p.x < minX) minX = p.x;
    if (p.x > maxX) maxX = p.x;
    if (p.y < minY) minY = p.y;
    if (p.y > maxY) maxY = p.y;
  }
  const spanX = Math.max(maxX - minX, 1);
  const spanY = Math.max(maxY - minY, 1);
  const scale = Math.min((width - 2 * PAD) / spanX, (height - 2 * PAD) / spanY);
  const offsetX = PAD + (width - 2 * PAD - spanX * scale) / 2 - minX * scale;
  // Flip y so north is up.
  const offsetY = height - PAD - (height - 2 * PAD - spanY * scale) / 2 + minY * scale;
  return { scale, offsetX, offsetY, width, height };
}

export function project(t: Transform, x: number, y: number): { x: number; y: number } {
  return { x: t.offsetX + x * t.scale, y: t.offsetY - y * t.scale };
}

function shapeFor(kind: NodeKind): "circle" | "square" | "star" {
  if (kind === "phone") return "circle";
  if (kind === "router") return "square";
  return "star";
}

function fillFor(mode: NodeMode, battery: number): string {
  if (mode === "down") return "#9aa0a6";
  if (mode === "dormant") return "#b9c6d2";
  if (battery >= 60) return "#2e9e5b";
  if (battery >= 25) return "#d9a128";
  return "#d64541";
}

export function buildTopologyView(state: ConsoleState, width = 900, height = 620): TopologyView {
  const snap = state.snapshot;
  if (!snap) {
    return {
      vertices: [],
      edges: [],
      transform: computeTransform([], width, height),
      seq: state.seq,
      now: null,
      stale: state.staleSince,
    };
  }
  const transform = computeTransform(snap.nodes, width, height);
  const at = new Map<string, { x: number; y: number }>();
  const vertices: VertexView[] = snap.nodes.map((n) => {
    const p = project(transform, n.x, n.y);
    at.set(n.id, p);
    return {
      id: n.id,
      kind: n.kind,
      x: p.x,
      y: p.y,
      shape: shapeFor(n.kind),
      fill: fillFor(n.mode, n.battery),
      down: n.mode === "down",
      dormant: n.mode === "dormant",
      anchored: n.anchored,
      battery: n.battery,
      hops: snap.routes_to_station[n.id] ?? null,
    };
  });
  const edges: EdgeView[] = [];
  for (const [a, b] of snap.edges) {
    const pa = at.get(a);
    const pb = at.get(b);
    if (!pa || !pb) continue;
    edges.push({ a, b, x1: pa.x, y1: pa.y, x2: pb.x, y2: pb.y });
  }
  return { vertices, edges, transform, seq: snap.messages, now: snap.now, stale: state.staleSince };
}

export function buildEstimateOverlay(
  state: ConsoleState,
  transform: Transform,
): EstimateOverlay | null {
  const victim = state.selectedVictim;
  if (!victim) return null;
  const view: EstimateView | undefined = state.estimates[victim];
  if (!view) return null;
  if (view.error) return { kind: "error", message: view.error };
  const est = view.estimate;
  if (!est) return { kind: "empty", message: "no anchors reachable" };
  const center = project(transform, est.anchor_position[0], est.anchor_position[1]);
  return {
    kind: "disk",
    cx: center.x,
    cy: center.y,
    r: est.radius_bound * transform.scale,
    centroid: est.centroid
      ? project(transform, est.centroid[0], est.centroid[1])
      : null,
    anchor: est.anchor,
    radiusM: est.radius_bound,
  };
}

function starPoints(cx: number, cy: number, outer: number): string {
  const inner = outer * 0.45;
  const pts: string[] = [];
  for (let i = 0; i < 10; i++) {
    const r = i % 2 === 0 ? outer : inner;
    const angle = -Math.PI / 2 + (i * Math.PI) / 5;
    pts.push(`${fmt(cx + r * Math.cos(angle))},${fmt(cy + r * Math.sin(angle))}`);
  }
  return pts.join(" ");
}

function vertexMarkup(v: VertexView): string {
  const cls = v.down ? "vertex down" : v.dormant ? "vertex dormant" : "vertex";
  const common =
    `class="${cls}" data-node-id="${escapeHtml(v.id)}" data-kind="${v.kind}" fill="${v.fill}"`;
  let body: string;
  if (v.shape === "circle") {
    body = `<circle ${common} cx="${fmt(v.x)}" cy="${fmt(v.y)}" r="7"/>`;
  } else if (v.shape === "square") {
    body = `<rect ${common} x="${fmt(v.x - 6)}" y="${fmt(v.y - 6)}" width="12" height="12"/>`;
  } else {
    body = `<polygon ${common} points="${starPoints(v.x, v.y, 11)}"/>`;
  }
  const ring = v.anchored
    ? `<circle class="anchor-ring" cx="${fmt(v.x)}" cy="${fmt(v.y)}" r="11" fill="none"/>`
    : "";
  const label = `<text class="node-label" x="${fmt(v.x)}" y="${fmt(v.y - 12)}">${escapeHtml(v.id)}</text>`;
  return `<g>${ring}${body}${label}</g>`;
}

export function renderTopologySvg(view: TopologyView, overlay: EstimateOverlay | null): string {
  const t = view.transform;
  const parts: string[] = [];
  parts.push(
    `<svg viewBox="0 0 ${t.width} ${t.height}" xmlns="http://www.w3.org/2000/svg" role="img">`,
  );
  for (const e of view.edges) {
    parts.push(
      `<line class="edge" data-edge="${escapeHtml(e.a)}|${escapeHtml(e.b)}" ` +
        `x1="${fmt(e.x1)}" y1="${fmt(e.y1)}" x2="${fmt(e.x2)}" y2="${fmt(e.y2)}"/>`,
    );
  }
  if (overlay && overlay.kind === "disk") {
    parts.push(
      `<circle class="estimate-disk" cx="${fmt(overlay.cx)}" cy="${fmt(overlay.cy)}" ` +
        `r="${fmt(overlay.r)}"/>`,
    );
    if (overlay.centroid) {
      parts.push(
        `<path class="estimate-centroid" d="M ${fmt(overlay.centroid.x - 6)} ${fmt(overlay.centroid.y)} ` +
          `L ${fmt(overlay.centroid.x + 6)} ${fmt(overlay.centroid.y)} ` +
          `M ${fmt(overlay.centroid.x)} ${fmt(overlay.centroid.y - 6)} ` +
          `L ${fmt(overlay.centroid.x)} ${fmt(overlay.centroid.y + 6)}"/>`,
      );
    }
  }
  for (const v of view.vertices) {
    parts.push(vertexMarkup(v));
  }
  parts.push("</svg>");
  return parts.join("");
}

export interface InboxRow {
  seq: number;
  receivedAt: number;
  victim: string;
  kind: string;
  priority: number;
  body: string;
  info: string;
  photoId: string | null;
  unread: boolean;
}

export function buildInbox(state: ConsoleState): { rows: InboxRow[]; unread: number } {
  const rows = state.inbox
    .map((m) => ({
      seq: m.seq,
      receivedAt: m.received_at,
      victim: m.victim,
      kind: m.kind,
      priority: m.priority,
      body: m.body,
      info: m.info,
      photoId: m.photo_id,
      unread: m.seq > state.readUpTo,
    }))
    .reverse();
  return { rows, unread: unreadCount(state) };
}

export function renderInboxHtml(state: ConsoleState): string {
  const { rows, unread } = buildInbox(state);
  const parts: string[] = [];
  parts.push(`<div class="inbox-head">Inbox <span class="unread-count">${unread}</span></div>`);
  if (rows.length === 0) {
    parts.push(`<p class="empty">no messages yet</p>`);
  }
  for (const r of rows) {
    const cls = r.unread ? "msg unread" : "msg";
    parts.push(
      `<div class="${cls}" data-seq="${r.seq}" data-victim="${escapeHtml(r.victim)}">` +
        `<span class="msg-meta">#${r.seq} t=${fmt(r.receivedAt)} p${r.priority} ` +
        `${escapeHtml(r.victim)} ${escapeHtml(r.kind)}</span>` +
        `<span class="msg-body">${escapeHtml(r.body)}</span>` +
        (r.info ? `<span class="msg-info">${escapeHtml(r.info)}</span>` : "") +
        (r.photoId ? `<span class="msg-photo" data-photo="${escapeHtml(r.photoId)}">photo</span>` : "") +
        `</div>`,
    );
  }
  return parts.join("");
}

export function renderVictimsHtml(state: ConsoleState): string {
  const parts: string[] = [];
  for (const v of state.victims) {
    const sel = v.victim === state.selectedVictim ? "victim selected" : "victim";
    parts.push(
      `<div class="${sel}" data-victim="${escapeHtml(v.victim)}">` +
        `<span class="victim-id">${escapeHtml(v.victim)}</span>` +
        `<span class="victim-meta">${v.message_count} msgs, last t=${fmt(v.last_seen)}` +
        (v.last_priority === null ? "" : `, p${v.last_priority}`) +
        `</span>` +
        (v.info ? `<span class="victim-info">${escapeHtml(v.info)}</span>` : "") +
        `</div>`,
    );
  }
  if (parts.length === 0) parts.push(`<p class="empty">no victims reported</p>`);
  return parts.join("");
}

function replyLine(r: ReplyEntry): string {
  const note =
    r.status === "confirmed"
      ? `sent as ${escapeHtml(r.frameId ?? "?")}${r.reused ? " (deduplicated)" : ""}`
      : r.status === "failed"
        ? `failed: ${escapeHtml(r.error ?? "")}`
        : "pending";
  return (
    `<div class="reply ${r.status}" data-token="${escapeHtml(r.token)}">` +
    `<span class="reply-victim">${escapeHtml(r.victim)}</span>` +
    `<span class="reply-text">${escapeHtml(r.text)}</span>` +
    `<span class="reply-status">${note}</span>` +
    `</div>`
  );
}

export function renderRepliesHtml(state: ConsoleState): string {
  if (state.replies.length === 0) return `<p class="empty">no replies sent</p>`;
  return state.replies.map(replyLine).join("");
}

function actionLine(a: PendingAction): string {
  const note =
    a.status === "rejected" ? `rejected: ${escapeHtml(a.error ?? "")}` : a.status;
  return (
    `<div class="action ${a.status}" data-action-id="${a.id}">` +
    `<span class="action-name">${escapeHtml(a.action)}</span>` +
    `<span class="action-args">${escapeHtml(JSON.stringify(a.args))}</span>` +
    `<span class="action-status">${note}</span>` +
    `</div>`
  );
}

export function renderActionsHtml(state: ConsoleState): string {
  if (state.pendingActions.length === 0) return `<p class="empty">no operator actions</p>`;
  return state.pendingActions.map(actionLine).join("");
}

export function renderBannerHtml(state: ConsoleState): string {
  if (state.staleSince === null) return "";
  return (
    `<div class="stale-banner">station unreachable, showing stale snapshot ` +
    `(seq ${state.seq})</div>`
  );
}

export function renderStatusHtml(state: ConsoleState): string {
  const now = state.snapshot ? fmt(state.snapshot.now) : "-";
  return (
    `<span class="status-now">t=${now}</span>` +
    `<span class="status-seq">seq ${state.seq}</span>` +
    `<span class="status-victims">${state.victims.length} victims</span>`
  );
}

export function renderEstimatePanelHtml(state: ConsoleState, overlay: EstimateOverlay | null): string {
  if (!state.selectedVictim) return `<p class="empty">select a victim to estimate</p>`;
  if (!overlay) return `<p class="empty">estimate not fetched yet</p>`;
  if (overlay.kind === "error") return `<p class="estimate-error">${escapeHtml(overlay.message)}</p>`;
  if (overlay.kind === "empty") return `<p class="estimate-none">no anchors reachable</p>`;
  return (
    `<p class="estimate-summary">within ${fmt(overlay.radiusM)} m of ` +
    `${escapeHtml(overlay.anchor)}${overlay.centroid ? ", centroid marked" : ""}</p>`
  );
}

export function renderToastsHtml(state: ConsoleState): string {
  return state.toasts
    .map((t) => `<div class="toast" data-toast-id="${t.id}">${escapeHtml(t.text)}</div>`)
    .join("");
}
