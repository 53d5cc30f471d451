/**
 * Replays a recorded API session against the reducer and checks that the
 * resulting view is deterministic: same fixtures in, same state and markup
 * out, with vertex and edge counts matching each snapshot along the way.
 */

import { describe, expect, it } from "vitest";

import type { ApiInput, Command } from "../src/state.js";
import { buildEstimateOverlay, buildTopologyView, renderActionsHtml, renderInboxHtml, renderRepliesHtml, renderTopologySvg, renderVictimsHtml } from "../src/views.js";
import type {
  ActionAck,
  ApiErrorBody,
  EstimateResponse,
  EventsPage,
  MessagesPage,
  ReplyAck,
  TopologySnapshot,
  VictimRecord,
} from "../src/types.js";
import { fixture, runScript, type Step } from "./helpers.js";

const REPLY_TEXT = "Rescue team is on the way, stay where you are";

/**
 * The canonical recorded session: watch the network converge, read the first
 * distress batch, reply to P-1 (with an accidental double click), airdrop a
 * relief router, kill R-11, then try to kill the station itself.
 */
function buildScript(): Step[] {
  const killAck: ActionAck = { queued: true, action: "kill_node" };
  return [
    { api: { type: "topology", snapshot: fixture<TopologySnapshot>("topology_t30") } },
    { api: { type: "messages", page: fixture<MessagesPage>("messages") } },
    { api: { type: "victims", victims: fixture<{ victims: VictimRecord[] }>("victims").victims } },
    { gesture: { type: "select_victim", victim: "P-1" } },
    {
      api: {
        type: "estimate",
        victim: "P-1",
        estimate: fixture<EstimateResponse>("estimate_p1").estimate,
      },
    },
    { api: { type: "topology", snapshot: fixture<TopologySnapshot>("topology_t75") } },
    { gesture: { type: "submit_reply", victim: "P-1", text: REPLY_TEXT, priority: 1 } },
    { gesture: { type: "submit_reply", victim: "P-1", text: REPLY_TEXT, priority: 1 } },
    { api: { type: "reply_ack", token: "console-1", ack: fixture<ReplyAck>("reply_first") } },
    { api: { type: "reply_ack", token: "console-1", ack: fixture<ReplyAck>("reply_reused") } },
    {
      gesture: {
        type: "trigger_action",
        action: "airdrop_router",
        args: { id: "AD-9", x: 360.0, y: 240.0 },
      },
    },
    { api: { type: "action_ack", actionId: 2, ack: fixture<ActionAck>("airdrop_ack") } },
    { gesture: { type: "trigger_action", action: "kill_node", args: { node: "R-11" } } },
    { api: { type: "action_ack", actionId: 3, ack: killAck } },
    { api: { type: "events", page: fixture<EventsPage>("events_page") } },
    { api: { type: "topology", snapshot: fixture<TopologySnapshot>("topology_after_airdrop") } },
    { api: { type: "topology", snapshot: fixture<TopologySnapshot>("topology_after_kill") } },
    { api: { type: "topology", snapshot: fixture<TopologySnapshot>("topology_kill_settled") } },
    { gesture: { type: "trigger_action", action: "kill_node", args: { node: "ST-1" } } },
    {
      api: {
        type: "action_error",
        actionId: 4,
        error: fixture<ApiErrorBody>("error_kill_station").error,
      },
    },
    { gesture: { type: "mark_read" } },
  ];
}

function renderAll(state: ReturnType<typeof runScript>["state"]): string {
  const topo = buildTopologyView(state);
  const overlay = buildEstimateOverlay(state, topo.transform);
  return [
    renderTopologySvg(topo, overlay),
    renderInboxHtml(state),
    renderVictimsHtml(state),
    renderRepliesHtml(state),
    renderActionsHtml(state),
  ].join("\n");
}

describe("recorded session replay", () => {
  it("is deterministic: same fixtures, same state, same markup", () => {
    const a = runScript(buildScript());
    const b = runScript(buildScript());
    expect(JSON.stringify(a.state)).toBe(JSON.stringify(b.state));
    expect(a.commands).toEqual(b.commands);
    expect(renderAll(a.state)).toBe(renderAll(b.state));
  });

  it("keeps vertex and edge counts in step with each snapshot", () => {
    const { trace } = runScript(buildScript());

    const early = buildTopologyView(trace[0]!);
    expect(early.vertices.length).toBe(21);
    expect(early.edges.length).toBe(28);
    expect(early.seq).toBe(0);

    const converged = buildTopologyView(trace[5]!);
    expect(converged.vertices.length).toBe(21);
    expect(converged.edges.length).toBe(28);
    expect(converged.seq).toBe(8);

    const afterAirdrop = buildTopologyView(trace[15]!);
    expect(afterAirdrop.vertices.length).toBe(22);
    expect(afterAirdrop.edges.length).toBe(34);

    const settled = buildTopologyView(trace[17]!);
    expect(settled.vertices.length).toBe(22);
    expect(settled.edges.length).toBe(27);

    const svg = renderTopologySvg(settled, null);
    expect((svg.match(/data-node-id=/g) ?? []).length).toBe(22);
    expect((svg.match(/data-edge=/g) ?? []).length).toBe(27);
  });

  it("never lets the displayed snapshot seq move backwards", () => {
    const { trace } = runScript(buildScript());
    const seqs = trace.map((s) => s.seq);
    for (let i = 1; i < seqs.length; i++) {
      expect(seqs[i]!).toBeGreaterThanOrEqual(seqs[i - 1]!);
    }
  });

  it("reply double-submit reuses the token and injects exactly one frame", () => {
    const { state, commands } = runScript(buildScript());

    const posts = commands.filter((c): c is Command & { type: "post_reply" } => c.type === "post_reply");
    expect(posts.length).toBe(2);
    expect(posts[0]!.token).toBe(posts[1]!.token);

    expect(state.replies.length).toBe(1);
    const reply = state.replies[0]!;
    expect(reply.submits).toBe(2);
    expect(reply.status).toBe("confirmed");
    expect(reply.frameId).toBe("ST-1-21");
    expect(reply.reused).toBe(true);

    const html = renderRepliesHtml(state);
    expect((html.match(/data-token=/g) ?? []).length).toBe(1);

    // The station event log recorded exactly one injected reply frame.
    const replyEvents = state.events.filter((e) => e.kind === "reply");
    expect(replyEvents.length).toBe(1);
    expect(replyEvents[0]!.detail["id"]).toBe("ST-1-21");
  });

  it("shows the airdrop landing and then the router in the next snapshot", () => {
    const { trace } = runScript(buildScript());

    const beforeEvents = trace[13]!;
    const airdropBefore = beforeEvents.pendingActions.find((a) => a.action === "airdrop_router")!;
    expect(airdropBefore.status).toBe("queued");

    const afterEvents = trace[14]!;
    const airdropAfter = afterEvents.pendingActions.find((a) => a.action === "airdrop_router")!;
    expect(airdropAfter.status).toBe("landed");
    expect(buildTopologyView(afterEvents).vertices.some((v) => v.id === "AD-9")).toBe(false);

    const nextSnapshot = buildTopologyView(trace[15]!);
    const dropped = nextSnapshot.vertices.find((v) => v.id === "AD-9");
    expect(dropped).toBeDefined();
    expect(dropped!.kind).toBe("router");
  });

  it("rejects killing the station inline, without touching the map", () => {
    const { state } = runScript(buildScript());
    const attempt = state.pendingActions.find(
      (a) => a.action === "kill_node" && a.args["node"] === "ST-1",
    )!;
    expect(attempt.status).toBe("rejected");
    expect(attempt.error).toContain("station");
    expect(renderActionsHtml(state)).toContain("rejected");
    expect(state.toasts.some((t) => t.text.includes("station"))).toBe(true);

    const star = buildTopologyView(state).vertices.find((v) => v.id === "ST-1")!;
    expect(star.down).toBe(false);
  });

  it("issues no POST commands when only API responses are replayed", () => {
    const apiOnly = buildScript().filter((s): s is { api: ApiInput } => "api" in s);
    const { commands } = runScript(apiOnly);
    expect(commands).toEqual([]);
  });
});
