import { describe, expect, it } from "vitest";

import { ApiClient, type HttpRequestInit, type HttpResponse } from "../src/api.js";
import type { TopologySnapshot } from "../src/types.js";
import { fixture } from "./helpers.js";

interface Call {
  url: string;
  method: string;
  body: unknown;
}

function ok(payload: unknown): HttpResponse {
  return { ok: true, status: 200, json: () => Promise.resolve(payload) };
}

function bad(status: number, error: string): HttpResponse {
  return { ok: false, status, json: () => Promise.resolve({ error, path: "" }) };
}

/** Records every request and answers from a handler. */
function fakeFetch(handler: (url: string) => HttpResponse | Promise<HttpResponse>) {
  const calls: Call[] = [];
  const fetchFn = (url: string, init?: HttpRequestInit): Promise<HttpResponse> => {
    calls.push({
      url,
      method: init?.method ?? "GET",
      body: init?.body ? JSON.parse(init.body) : null,
    });
    return Promise.resolve(handler(url));
  };
  return { calls, fetchFn };
}

describe("api client", () => {
  it("keeps at most one request per endpoint in flight", async () => {
    let release!: (r: HttpResponse) => void;
    const gate = new Promise<HttpResponse>((resolve) => {
      release = resolve;
    });
    const { calls, fetchFn } = fakeFetch(() => gate);
    const client = new ApiClient("", fetchFn);

    const p1 = client.fetchTopology();
    const p2 = client.fetchTopology();
    expect(p2).toBe(p1);
    expect(client.busy("topology")).toBe(true);
    expect(calls.length).toBe(1);

    release(ok(fixture<TopologySnapshot>("topology_t30")));
    const input = await p1;
    expect(input.type).toBe("topology");
    expect(client.busy("topology")).toBe(false);

    const p3 = client.fetchTopology();
    expect(p3).not.toBe(p1);
    release(ok(fixture<TopologySnapshot>("topology_t30")));
    await p3;
    expect(calls.length).toBe(2);
  });

  it("tracks estimate requests per victim, not globally", () => {
    const { calls, fetchFn } = fakeFetch(() => new Promise<HttpResponse>(() => {}));
    const client = new ApiClient("", fetchFn);
    void client.fetchEstimate("P-1");
    void client.fetchEstimate("P-2");
    void client.fetchEstimate("P-1");
    expect(calls.length).toBe(2);
  });

  it("never issues a POST from the polling helpers", async () => {
    const { calls, fetchFn } = fakeFetch((url) => {
      if (url.includes("/api/topology")) return ok(fixture("topology_t30"));
      if (url.includes("/api/messages")) return ok(fixture("messages"));
      if (url.includes("/api/victims")) return ok(fixture("victims"));
      if (url.includes("/api/estimates")) return ok(fixture("estimate_p1"));
      return ok(fixture("events_page"));
    });
    const client = new ApiClient("", fetchFn);

    await Promise.all([
      client.fetchTopology(),
      client.fetchMessages(0),
      client.fetchVictims(),
      client.fetchEstimate("P-1"),
      client.fetchEvents(0),
    ]);
    expect(calls.length).toBe(5);
    expect(calls.every((c) => c.method === "GET")).toBe(true);
  });

  it("posts a reply with its idempotency token and maps the ack", async () => {
    const { calls, fetchFn } = fakeFetch(() => ok(fixture("reply_first")));
    const client = new ApiClient("", fetchFn);

    const input = await client.runCommand({
      type: "post_reply",
      token: "console-1",
      victim: "P-1",
      text: "hold tight",
      priority: 1,
    });
    expect(calls[0]!.method).toBe("POST");
    expect(calls[0]!.url).toBe("/api/victims/P-1/reply");
    expect(calls[0]!.body).toEqual({ text: "hold tight", token: "console-1", priority: 1 });
    expect(input).toEqual({
      type: "reply_ack",
      token: "console-1",
      ack: { id: "ST-1-21", victim: "P-1", reused: false },
    });
  });

  it("maps a rejected reply to a reply_error with the server's message", async () => {
    const { fetchFn } = fakeFetch(() => bad(404, "unknown victim GHOST"));
    const client = new ApiClient("", fetchFn);
    const input = await client.runCommand({
      type: "post_reply",
      token: "console-9",
      victim: "GHOST",
      text: "hello",
      priority: 0,
    });
    expect(input).toEqual({
      type: "reply_error",
      token: "console-9",
      error: "unknown victim GHOST",
    });
  });

  it("maps a rejected scenario action to an action_error", async () => {
    const { calls, fetchFn } = fakeFetch(() => bad(422, "refusing to take the station down"));
    const client = new ApiClient("", fetchFn);
    const input = await client.runCommand({
      type: "post_action",
      actionId: 4,
      action: "kill_node",
      args: { node: "ST-1" },
    });
    expect(calls[0]!.url).toBe("/api/scenario/event");
    expect(calls[0]!.body).toEqual({ action: "kill_node", args: { node: "ST-1" } });
    expect(input).toEqual({
      type: "action_error",
      actionId: 4,
      error: "refusing to take the station down",
    });
  });

  it("turns a transport failure into fetch_failed stamped by the clock", async () => {
    const fetchFn = () => Promise.reject(new Error("connection refused"));
    const client = new ApiClient("", fetchFn, () => 1234.5);
    const input = await client.fetchTopology();
    expect(input).toEqual({ type: "fetch_failed", endpoint: "topology", at: 1234.5 });
  });

  it("maps an estimate 404 to estimate_error, not fetch_failed", async () => {
    const { fetchFn } = fakeFetch(() => bad(404, "unknown victim NOPE"));
    const client = new ApiClient("", fetchFn);
    const input = await client.fetchEstimate("NOPE");
    expect(input).toEqual({
      type: "estimate_error",
      victim: "NOPE",
      error: "unknown victim NOPE",
    });
  });
});
