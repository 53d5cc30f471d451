/**
 * Thin client for the station API.
 *
 * Every call resolves to an ApiInput for the reducer, including failures, so
 * the shell never branches on transport errors. GET endpoints are deduplicated:
 * while a request for an endpoint is outstanding, further calls return the
 * same promise instead of stacking sockets. POSTs happen only through
 * runCommand, which is only ever handed a Command minted by a gesture.
 */

import type { ApiInput, Command } from "./state.js";
import type {
  ActionAck,
  EventsPage,
  MessagesPage,
  PositionEstimate,
  ReplyAck,
  TopologySnapshot,
  VictimRecord,
} from "./types.js";

export interface HttpResponse {
  ok: boolean;
  status: number;
  json(): Promise<unknown>;
}

export interface HttpRequestInit {
  method?: string;
  headers?: Record<string, string>;
  body?: string;
}

export type HttpFetch = (url: string, init?: HttpRequestInit) => Promise<HttpResponse>;

async function errorText(res: HttpResponse): Promise<string> {
  try {
    const body = (await res.json()) as { error?: unknown };
    if (body && typeof body.error === "string") return body.error;
  } catch {
    // non-JSON error body; fall through to the status line
  }
  return `HTTP ${res.status}`;
}

export class ApiClient {
  private readonly base: string;
  private readonly fetchFn: HttpFetch;
  private readonly clock: () => number;
  private readonly inflight = new Map<string, Promise<ApiInput>>();

  constructor(base: string, fetchFn: HttpFetch, clock: () => number = () => Date.now() / 1000) {
    this.base = base.replace(/\/$/, "");
    this.fetchFn = fetchFn;
    this.clock = clock;
  }

  /** True while a request for the endpoint key is outstanding. */
  busy(key: string): boolean {
    return this.inflight.has(key);
  }

  private dedupe(key: string, start: () => Promise<ApiInput>): Promise<ApiInput> {
    const existing = this.inflight.get(key);
    if (existing) return existing;
    const p = start().finally(() => {
      this.inflight.delete(key);
    });
    this.inflight.set(key, p);
    return p;
  }

  private async getJson(path: string): Promise<unknown> {
    const res = await this.fetchFn(this.base + path);
    if (!res.ok) throw new Error(await errorText(res));
    return res.json();
  }

  fetchTopology(): Promise<ApiInput> {
    return this.dedupe("topology", async () => {
      try {
        const snapshot = (await this.getJson("/api/topology")) as TopologySnapshot;
        return { type: "topology", snapshot };
      } catch {
        return { type: "fetch_failed", endpoint: "topology", at: this.clock() };
      }
    });
  }

  fetchMessages(since: number): Promise<ApiInput> {
    return this.dedupe("messages", async () => {
      try {
        const page = (await this.getJson(`/api/messages?since=${since}`)) as MessagesPage;
        return { type: "messages", page };
      } catch {
        return { type: "fetch_failed", endpoint: "messages", at: this.clock() };
      }
    });
  }

  fetchVictims(): Promise<ApiInput> {
    return this.dedupe("victims", async () => {
      try {
        const body = (await this.getJson("/api/victims")) as { victims: VictimRecord[] };
        return { type: "victims", victims: body.victims };
      } catch {
        return { type: "fetch_failed", endpoint: "victims", at: this.clock() };
      }
    });
  }

  fetchEstimate(victim: string): Promise<ApiInput> {
    return this.dedupe(`estimate:${victim}`, async () => {
      try {
        const res = await this.fetchFn(this.base + `/api/estimates/${encodeURIComponent(victim)}`);
        if (!res.ok) {
          return { type: "estimate_error", victim, error: await errorText(res) };
        }
        const body = (await res.json()) as { victim: string; estimate: PositionEstimate | null };
        return { type: "estimate", victim: body.victim, estimate: body.estimate };
      } catch {
        return { type: "fetch_failed", endpoint: `estimate:${victim}`, at: this.clock() };
      }
    });
  }

  fetchEvents(since: number, timeoutS = 25): Promise<ApiInput> {
    return this.dedupe("events", async () => {
      try {
        const page = (await this.getJson(
          `/api/events?since=${since}&timeout=${timeoutS}`,
        )) as EventsPage;
        return { type: "events", page };
      } catch {
        return { type: "fetch_failed", endpoint: "events", at: this.clock() };
      }
    });
  }

  /** Execute a gesture-minted Command. The only path that issues POSTs. */
  async runCommand(command: Command): Promise<ApiInput> {
    if (command.type === "post_reply") {
      try {
        const res = await this.fetchFn(
          this.base + `/api/victims/${encodeURIComponent(command.victim)}/reply`,
          {
            method: "POST",
            headers: { "Content-Type": "application/json" },
            body: JSON.stringify({
              text: command.text,
              token: command.token,
              priority: command.priority,
            }),
          },
        );
        if (!res.ok) {
          return { type: "reply_error", token: command.token, error: await errorText(res) };
        }
        const ack = (await res.json()) as ReplyAck;
        return { type: "reply_ack", token: command.token, ack };
      } catch (err) {
        return { type: "reply_error", token: command.token, error: String(err) };
      }
    }
    try {
      const res = await this.fetchFn(this.base + "/api/scenario/event", {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify({ action: command.action, args: command.args }),
      });
      if (!res.ok) {
        return { type: "action_error", actionId: command.actionId, error: await errorText(res) };
      }
      const ack = (await res.json()) as ActionAck;
      return { type: "action_ack", actionId: command.actionId, ack };
    } catch (err) {
      return { type: "action_error", actionId: command.actionId, error: String(err) };
    }
  }

  photoUrl(photoId: string): string {
    return this.base + `/api/photos/${photoId}`;
  }
}
