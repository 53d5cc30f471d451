/**
 * Console state and reducers.
 *
 * Everything here is pure: the state is a function of the sequence of API
 * responses and operator gestures applied to it. Replaying the same sequence
 * yields an identical state object, which is what the rendering layer and
 * the tests rely on. No I/O happens in this module; gestures that require a
 * POST return a Command for the shell to execute.
 */

import type {
  ActionAck,
  EventRecord,
  EventsPage,
  InboxMessage,
  MessagesPage,
  PositionEstimate,
  ReplyAck,
  TopologySnapshot,
  VictimRecord,
} from "./types.js";

export type ReplyStatus = "pending" | "confirmed" | "failed";

export interface ReplyEntry {
  token: string;
  victim: string;
  text: string;
  priority: number;
  status: ReplyStatus;
  /** Station frame id once the server confirms the injection. */
  frameId: string | null;
  reused: boolean;
  submits: number;
  error: string | null;
}

export type ActionStatus = "pending" | "queued" | "landed" | "rejected";

export interface PendingAction {
  id: number;
  action: string;
  args: Record<string, unknown>;
  status: ActionStatus;
  error: string | null;
}

export interface EstimateView {
  victim: string;
  estimate: PositionEstimate | null;
  error: string | null;
}

export interface Toast {
  id: number;
  text: string;
}

export interface ConsoleState {
  snapshot: TopologySnapshot | null;
  /** Snapshot sequence number: the station message counter at capture time. */
  seq: number;
  /** Set when a fetch fails, cleared by the next good topology response. */
  staleSince: number | null;
  inbox: InboxMessage[];
  /** Messages with seq above this watermark carry the unread flag. */
  readUpTo: number;
  victims: VictimRecord[];
  selectedVictim: string | null;
  estimates: Record<string, EstimateView>;
  replies: ReplyEntry[];
  pendingActions: PendingAction[];
  events: EventRecord[];
  eventsNext: number;
  toasts: Toast[];
  counter: number;
}

export function initialState(): ConsoleState {
  return {
    snapshot: null,
    seq: 0,
    staleSince: null,
    inbox: [],
    readUpTo: 0,
    victims: [],
    selectedVictim: null,
    estimates: {},
    replies: [],
    pendingActions: [],
    events: [],
    eventsNext: 0,
    toasts: [],
    counter: 0,
  };
}

export type ApiInput =
  | { type: "topology"; snapshot: TopologySnapshot }
  | { type: "messages"; page: MessagesPage }
  | { type: "victims"; victims: VictimRecord[] }
  | { type: "estimate"; victim: string; estimate: PositionEstimate | null }
  | { type: "estimate_error"; victim: string; error: string }
  | { type: "reply_ack"; token: string; ack: ReplyAck }
  | { type: "reply_error"; token: string; error: string }
  | { type: "action_ack"; actionId: number; ack: ActionAck }
  | { type: "action_error"; actionId: number; error: string }
  | { type: "events"; page: EventsPage }
  | { type: "fetch_failed"; endpoint: string; at: number };

export type Gesture =
  | { type: "select_victim"; victim: string | null }
  | { type: "mark_read" }
  | { type: "submit_reply"; victim: string; text: string; priority: number }
  | { type: "trigger_action"; action: string; args: Record<string, unknown> }
  | { type: "dismiss_toast"; id: number };

export type Command =
  | { type: "post_reply"; token: string; victim: string; text: string; priority: number }
  | { type: "post_action"; actionId: number; action: string; args: Record<string, unknown> };

const INBOX_CAP = 1000;
const EVENTS_CAP = 600;
const TOAST_CAP = 20;

function mergeInbox(current: InboxMessage[], incoming: InboxMessage[]): InboxMessage[] {
  if (incoming.length === 0) return current;
  const by = new Map<number, InboxMessage>();
  for (const m of current) by.set(m.seq, m);
  for (const m of incoming) by.set(m.seq, m);
  const merged = [...by.values()].sort((a, b) => a.seq - b.seq);
  return merged.length > INBOX_CAP ? merged.slice(merged.length - INBOX_CAP) : merged;
}

function pushToast(state: ConsoleState, text: string): ConsoleState {
  const toast = { id: state.counter + 1, text };
  const toasts = [...state.toasts, toast].slice(-TOAST_CAP);
  return { ...state, toasts, counter: state.counter + 1 };
}

/** True when the event record settles the given pending action. */
function actionLanded(action: PendingAction, ev: EventRecord): boolean {
  const args = action.args;
  switch (action.action) {
    case "airdrop_router":
      return ev.kind === "airdrop" && ev.node === args["id"];
    case "kill_node":
      return ev.kind === "kill" && ev.node === args["node"];
    case "partial_crash":
      return (
        ev.kind === "kill" &&
        Array.isArray(args["nodes"]) &&
        (args["nodes"] as unknown[]).includes(ev.node)
      );
    case "move_node":
      return ev.kind === "move" && ev.node === args["node"];
    case "send_sos":
      return ev.kind === "sos" && ev.node === args["from"];
    case "power_restore":
      return ev.kind === "power" && ev.node === args["node"];
    default:
      return false;
  }
}

function settleActions(actions: PendingAction[], fresh: EventRecord[]): PendingAction[] {
  if (actions.length === 0 || fresh.length === 0) return actions;
  let changed = false;
  const out = actions.map((a) => {
    if (a.status !== "pending" && a.status !== "queued") return a;
    if (fresh.some((ev) => actionLanded(a, ev))) {
      changed = true;
      return { ...a, status: "landed" as ActionStatus };
    }
    return a;
  });
  return changed ? out : actions;
}

export function applyApi(state: ConsoleState, input: ApiInput): ConsoleState {
  switch (input.type) {
    case "topology": {
      const snap = input.snapshot;
      // Out-of-order response: never let the view move backwards.
      if (state.snapshot && snap.now < state.snapshot.now) return state;
      if (
        state.snapshot &&
        snap.now === state.snapshot.now &&
        snap.messages < state.snapshot.messages
      ) {
        return state;
      }
      return { ...state, snapshot: snap, seq: snap.messages, staleSince: null };
    }
    case "messages":
      return { ...state, inbox: mergeInbox(state.inbox, input.page.messages) };
    case "victims":
      return { ...state, victims: input.victims };
    case "estimate":
      return {
        ...state,
        estimates: {
          ...state.estimates,
          [input.victim]: { victim: input.victim, estimate: input.estimate, error: null },
        },
      };
    case "estimate_error":
      return {
        ...state,
        estimates: {
          ...state.estimates,
          [input.victim]: { victim: input.victim, estimate: null, error: input.error },
        },
      };
    case "reply_ack": {
      const replies = state.replies.map((r) =>
        r.token === input.token
          ? {
              ...r,
              status: "confirmed" as ReplyStatus,
              frameId: input.ack.id,
              reused: r.reused || input.ack.reused,
              error: null,
            }
          : r,
      );
      return { ...state, replies };
    }
    case "reply_error": {
      const replies = state.replies.map((r) =>
        r.token === input.token
          ? { ...r, status: "failed" as ReplyStatus, error: input.error }
          : r,
      );
      return pushToast({ ...state, replies }, `reply failed: ${input.error}`);
    }
    case "action_ack": {
      const pendingActions = state.pendingActions.map((a) =>
        a.id === input.actionId && a.status === "pending"
          ? { ...a, status: "queued" as ActionStatus }
          : a,
      );
      return { ...state, pendingActions };
    }
    case "action_error": {
      const pendingActions = state.pendingActions.map((a) =>
        a.id === input.actionId
          ? { ...a, status: "rejected" as ActionStatus, error: input.error }
          : a,
      );
      return pushToast({ ...state, pendingActions }, `action rejected: ${input.error}`);
    }
    case "events": {
      const fresh = input.page.events;
      const events = [...state.events, ...fresh].slice(-EVENTS_CAP);
      return {
        ...state,
        events,
        eventsNext: input.page.next,
        pendingActions: settleActions(state.pendingActions, fresh),
      };
    }
    case "fetch_failed":
      if (state.staleSince !== null) return state;
      return { ...state, staleSince: input.at };
  }
}

export interface GestureResult {
  state: ConsoleState;
  /** POST for the shell to perform, if the gesture calls for one. */
  command: Command | null;
}

export function applyGesture(state: ConsoleState, gesture: Gesture): GestureResult {
  switch (gesture.type) {
    case "select_victim":
      return { state: { ...state, selectedVictim: gesture.victim }, command: null };
    case "mark_read": {
      const top = state.inbox.length ? state.inbox[state.inbox.length - 1]!.seq : state.readUpTo;
      return { state: { ...state, readUpTo: Math.max(state.readUpTo, top) }, command: null };
    }
    case "submit_reply": {
      // A repeat submit of a still-unacknowledged reply reuses its token so
      // the station can deduplicate; it must never mint a second frame.
      const existing = state.replies.find(
        (r) =>
          r.victim === gesture.victim && r.text === gesture.text && r.status === "pending",
      );
      if (existing) {
        const replies = state.replies.map((r) =>
          r.token === existing.token ? { ...r, submits: r.submits + 1 } : r,
        );
        return {
          state: { ...state, replies },
          command: {
            type: "post_reply",
            token: existing.token,
            victim: existing.victim,
            text: existing.text,
            priority: existing.priority,
          },
        };
      }
      const counter = state.counter + 1;
      const token = `console-${counter}`;
      const entry: ReplyEntry = {
        token,
        victim: gesture.victim,
        text: gesture.text,
        priority: gesture.priority,
        status: "pending",
        frameId: null,
        reused: false,
        submits: 1,
        error: null,
      };
      return {
        state: { ...state, replies: [...state.replies, entry], counter },
        command: {
          type: "post_reply",
          token,
          victim: gesture.victim,
          text: gesture.text,
          priority: gesture.priority,
        },
      };
    }
    case "trigger_action": {
      const counter = state.counter + 1;
      const entry: PendingAction = {
        id: counter,
        action: gesture.action,
        args: gesture.args,
        status: "pending",
        error: null,
      };
      return {
        state: { ...state, pendingActions: [...state.pendingActions, entry], counter },
        command: { type: "post_action", actionId: counter, action: gesture.action, args: gesture.args },
      };
    }
    case "dismiss_toast":
      return {
        state: { ...state, toasts: state.toasts.filter((t) => t.id !== gesture.id) },
        command: null,
      };
  }
}

/** Count of inbox messages above the read watermark. */
export function unreadCount(state: ConsoleState): number {
  let n = 0;
  for (const m of state.inbox) if (m.seq > state.readUpTo) n += 1;
  return n;
}
