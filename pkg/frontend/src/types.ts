/** Payload shapes of the station HTTP/JSON API, as the server sends them. */

export type NodeKind = "phone" | "router" | "station";
export type NodeMode = "emergency" | "dormant" | "down";

export interface NodeInfo {
  id: string;
  kind: NodeKind;
  x: number;
  y: number;
  range: number;
  mode: NodeMode;
  addr: string;
  battery: number;
  anchored: boolean;
}

export interface AnchorInfo {
  node: string;
  x: number;
  y: number;
  source: string;
}

export interface TopologySnapshot {
  now: number;
  station: string;
  nodes: NodeInfo[];
  edges: [string, string][];
  routes_to_station: Record<string, number>;
  anchors: AnchorInfo[];
  victims: number;
  /** Station message sequence; doubles as the snapshot seq. */
  messages: number;
}

export interface InboxMessage {
  seq: number;
  received_at: number;
  victim: string;
  id: string;
  kind: string;
  priority: number;
  body: string;
  info: string;
  hops: number;
  swaps: number;
  photo_id: string | null;
}

export interface MessagesPage {
  messages: InboxMessage[];
  last_seq: number;
}

export interface VictimRecord {
  victim: string;
  addr: string;
  first_seen: number;
  last_seen: number;
  message_count: number;
  last_priority: number | null;
  info: string;
  photo_ids: string[];
}

export interface PositionEstimate {
  victim: string;
  anchor: string;
  anchor_position: [number, number];
  hop_distance: number;
  radius_bound: number;
  centroid: [number, number] | null;
}

export interface EstimateResponse {
  victim: string;
  estimate: PositionEstimate | null;
}

export interface ReplyAck {
  id: string;
  victim: string;
  reused: boolean;
}

export interface ActionAck {
  queued: boolean;
  action: string;
}

export interface EventRecord {
  t: number;
  node: string;
  kind: string;
  detail: Record<string, unknown>;
}

export interface EventsPage {
  events: EventRecord[];
  next: number;
}

export interface ApiErrorBody {
  error: string;
  path: string;
}
