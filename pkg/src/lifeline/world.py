"""The simulated world: nodes, radio links, and the event loop.

Deterministic discrete-event simulation.  Time is kept internally in
integer milliseconds so identical runs produce identical event orders;
the public clock is float seconds.  Every externally visible happening
is appended to an in-memory JSONL-able event log, and two runs of the
same scenario with the same seed produce byte-identical logs.

Radio model: two nodes are linked iff both are up (not down, battery
above zero) and their distance is at most the smaller of the two radio
ranges.  Frames in flight for the link latency are re-checked on
arrival, so a node dying mid-flight loses the frame (and the log says
so).
"""

from __future__ import annotations

import heapq
import json
import math
import random
from dataclasses import replace as dc_replace
from typing import Callable, Iterable

from lifeline import boot, olsr, pipeline, scenario as sc
from lifeline.backup import (
    BackupContext, BackupStore, EVENT_FORWARDED, EVENT_RECEIVED,
    battery_gate, evaluate_backup,
)
from lifeline.frames import (
    KIND_LOCADVERT, KIND_LOCREPLY, KIND_REPLY, KIND_SOS, KIND_WHEREAMI,
    EmergencyMessage, FrameError, parse_frame, serialize_frame,
)
from lifeline.locator import (
    AnchoredLocation, RESCUER_DEPLOYED, decode_location_body,
    encode_location_body,
)
from lifeline.params import STATION_NET_PREFIX, SimParams
from lifeline.station import StationService

# Kinds subject to single-copy accounting (floods are multi-copy by design).
TRACKED_KINDS = frozenset((KIND_SOS, KIND_REPLY, KIND_LOCADVERT, KIND_LOCREPLY))
# Kinds that pass through the priority queues and the battery gate.
QUEUED_KINDS = frozenset((KIND_SOS, KIND_REPLY, KIND_LOCADVERT))

BROADCAST_ADDR = "255.255.255.255"


class Node:
    """Everything one device carries around."""

    def __init__(self, spec: sc.NodeSpec, addr: str, params: SimParams):
        self.id = spec.id
        self.kind = spec.kind
        self.x = spec.x
        self.y = spec.y
        self.range_m = spec.range_m
        self.addr = addr
        self.anchor = spec.anchor
        self.backup_rules = list(spec.backup_rules)
        self.params = params

        if spec.mode is not None:
            self.mode = spec.mode
        else:
            self.mode = sc.EMERGENCY
        if spec.ac_powered is not None:
            self.ac_powered = spec.ac_powered
        else:
            # wall power for fixed installs, battery for handsets
            self.ac_powered = spec.kind in (sc.ROUTER, sc.STATION)
        if spec.drain_pct_h is not None:
            self.drain_pct_h = spec.drain_pct_h
        elif spec.kind == sc.PHONE:
            self.drain_pct_h = params.phone_drain_pct_h
        else:
            self.drain_pct_h = params.router_drain_pct_h

        self._battery_mark = spec.battery
        self._battery_t = 0.0
        self.last_check_level = spec.battery
        self.flush_done = False

        self.olsr: olsr.OlsrNode | None = None
        self.bank = pipeline.QueueBank(params.queue_capacity)
        self.swap = pipeline.SwapStore()
        self.backup_store = BackupStore(spec.id, params.backup_capacity)
        self.fwd_scheduled = False
        self.msg_seq = 0

        self.inbox: list[EmergencyMessage] = []       # messages addressed here
        self.known_anchors: dict[str, tuple[float, float, int]] = {}
        self.seen_flood: set[str] = set()
        self.queries: dict[str, list[dict]] = {}
        self.advert_known: set[str] = set()
        self.advert_last: dict[str, float] = {}
        self.last_sos_at: float | None = None

    # -- battery -------------------------------------------------------

    def battery(self, now: float) -> float:
        if self.ac_powered or self.mode == sc.DOWN or self.drain_pct_h <= 0:
            return self._battery_mark
        drained = self.drain_pct_h * (now - self._battery_t) / 3600.0
        return max(0.0, self._battery_mark - drained)

    def rebase_battery(self, now: float) -> None:
        self._battery_mark = self.battery(now)
        self._battery_t = now

    def up(self, now: float) -> bool:
        return self.mode != sc.DOWN and self.battery(now) > 0

    def next_msg_id(self) -> str:
        self.msg_seq += 1
        return f"{self.id}-{self.msg_seq}"


def distance(a: Node, b: Node) -> float:
    return math.hypot(a.x - b.x, a.y - b.y)


class World:
    def __init__(self, scn: sc.Scenario):
        self.params = scn.params
        self.rng = random.Random(scn.params.seed)
        self._now_ms = 0
        self._heap: list[tuple[int, int, str, tuple]] = []
        self._seq = 0

        self.log: list[dict] = []
        self._log_listeners: list[Callable[[dict], None]] = []
        self.counters: dict[str, int] = {
            "tc_originated": 0, "tc_forwarded": 0, "naive_flood_baseline": 0,
            "hello_sent": 0, "frames_sent": 0,
        }
        self.first_tc_emit: dict[str, float] = {}

        self.nodes: dict[str, Node] = {}
        self.addr_book: dict[str, str] = {}
        self._addr_used: set[str] = set()
        for spec in scn.nodes:
            self._add_node(spec)

        stations = sorted(n.id for n in self.nodes.values()
                          if n.kind == sc.STATION)
        self.station_id = stations[0] if stations else None
        self.station_service: StationService | None = None
        if self.station_id is not None:
            self.station_service = StationService(
                station_id=self.station_id,
                inject_reply=self._inject_reply,
                world_view=self.station_view,
                submit_event=self.schedule_operator_event,
            )
            for node in sorted(self.nodes.values(), key=lambda n: n.id):
                if node.anchor is not None:
                    self.station_service.register_anchor(
                        AnchoredLocation(node.id, node.anchor)
                    )

        # single-copy accounting
        self.accepted: dict[str, str] = {}       # msg id -> origin node
        self.inflight: dict[str, int] = {}       # msg id -> copies in the air
        self.delivered_ids: set[str] = set()
        self.dropped_ids: set[str] = set()
        self.rejected_ids: set[str] = set()

        for node in sorted(self.nodes.values(), key=lambda n: n.id):
            self._log("init", node.id,
                      kind=node.kind, x=node.x, y=node.y,
                      range=node.range_m, addr=node.addr, mode=node.mode,
                      battery=round(node.battery(0.0), 3),
                      anchor=list(node.anchor) if node.anchor else None)
            self._schedule_node(node, 0.0)
        for ev in scn.events:
            self._push(ev.at, "scenario", (ev,))

    # -- construction --------------------------------------------------

    def _assign_addr(self, spec: sc.NodeSpec) -> str:
        if spec.addr is not None:
            if spec.addr in self._addr_used:
                raise sc.ScenarioError("nodes", f"duplicate address {spec.addr}")
            return spec.addr
        prefix = {sc.PHONE: "10.1.0.", sc.ROUTER: "10.2.0.",
                  sc.STATION: STATION_NET_PREFIX}[spec.kind]
        digits = "".join(c for c in spec.id if c.isdigit())
        host = int(digits) if digits else 0
        if not 1 <= host <= 254 or f"{prefix}{host}" in self._addr_used:
            host = next(h for h in range(1, 255)
                        if f"{prefix}{h}" not in self._addr_used)
        return f"{prefix}{host}"

    def _add_node(self, spec: sc.NodeSpec) -> Node:
        addr = self._assign_addr(spec)
        self._addr_used.add(addr)
        node = Node(spec, addr, self.params)
        self.nodes[node.id] = node
        self.addr_book[addr] = node.id
        return node

    def _schedule_node(self, node: Node, at: float) -> None:
        if node.mode == sc.EMERGENCY:
            node.olsr = node.olsr or olsr.OlsrNode(node.id, self.params)
            self._push(at, "hello", (node.id,))
            self._push(at + self.params.tc_interval, "tc", (node.id,))
        elif node.mode == sc.DORMANT:
            self._push(at, "scan", (node.id,))
        self._push(at + self.params.battery_check_interval,
                   "battcheck", (node.id,))

    # -- clock and queue -----------------------------------------------

    @property
    def now(self) -> float:
        return self._now_ms / 1000.0

    def _push(self, at: float, tag: str, data: tuple) -> None:
        ms = round(at * 1000)
        if ms < self._now_ms:
            ms = self._now_ms
        self._seq += 1
        heapq.heappush(self._heap, (ms, self._seq, tag, data))

    def step(self) -> bool:
        """Process the next due event; False when nothing is pending."""
        if not self._heap:
            return False
        ms, _, tag, data = heapq.heappop(self._heap)
        self._now_ms = max(self._now_ms, ms)
        getattr(self, f"_on_{tag}")(*data)
        return True

    def run_until(self, t: float) -> None:
        target_ms = round(t * 1000)
        while self._heap and self._heap[0][0] <= target_ms:
            self.step()
        self._now_ms = max(self._now_ms, target_ms)

    def finish(self) -> None:
        active = sum(1 for n in self.nodes.values() if n.mode == sc.EMERGENCY)
        self._log("stats", "",
                  tc_originated=self.counters["tc_originated"],
                  tc_forwarded=self.counters["tc_forwarded"],
                  naive_flood_baseline=self.counters["naive_flood_baseline"],
                  hello_sent=self.counters["hello_sent"],
                  frames_sent=self.counters["frames_sent"],
                  delivered=len(self.delivered_ids),
                  dropped=len(self.dropped_ids),
                  rejected=len(self.rejected_ids),
                  active_nodes=active)

    # -- logging -------------------------------------------------------

    def _log(self, rec_kind: str, node: str, **detail) -> None:
        record = {"t": round(self.now, 6), "node": node, "kind": rec_kind,
                  "detail": detail}
        self.log.append(record)
        for listener in self._log_listeners:
            listener(record)

    def add_log_listener(self, fn: Callable[[dict], None]) -> None:
        self._log_listeners.append(fn)

    def log_bytes(self) -> bytes:
        lines = [json.dumps(rec, separators=(",", ":")) for rec in self.log]
        return ("\n".join(lines) + "\n").encode("utf-8")

    # -- radio ---------------------------------------------------------

    def linked(self, a: Node, b: Node) -> bool:
        if a is b or not a.up(self.now) or not b.up(self.now):
            return False
        return distance(a, b) <= min(a.range_m, b.range_m)

    def peers_in_range(self, node: Node) -> list[Node]:
        return [p for pid, p in sorted(self.nodes.items())
                if p is not node and self.linked(node, p)]

    def _broadcast(self, node: Node, kind: str, payload) -> None:
        for peer in self.peers_in_range(node):
            self._push(self.now + self.params.link_latency,
                       "frame", (node.id, peer.id, kind, payload))

    def _track_flight(self, msg_id: str) -> None:
        self.inflight[msg_id] = self.inflight.get(msg_id, 0) + 1

    def _untrack_flight(self, msg_id: str) -> None:
        left = self.inflight.get(msg_id, 0) - 1
        if left <= 0:
            self.inflight.pop(msg_id, None)
        else:
            self.inflight[msg_id] = left

    def _transmit(self, node: Node, msg: EmergencyMessage, peer_id: str) -> bool:
        """Point-to-point frame launch; returns False when the link is gone."""
        peer = self.nodes.get(peer_id)
        if peer is None or not self.linked(node, peer):
            return False
        msg.trace.append(node.id)
        data = serialize_frame(msg)
        if msg.kind in TRACKED_KINDS:
            self._track_flight(msg.id)
        self.counters["frames_sent"] += 1
        self._push(self.now + self.params.link_latency,
                   "frame", (node.id, peer_id, "emg", data))
        return True

    # -- protocol ticks ------------------------------------------------

    def _on_hello(self, node_id: str) -> None:
        node = self.nodes[node_id]
        if node.mode != sc.EMERGENCY or not node.up(self.now):
            return
        msg = node.olsr.make_hello(self.now)
        self.counters["hello_sent"] += 1
        self._broadcast(node, "hello", msg)
        self._maybe_advertise(node)
        self._push(self.now + self.params.hello_interval, "hello", (node_id,))

    def _on_tc(self, node_id: str) -> None:
        node = self.nodes[node_id]
        if node.mode != sc.EMERGENCY or not node.up(self.now):
            return
        msg = node.olsr.make_tc(self.now)
        if msg is not None:
            self.counters["tc_originated"] += 1
            active = sum(1 for n in self.nodes.values()
                         if n.mode == sc.EMERGENCY)
            self.counters["naive_flood_baseline"] += max(0, active - 1)
            self.first_tc_emit.setdefault(node_id, self.now)
            self._broadcast(node, "tc", msg)
        self._push(self.now + self.params.tc_interval, "tc", (node_id,))

    def _on_battcheck(self, node_id: str) -> None:
        node = self.nodes[node_id]
        if node.mode == sc.DOWN:
            return
        level = node.battery(self.now)
        node.rebase_battery(self.now)
        if level <= 0:
            node.mode = sc.DOWN
            self._log("down", node_id, reason="battery_empty")
            return
        if node.kind == sc.ROUTER and node.mode == sc.DORMANT:
            observed = level
            if self.params.battery_noise_pct > 0:
                observed = max(
                    0.0, level - self.rng.random() * self.params.battery_noise_pct
                )
            obs = boot.BatteryObservation(node.last_check_level, observed,
                                          self.now)
            if boot.consumption_check(obs):
                self._activate(node, reason="battery_drop",
                               detail=round(obs.last_check_level - observed, 6))
        if (node.mode == sc.EMERGENCY and not node.flush_done
                and level < self.params.gate_open_pct):
            node.flush_done = True
            self._low_battery_flush(node)
        node.last_check_level = node.battery(self.now)
        self._push(self.now + self.params.battery_check_interval,
                   "battcheck", (node_id,))

    def _on_scan(self, node_id: str) -> None:
        node = self.nodes[node_id]
        if node.mode != sc.DORMANT or not node.up(self.now):
            return
        beacons = []
        for peer in self.peers_in_range(node):
            if peer.mode == sc.EMERGENCY:
                beacon = boot.EmergencyBeacon(
                    peer.id, is_station=peer.kind == sc.STATION)
                beacons.append(beacon)
                self._log("beacon", node_id, heard=peer.id,
                          signature=beacon.signature,
                          station=beacon.is_station)
        decision = boot.scan_cycle(beacons, self.now, self.params.scan_interval)
        if isinstance(decision, boot.JoinEmergency):
            self._activate(node, reason="scan", detail=decision.target)
        else:
            self._push(decision.next_time, "scan", (node_id,))

    def _activate(self, node: Node, reason: str, detail=None) -> None:
        """Switch a node into emergency mode; safe to call repeatedly."""
        if node.mode == sc.EMERGENCY:
            return
        node.rebase_battery(self.now)
        node.mode = sc.EMERGENCY
        node.olsr = node.olsr or olsr.OlsrNode(node.id, self.params)
        self._push(self.now, "hello", (node.id,))
        self._push(self.now + self.params.tc_interval, "tc", (node.id,))
        self._log("boot", node.id, reason=reason, detail=detail)

    # -- frame delivery ------------------------------------------------

    def _on_frame(self, src: str, dst: str, kind: str, payload) -> None:
        node = self.nodes.get(dst)
        sender = self.nodes.get(src)
        if node is None or not node.up(self.now):
            self._drop_frame(kind, payload, dst, "receiver_down")
            return
        if sender is None or not self.linked(sender, node):
            self._drop_frame(kind, payload, dst, "link_lost")
            return
        if self.params.loss_rate > 0 and self.rng.random() < self.params.loss_rate:
            self._drop_frame(kind, payload, dst, "radio_loss")
            return
        if kind == "emg" and node.mode != sc.EMERGENCY:
            self._drop_frame(kind, payload, dst, "not_active")
            return
        if kind == "hello":
            if node.mode == sc.EMERGENCY:
                node.olsr.on_hello(payload, self.now)
            return
        if kind == "tc":
            if node.mode == sc.EMERGENCY:
                if node.olsr.on_tc(payload, src, self.now):
                    self.counters["tc_forwarded"] += 1
                    self._broadcast(node, "tc", olsr.forwarded_copy(payload))
            return
        self._on_emg(node, src, payload)

    def _drop_frame(self, kind: str, payload, dst: str, reason: str) -> None:
        if kind != "emg":
            return
        try:
            msg = parse_frame(payload)
        except FrameError:
            msg = None
        if msg is None:
            return
        if msg.kind in TRACKED_KINDS:
            self._untrack_flight(msg.id)
            self.dropped_ids.add(msg.id)
        self._log("drop", dst, id=msg.id, kind=msg.kind, reason=reason)

    def _on_emg(self, node: Node, src: str, data: bytes) -> None:
        try:
            msg = parse_frame(data)
        except FrameError as exc:
            self._log("drop", node.id, id=None, kind=None,
                      reason=f"frame_error: {exc}")
            return
        if msg is None:
            self._log("filtered", node.id, reason="not_emergency")
            return
        if msg.kind in TRACKED_KINDS:
            self._untrack_flight(msg.id)
        if msg.kind == KIND_WHEREAMI:
            self._on_whereami(node, msg)
            return
        if msg.kind == KIND_LOCREPLY:
            self._on_locreply(node, msg)
            return
        if (node.kind == sc.ROUTER and msg.kind in QUEUED_KINDS
                and not battery_gate(node.battery(self.now), msg.id,
                                     self.params.gate_open_pct,
                                     self.params.gate_close_pct)):
            self.rejected_ids.add(msg.id)
            self._log("reject", node.id, id=msg.id, kind=msg.kind,
                      battery=round(node.battery(self.now), 3))
            return
        if msg.dest == node.addr:
            self._deliver_local(node, msg)
            return
        self._accept_for_forwarding(node, msg)

    def _accept_for_forwarding(self, node: Node, msg: EmergencyMessage) -> None:
        if node.backup_rules:
            ctx = BackupContext(
                event=EVENT_RECEIVED,
                battery_pct=node.battery(self.now),
                local_load_pct=node.bank.load_pct(),
                source_load_pct=msg.source_load,
                msg_priority=msg.priority,
            )
            decision = evaluate_backup(node.backup_rules, ctx)
            if decision.backup:
                self._persist_backup(node, msg, decision.decided_by)
        msg.runtime_priority = msg.priority
        node.bank.enqueue(msg)
        self._log("enqueue", node.id, id=msg.id, kind=msg.kind,
                  queue=msg.runtime_priority, qsize=node.bank.total())
        self._ensure_fwd(node)

    def _persist_backup(self, node: Node, msg: EmergencyMessage,
                        decided_by: int | None) -> None:
        frame = serialize_frame(msg)
        receipt, evicted = node.backup_store.append(frame, msg.kind, msg.id)
        self._log("backup", node.id, id=msg.id, decided_by=decided_by,
                  receipt=receipt, evicted=evicted)

    def _deliver_local(self, node: Node, msg: EmergencyMessage) -> None:
        self.delivered_ids.add(msg.id)
        node.inbox.append(msg)
        self._log("delivered", node.id, id=msg.id, kind=msg.kind,
                  origin=msg.trace[0] if msg.trace else msg.origin,
                  hops=len(msg.trace), swaps=msg.swap_count)
        if msg.kind == KIND_LOCADVERT and msg.trace:
            info = decode_location_body(msg.body)
            if "x" in info and "y" in info:
                node.known_anchors[msg.trace[0]] = (
                    info["x"], info["y"], len(msg.trace))
        if (self.station_service is not None
                and node.id == self.station_id):
            self.station_service.ingest(msg, self.now)

    # -- pipeline service ----------------------------------------------

    def _ensure_fwd(self, node: Node) -> None:
        if not node.fwd_scheduled and node.mode == sc.EMERGENCY:
            node.fwd_scheduled = True
            self._push(self.now + self.params.fwd_service_interval,
                       "fwd", (node.id,))

    def _next_hop_for(self, node: Node) -> pipeline.NextHopFn:
        def resolve(msg: EmergencyMessage) -> str | None:
            dest_id = self.addr_book.get(msg.dest)
            if dest_id is None or node.olsr is None:
                return None
            route = node.olsr.routing_table.get(dest_id)
            return route.next_hop if route else None
        return resolve

    def _sender_for(self, node: Node) -> pipeline.SendFn:
        def send(msg: EmergencyMessage, next_hop: str) -> bool:
            peer = self.nodes.get(next_hop)
            if peer is None or not self.linked(node, peer):
                return False
            if node.backup_rules:
                ctx = BackupContext(
                    event=EVENT_FORWARDED,
                    battery_pct=node.battery(self.now),
                    local_load_pct=node.bank.load_pct(),
                    source_load_pct=msg.source_load,
                    msg_priority=msg.priority,
                )
                decision = evaluate_backup(node.backup_rules, ctx)
                if decision.backup:
                    self._persist_backup(node, msg, decision.decided_by)
            return self._transmit(node, msg, next_hop)
        return send

    def _on_fwd(self, node_id: str) -> None:
        node = self.nodes[node_id]
        node.fwd_scheduled = False
        if node.mode != sc.EMERGENCY or not node.up(self.now):
            return

        def on_event(kind: str, msg, **detail) -> None:
            detail = dict(detail)
            if msg is not None:
                detail["id"] = msg.id
                detail["msg_kind"] = msg.kind
            detail["qsize"] = node.bank.total()
            self._log(kind, node_id, **detail)

        pipeline.service_queues(
            node.bank, node.swap, self._next_hop_for(node),
            self._sender_for(node), self.params, on_event,
        )
        if node.bank.total() or node.swap.swapped:
            node.fwd_scheduled = True
            self._push(self.now + self.params.fwd_service_interval,
                       "fwd", (node_id,))

    def _low_battery_flush(self, node: Node) -> None:
        """Hand everything off before the battery dies.

        Queued messages go toward the station when routed, otherwise to
        the neighbor with the most battery left.  With nobody in range
        they stay queued but are written to the durable store.
        """
        msgs = node.bank.all_messages() + list(node.swap.swapped)
        if not msgs:
            return
        target = None
        if self.station_id is not None and node.olsr is not None:
            route = node.olsr.routing_table.get(self.station_id)
            if route is not None:
                target = route.next_hop
        if target is None:
            peers = self.peers_in_range(node)
            if peers:
                target = min(
                    peers, key=lambda p: (-p.battery(self.now), p.id)
                ).id
        if target is None:
            for msg in msgs:
                self._persist_backup(node, msg, None)
            self._log("flush", node.id, target=None, handed=0, kept=len(msgs))
            return
        handed = 0
        for msg in msgs:
            if self._transmit(node, msg, target):
                handed += 1
            else:
                self._persist_backup(node, msg, None)
        for q in node.bank.queues:
            q.clear()
        node.swap.swapped.clear()
        self._log("flush", node.id, target=target, handed=handed,
                  kept=len(msgs) - handed)

    # -- locating ------------------------------------------------------

    def start_location_query(self, origin_id: str,
                             n_hops: int | None = None) -> str:
        node = self.nodes[origin_id]
        hops = n_hops if n_hops is not None else self.params.query_hops
        qid = node.next_msg_id()
        msg = EmergencyMessage(
            id=qid, kind=KIND_WHEREAMI, priority=1, origin=node.addr,
            dest=BROADCAST_ADDR, source_load=node.bank.load_pct(),
            body=encode_location_body(0, 0, hops, ref=qid),
            created_at=self.now,
        )
        node.seen_flood.add(qid)
        node.queries[qid] = []
        msg.trace.append(node.id)
        data = serialize_frame(msg)
        for peer in self.peers_in_range(node):
            self._push(self.now + self.params.link_latency,
                       "frame", (node.id, peer.id, "emg", data))
        self._push(self.now + self.params.query_timeout,
                   "query_close", (origin_id, qid))
        self._log("locquery", origin_id, id=qid, n_hops=hops)
        return qid

    def passive_query(self, origin_id: str, n_hops: int | None = None) -> list[dict]:
        """Run a location query to completion and return the replies."""
        qid = self.start_location_query(origin_id, n_hops)
        self.run_until(self.now + self.params.query_timeout + 0.1)
        return self.nodes[origin_id].queries[qid]

    def _on_query_close(self, origin_id: str, qid: str) -> None:
        replies = self.nodes[origin_id].queries.get(qid, [])
        self._log("locquery_done", origin_id, id=qid, replies=len(replies))

    def _on_whereami(self, node: Node, msg: EmergencyMessage) -> None:
        if msg.id in node.seen_flood:
            return
        node.seen_flood.add(msg.id)
        info = decode_location_body(msg.body)
        budget = info.get("hops", 0)
        traversed = len(msg.trace)
        if node.anchor is not None:
            reply = EmergencyMessage(
                id=node.next_msg_id(), kind=KIND_LOCREPLY, priority=1,
                origin=node.addr, dest=msg.origin,
                source_load=node.bank.load_pct(),
                body=encode_location_body(node.anchor[0], node.anchor[1],
                                          traversed, ref=info.get("ref")),
                trace=list(reversed(msg.trace)),
                created_at=self.now,
            )
            self.accepted.setdefault(reply.id, node.id)
            self._log("locreply", node.id, id=reply.id, to=msg.trace[0],
                      hops=traversed)
            self._send_locreply(node, reply)
        if budget - 1 >= 1:
            relay = dc_replace(
                msg,
                body=encode_location_body(0, 0, budget - 1,
                                          ref=info.get("ref")),
                trace=msg.trace + [node.id],
            )
            relay.runtime_priority = relay.priority
            data = serialize_frame(relay)
            for peer in self.peers_in_range(node):
                self._push(self.now + self.params.link_latency,
                           "frame", (node.id, peer.id, "emg", data))

    def _send_locreply(self, node: Node, msg: EmergencyMessage) -> None:
        if not msg.trace:
            return
        next_hop = msg.trace[0]
        peer = self.nodes.get(next_hop)
        if peer is None or not self.linked(node, peer):
            self.dropped_ids.add(msg.id)
            self._log("drop", node.id, id=msg.id, kind=msg.kind,
                      reason="return_path_broken")
            return
        data = serialize_frame(msg)
        if msg.kind in TRACKED_KINDS:
            self._track_flight(msg.id)
        self.counters["frames_sent"] += 1
        self._push(self.now + self.params.link_latency,
                   "frame", (node.id, next_hop, "emg", data))

    def _on_locreply(self, node: Node, msg: EmergencyMessage) -> None:
        if not msg.trace or msg.trace[0] != node.id:
            self.dropped_ids.add(msg.id)
            self._log("drop", node.id, id=msg.id, kind=msg.kind,
                      reason="misrouted_reply")
            return
        remaining = msg.trace[1:]
        if not remaining and msg.dest == node.addr:
            self.delivered_ids.add(msg.id)
            info = decode_location_body(msg.body)
            anchor_id = self.addr_book.get(msg.origin, msg.origin)
            entry = {
                "anchor": anchor_id,
                "x": info.get("x"), "y": info.get("y"),
                "hops": info.get("hops"),
            }
            ref = info.get("ref")
            if ref in node.queries:
                node.queries[ref].append(entry)
            if info.get("hops") is not None:
                node.known_anchors[anchor_id] = (
                    entry["x"], entry["y"], entry["hops"])
            self._log("delivered", node.id, id=msg.id, kind=msg.kind,
                      origin=anchor_id, hops=len(msg.trace), swaps=0)
            return
        forwarded = dc_replace(msg, trace=remaining)
        forwarded.runtime_priority = forwarded.priority
        self._send_locreply(node, forwarded)

    def _maybe_advertise(self, node: Node) -> None:
        """Anchored nodes push their position to newly routable devices."""
        if node.anchor is None or node.olsr is None:
            return
        current = set(node.olsr.routing_table)
        fresh = current - node.advert_known
        kept = current & node.advert_known
        for dest_id in sorted(fresh):
            dest = self.nodes.get(dest_id)
            if dest is None or dest.addr.startswith(STATION_NET_PREFIX):
                kept.add(dest_id)
                continue
            last = node.advert_last.get(dest_id)
            if last is not None and self.now - last < self.params.advert_dedup_window:
                kept.add(dest_id)
                continue
            route = node.olsr.routing_table[dest_id]
            advert = EmergencyMessage(
                id=node.next_msg_id(), kind=KIND_LOCADVERT,
                priority=self.params.advert_priority, origin=node.addr,
                dest=dest.addr, source_load=node.bank.load_pct(),
                body=encode_location_body(node.anchor[0], node.anchor[1], 0),
                created_at=self.now,
            )
            self.accepted.setdefault(advert.id, node.id)
            if self._transmit(node, advert, route.next_hop):
                node.advert_last[dest_id] = self.now
                kept.add(dest_id)
                self._log("locadvert", node.id, id=advert.id, to=dest_id)
            else:
                self.accepted.pop(advert.id, None)
        node.advert_known = kept

    # -- scenario events -----------------------------------------------

    def _on_scenario(self, ev: sc.ScenarioEvent) -> None:
        handler = getattr(self, f"_ev_{ev.action}")
        handler(ev.args)

    def schedule_operator_event(self, action: str, args: dict) -> None:
        """Inject an event at the current clock (console commands)."""
        ev = sc.ScenarioEvent(self.now, action, args)
        self._push(self.now + 0.001, "scenario", (ev,))

    def _kill(self, node: Node, reason: str) -> None:
        if node.mode == sc.DOWN:
            return
        node.rebase_battery(self.now)
        node.mode = sc.DOWN
        lost = node.bank.all_messages() + list(node.swap.swapped)
        for msg in lost:
            self.dropped_ids.add(msg.id)
            self._log("drop", node.id, id=msg.id, kind=msg.kind,
                      reason="node_down")
        for q in node.bank.queues:
            q.clear()
        node.swap.swapped.clear()
        self._log("kill", node.id, reason=reason, lost=len(lost))

    def _ev_kill_node(self, args: dict) -> None:
        self._kill(self.nodes[args["node"]], "scenario")

    def _ev_partial_crash(self, args: dict) -> None:
        for node_id in args["nodes"]:
            self._kill(self.nodes[node_id], "partial_crash")

    def _ev_cut_ac_power(self, args: dict) -> None:
        node = self.nodes[args["node"]]
        node.rebase_battery(self.now)
        node.ac_powered = False
        self._log("power", node.id, ac=False)

    def _ev_restore_power(self, args: dict) -> None:
        node = self.nodes[args["node"]]
        node.rebase_battery(self.now)
        node.ac_powered = True
        self._log("power", node.id, ac=True)

    def _ev_drain_battery(self, args: dict) -> None:
        node = self.nodes[args["node"]]
        node.rebase_battery(self.now)
        node.drain_pct_h = float(args["rate"])
        self._log("drain", node.id, rate=node.drain_pct_h)

    def _ev_move_node(self, args: dict) -> None:
        node = self.nodes[args["node"]]
        node.x, node.y = float(args["x"]), float(args["y"])
        self._log("move", node.id, x=node.x, y=node.y)

    def _ev_airdrop_router(self, args: dict) -> None:
        spec = sc.NodeSpec(
            id=args["id"], kind=sc.ROUTER,
            x=float(args["x"]), y=float(args["y"]),
            range_m=float(args.get("range", self.params.router_range)),
            battery=float(args.get("battery", 100.0)),
            ac_powered=False, mode=sc.EMERGENCY,
            anchor=(tuple(args["anchor"]) if args.get("anchor") else
                    (float(args["x"]), float(args["y"]))),
        )
        node = self._add_node(spec)
        node._battery_t = self.now
        self._log("airdrop", node.id, x=node.x, y=node.y, addr=node.addr)
        self._log("init", node.id, kind=node.kind, x=node.x, y=node.y,
                  range=node.range_m, addr=node.addr, mode=node.mode,
                  battery=round(node.battery(self.now), 3),
                  anchor=list(node.anchor) if node.anchor else None)
        self._schedule_node(node, self.now)
        if self.station_service is not None and node.anchor is not None:
            self.station_service.register_anchor(
                AnchoredLocation(node.id, node.anchor, RESCUER_DEPLOYED))

    def _ev_send_sos(self, args: dict) -> None:
        node = self.nodes[args["from"]]
        if not node.up(self.now):
            self._log("drop", node.id, id=None, kind=KIND_SOS,
                      reason="origin_down")
            return
        dest_addr = self._resolve_dest(args.get("to"))
        photo = None
        if args.get("photo_b64"):
            import base64
            photo = base64.b64decode(args["photo_b64"])
        msg = EmergencyMessage(
            id=node.next_msg_id(), kind=KIND_SOS,
            priority=int(args.get("priority", 0)),
            origin=node.addr, dest=dest_addr,
            source_load=node.bank.load_pct(),
            personal_info=args.get("info", ""),
            body=args.get("body", ""),
            photo=photo, created_at=self.now,
        )
        self.accepted[msg.id] = node.id
        node.last_sos_at = self.now
        node.bank.enqueue(msg)
        self._log("sos", node.id, id=msg.id, priority=msg.priority,
                  dest=dest_addr, qsize=node.bank.total())
        self._ensure_fwd(node)

    def _resolve_dest(self, to: str | None) -> str:
        if to is None:
            if self.station_id is None:
                raise ValueError("no station to address")
            return self.nodes[self.station_id].addr
        if to in self.nodes:
            return self.nodes[to].addr
        return to

    def _inject_reply(self, victim_addr: str, text: str,
                      priority: int = 0) -> str:
        """Station-side reply origination; returns the message id."""
        station = self.nodes[self.station_id]
        msg = EmergencyMessage(
            id=station.next_msg_id(), kind=KIND_REPLY, priority=priority,
            origin=station.addr, dest=victim_addr,
            source_load=station.bank.load_pct(), body=text,
            created_at=self.now,
        )
        self.accepted[msg.id] = station.id
        station.bank.enqueue(msg)
        self._log("reply", station.id, id=msg.id, dest=victim_addr,
                  qsize=station.bank.total())
        self._ensure_fwd(station)
        return msg.id

    # -- station view --------------------------------------------------

    def station_view(self) -> dict:
        """What the station service is allowed to see between steps."""
        station = self.nodes[self.station_id]
        adjacency: dict[str, set[str]] = {}

        def connect(a: str, b: str) -> None:
            adjacency.setdefault(a, set()).add(b)
            adjacency.setdefault(b, set()).add(a)

        if station.olsr is not None:
            for n in station.olsr.symmetric_neighbors():
                connect(station.id, n)
            for nbr, twos in station.olsr.two_hop.items():
                for t in twos:
                    connect(nbr, t)
            for orig, rec in station.olsr.topology.items():
                for d in rec.dests:
                    connect(orig, d)
        routes = {}
        if station.olsr is not None:
            routes = {d: r.hops for d, r in station.olsr.routing_table.items()}
        summaries = []
        for node_id, node in sorted(self.nodes.items()):
            summaries.append({
                "id": node_id, "kind": node.kind, "x": node.x, "y": node.y,
                "range": node.range_m, "mode": node.mode, "addr": node.addr,
                "battery": round(node.battery(self.now), 3),
                "anchored": node.anchor is not None,
            })
        return {
            "now": self.now,
            "station": self.station_id,
            "nodes": summaries,
            "adjacency": adjacency,
            "routes_to_station": routes,
            "r_max": max(n.range_m for n in self.nodes.values()),
            "addr_book": dict(self.addr_book),
        }

    # -- accounting ----------------------------------------------------

    def audit(self) -> dict[str, list[str]]:
        """Locate every accepted tracked message; ids may appear once only."""
        locations: dict[str, list[str]] = {m: [] for m in self.accepted}

        def put(msg_id: str, where: str) -> None:
            if msg_id in locations:
                locations[msg_id].append(where)

        for node_id, node in sorted(self.nodes.items()):
            for msg in node.bank.all_messages():
                put(msg.id, f"queued@{node_id}")
            for msg in node.swap.swapped:
                put(msg.id, f"swapped@{node_id}")
            for msg in node.swap.archived:
                put(msg.id, f"archived@{node_id}")
        for msg_id, copies in self.inflight.items():
            for _ in range(copies):
                put(msg_id, "inflight")
        for msg_id in self.delivered_ids:
            put(msg_id, "delivered")
        for msg_id in self.dropped_ids:
            put(msg_id, "dropped")
        for msg_id in self.rejected_ids:
            put(msg_id, "rejected")
        return locations

    def write_backups(self, directory) -> list:
        paths = []
        for node_id, node in sorted(self.nodes.items()):
            if node.backup_store.records:
                paths.append(node.backup_store.write_file(directory))
        return paths
