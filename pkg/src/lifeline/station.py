"""Rescuer station bookkeeping.

The station runs on the operator's side of the network: it collects
incoming emergency traffic, keeps one record per victim, stores photo
attachments by content hash, answers position queries from the passive
topology view, and lets operators reply or inject scenario events.

The service is plain single-threaded state.  It talks to the simulation
through three injected callables (reply origination, world view,
event submission) so it can be exercised in tests without any network
or event loop behind it.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Callable

from lifeline import scenario as sc
from lifeline.frames import EmergencyMessage
from lifeline.locator import AnchoredLocation, estimate_position

MAX_REPLY_CHARS = 2000


class ApiError(Exception):
    """An operator request the service refuses; carries the HTTP status."""

    def __init__(self, status: int, message: str):
        super().__init__(message)
        self.status = status
        self.message = message


@dataclass
class VictimRecord:
    victim: str
    addr: str
    first_seen: float
    last_seen: float
    message_count: int = 0
    last_priority: int | None = None
    info: str = ""
    photo_ids: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "victim": self.victim, "addr": self.addr,
            "first_seen": self.first_seen, "last_seen": self.last_seen,
            "message_count": self.message_count,
            "last_priority": self.last_priority,
            "info": self.info, "photo_ids": list(self.photo_ids),
        }


class StationService:
    def __init__(
        self,
        station_id: str,
        inject_reply: Callable[[str, str, int], str],
        world_view: Callable[[], dict],
        submit_event: Callable[[str, dict], None],
    ):
        self.station_id = station_id
        self._inject_reply = inject_reply
        self._world_view = world_view
        self._submit_event = submit_event

        self.anchors: dict[str, AnchoredLocation] = {}
        self.inbox: list[dict] = []
        self.victims: dict[str, VictimRecord] = {}
        self.photos: dict[str, bytes] = {}
        self._seen_ids: set[str] = set()
        self._reply_tokens: dict[str, str] = {}
        self._seq = 0

    def register_anchor(self, anchor: AnchoredLocation) -> None:
        self.anchors[anchor.node] = anchor

    # -- intake --------------------------------------------------------

    def ingest(self, msg: EmergencyMessage, now: float) -> None:
        """Record one delivered message; duplicates are dropped silently."""
        if msg.id in self._seen_ids:
            return
        self._seen_ids.add(msg.id)
        victim = msg.trace[0] if msg.trace else msg.origin
        record = self.victims.get(victim)
        if record is None:
            record = VictimRecord(victim=victim, addr=msg.origin,
                                  first_seen=now, last_seen=now)
            self.victims[victim] = record
        record.last_seen = now
        record.message_count += 1
        record.last_priority = msg.priority
        if msg.personal_info:
            record.info = msg.personal_info
        photo_id = None
        if msg.photo:
            photo_id = hashlib.sha256(msg.photo).hexdigest()
            self.photos[photo_id] = msg.photo
            if photo_id not in record.photo_ids:
                record.photo_ids.append(photo_id)
        self._seq += 1
        self.inbox.append({
            "seq": self._seq, "received_at": now, "victim": victim,
            "id": msg.id, "kind": msg.kind, "priority": msg.priority,
            "body": msg.body, "info": msg.personal_info,
            "hops": len(msg.trace), "swaps": msg.swap_count,
            "photo_id": photo_id,
        })

    # -- queries -------------------------------------------------------

    def messages_since(self, since: int) -> list[dict]:
        return [e for e in self.inbox if e["seq"] > since]

    def victims_json(self) -> list[dict]:
        return [self.victims[v].to_json() for v in sorted(self.victims)]

    def photo(self, photo_id: str) -> bytes:
        data = self.photos.get(photo_id)
        if data is None:
            raise ApiError(404, f"no photo {photo_id}")
        return data

    def snapshot(self) -> dict:
        view = self._world_view()
        edges = sorted({tuple(sorted((a, b)))
                        for a, nbrs in view["adjacency"].items()
                        for b in nbrs})
        return {
            "now": view["now"],
            "station": self.station_id,
            "nodes": view["nodes"],
            "edges": [list(e) for e in edges],
            "routes_to_station": view["routes_to_station"],
            "anchors": [
                {"node": a.node, "x": a.position[0], "y": a.position[1],
                 "source": a.source}
                for _, a in sorted(self.anchors.items())
            ],
            "victims": len(self.victims),
            "messages": self._seq,
        }

    def estimate(self, victim: str) -> dict:
        view = self._world_view()
        adjacency = {k: set(v) for k, v in view["adjacency"].items()}
        if victim not in self.victims and victim not in adjacency:
            raise ApiError(404, f"unknown victim {victim}")
        est = estimate_position(
            adjacency, sorted(self.anchors.values(), key=lambda a: a.node),
            victim, view["r_max"],
        )
        return {"victim": victim,
                "estimate": est.to_json() if est is not None else None}

    # -- operator actions ----------------------------------------------

    def reply(self, victim: str, text: str, token: str | None = None,
              priority: int = 0) -> dict:
        record = self.victims.get(victim)
        if record is None:
            raise ApiError(404, f"unknown victim {victim}")
        if not text or len(text) > MAX_REPLY_CHARS:
            raise ApiError(422, "reply text must be 1..%d characters"
                           % MAX_REPLY_CHARS)
        if not 0 <= int(priority) < 5:
            raise ApiError(422, "priority must be 0..4")
        if token is not None and token in self._reply_tokens:
            return {"id": self._reply_tokens[token], "victim": victim,
                    "reused": True}
        msg_id = self._inject_reply(record.addr, text, int(priority))
        if token is not None:
            self._reply_tokens[token] = msg_id
        return {"id": msg_id, "victim": victim, "reused": False}

    def operator_event(self, action: str, args: dict) -> dict:
        if action not in sc.ACTIONS:
            raise ApiError(422, f"unknown action {action}")
        if not isinstance(args, dict):
            raise ApiError(422, "args must be an object")
        targets = []
        if "node" in args:
            targets = [args["node"]]
        elif "nodes" in args:
            targets = list(args["nodes"])
        if action in ("kill_node", "partial_crash") and self.station_id in targets:
            raise ApiError(422, "refusing to take the station down")
        self._submit_event(action, args)
        return {"queued": True, "action": action}
