"""Shared builders for randomized network tests.

networkx is used here as the independent graph oracle: connectivity
checks while generating, BFS hop counts when verifying routes.
"""

from __future__ import annotations

import math
import random

import networkx as nx

from lifeline import olsr, scenario as sc
from lifeline.params import SimParams
from lifeline.world import World


def geometric_positions(rng: random.Random, n: int,
                        radius: float = 250.0) -> dict[str, tuple[float, float]]:
    """Random connected placement of n nodes with the given link radius."""
    side = radius * max(1.5, math.sqrt(n) * 0.85)
    for _ in range(300):
        pts = {f"N-{i + 1:02d}": (rng.uniform(0, side), rng.uniform(0, side))
               for i in range(n)}
        if n == 1 or nx.is_connected(nx_graph(adjacency_of(pts, radius))):
            return pts
        side *= 0.93
    raise RuntimeError(f"could not draw a connected placement for n={n}")


def adjacency_of(pts: dict[str, tuple[float, float]],
                 radius: float) -> dict[str, set[str]]:
    adj: dict[str, set[str]] = {i: set() for i in pts}
    ids = sorted(pts)
    for k, a in enumerate(ids):
        for b in ids[k + 1:]:
            if math.dist(pts[a], pts[b]) <= radius:
                adj[a].add(b)
                adj[b].add(a)
    return adj


def nx_graph(adj: dict[str, set[str]]) -> nx.Graph:
    g = nx.Graph()
    g.add_nodes_from(sorted(adj))
    for a, nbrs in adj.items():
        for b in nbrs:
            g.add_edge(a, b)
    return g


class SyncMesh:
    """Drives bare routing engines over a fixed adjacency, no radio model.

    One hello_round delivers every node's HELLO to each neighbor; a
    tc_round originates TCs everywhere and floods them to completion,
    returning the number of transmissions used.
    """

    def __init__(self, adj: dict[str, set[str]], params: SimParams | None = None):
        self.adj = {i: sorted(nbrs) for i, nbrs in adj.items()}
        params = params or SimParams()
        self.nodes = {i: olsr.OlsrNode(i, params) for i in sorted(adj)}
        self.now = 0.0

    def hello_round(self) -> None:
        msgs = {i: node.make_hello(self.now)
                for i, node in sorted(self.nodes.items())}
        for i in sorted(self.nodes):
            for j in self.adj[i]:
                self.nodes[j].on_hello(msgs[i], self.now)
        self.now += 2.0

    def converge(self, rounds: int = 4) -> None:
        for _ in range(rounds):
            self.hello_round()

    def tc_round(self) -> int:
        """Originate TCs everywhere and flood them to completion.

        The flood itself is instantaneous here; only hello_round moves
        the clock, so neighbor holds stay comfortably fresh.
        """
        sends = 0
        wave = []
        for i in sorted(self.nodes):
            msg = self.nodes[i].make_tc(self.now)
            if msg is not None:
                wave.append((i, msg))
                sends += 1
        while wave:
            nxt = []
            for sender, msg in wave:
                for j in self.adj[sender]:
                    if self.nodes[j].on_tc(msg, sender, self.now):
                        nxt.append((j, olsr.forwarded_copy(msg)))
                        sends += 1
            wave = nxt
        return sends


def run_priority_traffic(seed: int, total: int = 500,
                         flake: float = 0.5, no_route: float = 0.1):
    """Push `total` mixed-priority messages through one queue bank with a
    flaky link, recording every pipeline event.  Returns (events, bank,
    store); events are (kind, msg_id, detail) tuples."""
    from lifeline import pipeline
    from lifeline.frames import KIND_SOS, EmergencyMessage

    rng = random.Random(seed)
    params = SimParams()
    bank = pipeline.QueueBank(params.queue_capacity)
    store = pipeline.SwapStore()
    events: list[tuple[str, str | None, dict]] = []

    def on_event(kind, msg, **detail):
        events.append((kind, msg.id if msg is not None else None, detail))

    def next_hop(msg):
        return None if rng.random() < no_route else "H"

    def send(msg, hop):
        return rng.random() >= flake

    issued = 0
    rounds = 0
    while issued < total or bank.total() or store.swapped:
        for _ in range(rng.randint(0, 5)):
            if issued >= total:
                break
            msg = EmergencyMessage(
                id=f"m-{issued}", kind=KIND_SOS, priority=rng.randrange(5),
                origin="10.1.0.1", dest="10.99.0.2")
            bank.enqueue(msg)
            events.append(("accept", msg.id, {"queue": msg.runtime_priority}))
            issued += 1
        pipeline.service_queues(bank, store, next_hop, send, params, on_event)
        rounds += 1
        assert rounds < 50_000, "traffic driver failed to drain"
    return events, bank, store


def router_world(pts: dict[str, tuple[float, float]], radius: float = 250.0,
                 seed: int = 0) -> World:
    """An event-driven world of identical always-on routers."""
    specs = [sc.NodeSpec(i, sc.ROUTER, x, y, radius)
             for i, (x, y) in sorted(pts.items())]
    return World(sc.Scenario(SimParams(seed=seed), specs, []))


def rescue_world(pts: dict[str, tuple[float, float]], radius: float = 250.0,
                 seed: int = 0, anchor_every: int = 3,
                 events: list[sc.ScenarioEvent] | None = None) -> World:
    """Routers from pts plus a station at the first router and a phone
    at the router farthest from it (by true hops)."""
    ids = sorted(pts)
    adj = adjacency_of(pts, radius)
    dists = nx.single_source_shortest_path_length(nx_graph(adj), ids[0])
    victim_host = max(ids, key=lambda i: (dists.get(i, -1), i))
    specs = []
    for k, i in enumerate(ids):
        x, y = pts[i]
        anchor = (x, y) if k % anchor_every == 0 else None
        specs.append(sc.NodeSpec(i, sc.ROUTER, x, y, radius, anchor=anchor))
    sx, sy = pts[ids[0]]
    specs.append(sc.NodeSpec("ST-0", sc.STATION, sx, sy, radius,
                             anchor=(sx, sy)))
    vx, vy = pts[victim_host]
    specs.append(sc.NodeSpec("V-99", sc.PHONE, vx, vy, 100.0))
    return World(sc.Scenario(SimParams(seed=seed), specs, events or []))
