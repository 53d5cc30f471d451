"""Proactive link-state routing (OLSR-style) for one node.

Each active node periodically broadcasts HELLO messages carrying its
neighbor list.  Hearing a HELLO that lists us confirms the link is
bidirectional.  From the confirmed neighborhood every node elects a
minimal relay set (MPRs) covering all strict two-hop neighbors; only
relays re-flood topology-control (TC) messages, and TCs advertise the
electing nodes so the rest of the network learns which links exist.
Routes are shortest-hop paths over the node's own symmetric links plus
the advertised link set.

All state lives in OlsrNode; the election and route computations are
standalone functions so they can be checked in isolation.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass, replace
from typing import Iterable, NamedTuple

from lifeline.params import SimParams

SYM = "SYM"    # bidirectional link confirmed
ASYM = "ASYM"  # heard them, not yet confirmed they hear us
MPR = "MPR"    # symmetric and elected as our relay


@dataclass(frozen=True)
class HelloMessage:
    originator: str
    listed: tuple[tuple[str, str], ...]  # (node id, link code), sorted by id
    seq: int


@dataclass(frozen=True)
class TcMessage:
    originator: str
    ansn: int                       # advertised neighbor sequence number
    advertised: tuple[str, ...]     # the originator's current electors
    ttl_hops: int


@dataclass
class NeighborEntry:
    status: str                     # SYM or ASYM
    expiry: float


@dataclass
class TopologyRecord:
    ansn: int
    dests: set[str]
    expiry: float


class Route(NamedTuple):
    next_hop: str
    hops: int


def select_mprs(neighbors: Iterable[str], two_hop: dict[str, set[str]]) -> set[str]:
    """Greedy max-coverage election of relays from symmetric neighbors.

    two_hop maps each symmetric neighbor to the nodes it reaches for us.
    Nodes already neighbors are not coverage targets.  Ties on coverage
    gain go to the lowest node id, so the result is independent of input
    iteration order.
    """
    nbrs = set(neighbors)
    cover = {n: set(two_hop.get(n, ())) - nbrs for n in nbrs}
    uncovered = set()
    for targets in cover.values():
        uncovered |= targets
    mprs: set[str] = set()
    while uncovered:
        best, best_gain = None, 0
        for n in sorted(nbrs - mprs):
            gain = len(cover[n] & uncovered)
            if gain > best_gain:
                best, best_gain = n, gain
        if best is None:
            break
        mprs.add(best)
        uncovered -= cover[best]
    return mprs


def shortest_routes(
    self_id: str,
    sym_neighbors: Iterable[str],
    topo_edges: Iterable[tuple[str, str]],
) -> dict[str, Route]:
    """Breadth-first shortest-hop routes.

    The graph is the node's own symmetric links plus directed advertised
    edges (advertiser -> elector).  Among equal-hop paths the lowest
    next-hop id wins, found by taking the minimum first hop over every
    shortest predecessor.
    """
    adj: dict[str, set[str]] = {self_id: set(sym_neighbors)}
    for a, b in topo_edges:
        adj.setdefault(a, set()).add(b)

    dist = {self_id: 0}
    first: dict[str, str] = {}
    frontier = [self_id]
    while frontier:
        nxt = []
        for u in sorted(frontier):
            for v in sorted(adj.get(u, ())):
                if v == self_id:
                    continue
                cand = v if u == self_id else first[u]
                if v not in dist:
                    dist[v] = dist[u] + 1
                    first[v] = cand
                    nxt.append(v)
                elif dist[v] == dist[u] + 1 and cand < first[v]:
                    first[v] = cand
        frontier = nxt
    return {
        d: Route(first[d], h) for d, h in dist.items() if d != self_id
    }


class OlsrNode:
    """Routing state and message handling for a single active node."""

    def __init__(self, node_id: str, params: SimParams | None = None):
        self.id = node_id
        self.params = params or SimParams()
        self.neighbors: dict[str, NeighborEntry] = {}
        self.two_hop: dict[str, set[str]] = {}
        self.mpr_set: set[str] = set()
        self.mpr_selectors: dict[str, float] = {}   # elector -> expiry
        self.topology: dict[str, TopologyRecord] = {}  # originator -> record
        self.hello_seq = 0
        self.ansn = 0
        # (originator, ansn) -> already re-flooded?  Bounded memory.
        self._seen_tc: OrderedDict[tuple[str, int], bool] = OrderedDict()
        self.first_tc_seen: dict[str, float] = {}   # originator -> first rx time
        self._routes: dict[str, Route] = {}
        self._dirty = True

    # -- views ---------------------------------------------------------

    def symmetric_neighbors(self) -> set[str]:
        return {n for n, e in self.neighbors.items() if e.status == SYM}

    @property
    def routing_table(self) -> dict[str, Route]:
        if self._dirty:
            edges = []
            for orig, rec in self.topology.items():
                edges.extend((orig, d) for d in rec.dests)
            self._routes = shortest_routes(
                self.id, self.symmetric_neighbors(), edges
            )
            self._dirty = False
        return self._routes

    def dump(self) -> dict:
        """Structured snapshot of every protocol set, for inspection."""
        return {
            "node": self.id,
            "neighbors": {
                n: {"status": e.status, "expiry": e.expiry}
                for n, e in sorted(self.neighbors.items())
            },
            "two_hop": {n: sorted(v) for n, v in sorted(self.two_hop.items())},
            "mpr_set": sorted(self.mpr_set),
            "mpr_selectors": sorted(self.mpr_selectors),
            "topology": {
                orig: {"ansn": rec.ansn, "dests": sorted(rec.dests)}
                for orig, rec in sorted(self.topology.items())
            },
            "routes": {
                d: {"next_hop": r.next_hop, "hops": r.hops}
                for d, r in sorted(self.routing_table.items())
            },
        }

    # -- aging ---------------------------------------------------------

    def expire(self, now: float) -> None:
        """Drop neighbor, elector, and topology state past its hold time."""
        stale = [n for n, e in self.neighbors.items() if e.expiry <= now]
        for n in stale:
            del self.neighbors[n]
            self.two_hop.pop(n, None)
        stale_sel = [n for n, t in self.mpr_selectors.items() if t <= now]
        for n in stale_sel:
            del self.mpr_selectors[n]
        stale_topo = [o for o, rec in self.topology.items() if rec.expiry <= now]
        for o in stale_topo:
            del self.topology[o]
        if stale or stale_topo:
            self._reselect()
            self._dirty = True

    def _reselect(self) -> None:
        self.mpr_set = select_mprs(self.symmetric_neighbors(), self.two_hop)

    # -- HELLO ---------------------------------------------------------

    def make_hello(self, now: float) -> HelloMessage:
        self.expire(now)
        listed = tuple(
            (n, MPR if n in self.mpr_set else self.neighbors[n].status)
            for n in sorted(self.neighbors)
        )
        self.hello_seq += 1
        return HelloMessage(self.id, listed, self.hello_seq)

    def on_hello(self, msg: HelloMessage, now: float) -> None:
        if msg.originator == self.id:
            return
        self.expire(now)
        sender = msg.originator
        codes = dict(msg.listed)
        status = SYM if self.id in codes else ASYM
        self.neighbors[sender] = NeighborEntry(status, now + self.params.neighb_hold)
        if status == SYM:
            self.two_hop[sender] = {
                n for n, c in msg.listed if c in (SYM, MPR) and n != self.id
            }
        else:
            self.two_hop.pop(sender, None)
        if codes.get(self.id) == MPR:
            self.mpr_selectors[sender] = now + self.params.neighb_hold
        else:
            self.mpr_selectors.pop(sender, None)
        self._reselect()
        self._dirty = True

    # -- TC ------------------------------------------------------------

    def make_tc(self, now: float) -> TcMessage | None:
        """Advertise current electors, or nothing when nobody elected us."""
        self.expire(now)
        if not self.mpr_selectors:
            return None
        self.ansn += 1
        return TcMessage(
            self.id, self.ansn, tuple(sorted(self.mpr_selectors)), self.params.tc_ttl
        )

    def on_tc(self, msg: TcMessage, forwarder: str, now: float) -> bool:
        """Absorb a TC; result says whether to re-flood it.

        Re-flooding is the relay's duty: forward when the transmitter
        elected us, the ttl allows it, and we have not already forwarded
        this (originator, ansn).  A duplicate that arrives from an
        elector after a first copy from a non-elector is still
        forwarded once, otherwise a flood can die in mid-network.
        """
        if msg.originator == self.id:
            return False
        self.expire(now)
        key = (msg.originator, msg.ansn)
        rec = self.topology.get(msg.originator)
        if rec is not None and msg.ansn < rec.ansn:
            return False  # stale replay
        if key not in self._seen_tc:
            self._remember(key)
            self.first_tc_seen.setdefault(msg.originator, now)
            if rec is None or msg.ansn > rec.ansn:
                self.topology[msg.originator] = TopologyRecord(
                    msg.ansn, set(msg.advertised), now + self.params.top_hold
                )
                self._dirty = True
            else:
                rec.expiry = now + self.params.top_hold
        forward = (
            forwarder in self.mpr_selectors
            and msg.ttl_hops > 1
            and not self._seen_tc[key]
        )
        if forward:
            self._seen_tc[key] = True
        return forward

    def _remember(self, key: tuple[str, int]) -> None:
        self._seen_tc[key] = False
        while len(self._seen_tc) > self.params.dup_window:
            self._seen_tc.popitem(last=False)


def forwarded_copy(msg: TcMessage) -> TcMessage:
    return replace(msg, ttl_hops=msg.ttl_hops - 1)
