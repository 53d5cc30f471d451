"""Victim position estimation from anchored routers.

Some routers know where they are (surveyed at install time or logged by
the rescuer who dropped them).  A device can discover nearby anchors
passively by flooding a bounded WHEREAMI query whose replies come back
along the reverse of the recorded flood trace; anchors also push their
position to newly routable devices (LOCADVERT).  The station combines
anchor positions with hop distances from its topology view to bound
each victim's location: a victim h hops from an anchor must lie inside
the disk of radius h times the largest radio range.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterable

PREINSTALLED = "preinstalled"
RESCUER_DEPLOYED = "rescuer_deployed"

MIN_CENTROID_ANCHORS = 3


@dataclass(frozen=True)
class AnchoredLocation:
    node: str
    position: tuple[float, float]
    source: str = PREINSTALLED


@dataclass(frozen=True)
class PositionEstimate:
    victim: str
    anchor: str
    anchor_position: tuple[float, float]
    hop_distance: int
    radius_bound: float
    centroid: tuple[float, float] | None

    def to_json(self) -> dict:
        return {
            "victim": self.victim,
            "anchor": self.anchor,
            "anchor_position": list(self.anchor_position),
            "hop_distance": self.hop_distance,
            "radius_bound": self.radius_bound,
            "centroid": list(self.centroid) if self.centroid else None,
        }


def encode_location_body(x: float, y: float, hops: int, ref: str | None = None) -> str:
    body = f"x={x};y={y};hops={hops}"
    return body if ref is None else body + f";ref={ref}"


def decode_location_body(body: str) -> dict:
    """Parse ``x=..;y=..;hops=..[;ref=..]``; malformed tokens are skipped
    so a mangled relayed body degrades to an empty report."""
    out: dict = {}
    for token in body.split(";"):
        if "=" not in token:
            continue
        key, value = token.split("=", 1)
        try:
            if key in ("x", "y"):
                out[key] = float(value)
            elif key == "hops":
                out[key] = int(value)
            else:
                out[key] = value
        except ValueError:
            continue
    return out


def hop_distances(adjacency: dict[str, set[str]], start: str) -> dict[str, int]:
    """Plain breadth-first hop counts over an undirected adjacency map."""
    if start not in adjacency:
        return {}
    dist = {start: 0}
    frontier = deque([start])
    while frontier:
        u = frontier.popleft()
        for v in sorted(adjacency.get(u, ())):
            if v not in dist:
                dist[v] = dist[u] + 1
                frontier.append(v)
    return dist


def estimate_position(
    adjacency: dict[str, set[str]],
    anchors: Iterable[AnchoredLocation],
    victim: str,
    r_max: float,
) -> PositionEstimate | None:
    """Bound a victim's position from the nearest reachable anchor.

    Returns None when the victim is not in the graph or no anchor is
    reachable.  With three or more reachable anchors an inverse-hop
    weighted centroid is included as a point guess; the disk bound is
    the guarantee, the centroid is not.
    """
    dist = hop_distances(adjacency, victim)
    reachable = sorted(
        (dist[a.node], a.node, a)
        for a in anchors
        if a.node in dist and dist[a.node] > 0
    )
    if not reachable:
        return None
    hops, _, nearest = reachable[0]
    centroid = None
    if len(reachable) >= MIN_CENTROID_ANCHORS:
        weight_sum = sum(1.0 / h for h, _, _ in reachable)
        cx = sum(a.position[0] / h for h, _, a in reachable) / weight_sum
        cy = sum(a.position[1] / h for h, _, a in reachable) / weight_sum
        centroid = (cx, cy)
    return PositionEstimate(
        victim=victim,
        anchor=nearest.node,
        anchor_position=nearest.position,
        hop_distance=hops,
        radius_bound=hops * r_max,
        centroid=centroid,
    )
