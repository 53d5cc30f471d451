"""Simulation-wide tunables.

One flat dataclass so scenarios can override any knob through their
"params" block.  Times are simulated seconds, distances meters, battery
levels percent.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass


@dataclass
class SimParams:
    # Proactive routing timers
    hello_interval: float = 2.0
    tc_interval: float = 5.0
    neighb_hold: float = 6.0
    top_hold: float = 15.0
    tc_ttl: int = 16
    dup_window: int = 64          # remembered (originator, ansn) pairs per node

    # Radio and forwarding
    link_latency: float = 0.05
    fwd_per_tick: int = 4         # sends allowed per queue service
    fwd_service_interval: float = 0.2
    queue_capacity: int = 50      # denominator for load percent
    swap_limit: int = 2           # swaps beyond this archive the message
    swap_in_batch: int = 4
    cascade_every: int = 8        # sends between starvation promotions
    loss_rate: float = 0.0        # random per-frame loss, off by default

    # Power management
    battery_check_interval: float = 60.0
    scan_interval: float = 30.0
    gate_open_pct: float = 20.0   # above: accept everything
    gate_close_pct: float = 5.0   # at or below: reject everything
    phone_drain_pct_h: float = 100.0 / 24.0
    router_drain_pct_h: float = 1.0
    battery_noise_pct: float = 0.0  # aged-battery reading wobble, off by default

    # Locating
    query_hops: int = 3
    query_timeout: float = 10.0
    advert_dedup_window: float = 30.0
    advert_priority: int = 2

    # World defaults
    convergence_time: float = 30.0
    phone_range: float = 100.0
    router_range: float = 250.0
    station_range: float = 250.0
    backup_capacity: int = 256    # frames retained per durable store
    snapshot_interval: float = 1.0
    seed: int = 0

    def with_overrides(self, overrides: dict) -> "SimParams":
        """Copy with scenario overrides applied; unknown keys raise KeyError."""
        fields = {f.name for f in dataclasses.fields(self)}
        for key in overrides:
            if key not in fields:
                raise KeyError(key)
        return dataclasses.replace(self, **overrides)


# Addresses in this /24 belong to rescue stations and nothing else.
STATION_NET_PREFIX = "10.99.0."

# Well-known service port for frame exchange over real sockets.
FRAME_TCP_PORT = 33333
