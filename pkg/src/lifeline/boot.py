"""How a dormant router decides the grid is gone and it should wake up.

Two autonomous triggers, both cheap enough to run on a box that is
mostly asleep:

* battery consumption: a mains-powered router never discharges, so any
  positive drop between two battery checks means the AC feed is dead;
* beacon scan: every scan interval the router listens for the emergency
  signature from already-awake devices and joins them, preferring a
  station when one is audible.

A third trigger, an explicit operator command, is modeled as a scenario
event rather than here.
"""

from __future__ import annotations

from dataclasses import dataclass

EMERGENCY_SIGNATURE = "LIFELINE-EMG-v1"


@dataclass(frozen=True)
class BatteryObservation:
    last_check_level: float
    current_level: float
    checked_at: float


def consumption_check(obs: BatteryObservation) -> bool:
    """True when the battery lost charge since the previous check."""
    return obs.last_check_level - obs.current_level > 0


@dataclass(frozen=True)
class EmergencyBeacon:
    node: str
    signature: str = EMERGENCY_SIGNATURE
    is_station: bool = False


@dataclass(frozen=True)
class JoinEmergency:
    target: str


@dataclass(frozen=True)
class WaitRetry:
    next_time: float


def scan_cycle(beacons: list[EmergencyBeacon], now: float,
               scan_interval: float) -> JoinEmergency | WaitRetry:
    """Pick a device to join, or schedule the next listen.

    Stations win over ordinary emergency devices; ties go to the lowest
    node id.  Beacons with a foreign signature are ignored.
    """
    valid = [b for b in beacons if b.signature == EMERGENCY_SIGNATURE]
    if valid:
        stations = sorted(b.node for b in valid if b.is_station)
        if stations:
            return JoinEmergency(stations[0])
        return JoinEmergency(sorted(b.node for b in valid)[0])
    return WaitRetry(now + scan_interval)
