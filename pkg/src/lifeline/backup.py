"""Configurable message backup and battery-driven admission control.

Routers can be configured with up to six backup rules.  Each rule has a
fixed tier; when several enabled rules fire for the same message the
lowest tier decides which one is credited.  Rules either apply
unconditionally to one pipeline event (received / forwarded) or attach a
condition on battery, message urgency, or queue load.

Backups are written to an append-only durable log of length-prefixed
frames, and writing happens before the frame leaves the radio so a crash
cannot lose a message that was reported sent.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

from lifeline.frames import NUM_PRIORITIES, KIND_SOS

EVENT_RECEIVED = "received"
EVENT_FORWARDED = "forwarded"

# option -> (tier, event it applies to, needs a parameter)
_OPTIONS = {
    1: (1, EVENT_RECEIVED, False),   # always back up received messages
    2: (1, EVENT_FORWARDED, False),  # always back up forwarded messages
    3: (2, None, True),              # battery below param percent
    4: (2, None, True),              # urgency above param level
    5: (3, None, True),              # local queue load above param percent
    6: (3, None, True),              # sender queue load above param percent
}


@dataclass(frozen=True)
class BackupRule:
    option: int
    param: float | None = None

    def validate(self) -> None:
        if self.option not in _OPTIONS:
            raise ValueError(f"unknown backup option {self.option}")
        tier, _, needs_param = _OPTIONS[self.option]
        if not needs_param:
            if self.param is not None:
                raise ValueError(f"option {self.option} takes no parameter")
            return
        if self.param is None:
            raise ValueError(f"option {self.option} requires a parameter")
        p = self.param
        if self.option == 3 and not 0 < p <= 100:
            raise ValueError("battery threshold must be in (0, 100]")
        if self.option == 4 and not (0 < p < NUM_PRIORITIES and float(p).is_integer()):
            raise ValueError("priority threshold must be an integer in (0, 4]")
        if self.option in (5, 6) and not 0 < p < 100:
            raise ValueError("load threshold must be in (0, 100)")

    @property
    def tier(self) -> int:
        return _OPTIONS[self.option][0]


@dataclass(frozen=True)
class BackupContext:
    event: str                 # EVENT_RECEIVED or EVENT_FORWARDED
    battery_pct: float
    local_load_pct: float
    source_load_pct: float
    msg_priority: int


@dataclass(frozen=True)
class BackupDecision:
    backup: bool
    decided_by: int | None     # winning option number


def rule_fires(rule: BackupRule, ctx: BackupContext) -> bool:
    _, event, _ = _OPTIONS[rule.option]
    if event is not None:
        return ctx.event == event
    if rule.option == 3:
        return ctx.battery_pct < rule.param
    if rule.option == 4:
        # more urgent means numerically smaller
        return ctx.msg_priority < rule.param
    if rule.option == 5:
        return ctx.local_load_pct > rule.param
    return ctx.source_load_pct > rule.param


def evaluate_backup(rules: list[BackupRule], ctx: BackupContext) -> BackupDecision:
    """Decide whether to back up; lowest firing tier takes the credit."""
    firing = [(r.tier, r.option) for r in rules if rule_fires(r, ctx)]
    if not firing:
        return BackupDecision(False, None)
    _, option = min(firing)
    return BackupDecision(True, option)


class BackupStore:
    """Bounded durable frame log for one node.

    Records keep their byte offset as a receipt.  When full, the oldest
    non-SOS record is evicted first; SOS frames go only when nothing
    else is left.
    """

    def __init__(self, node_id: str, capacity: int = 256):
        self.node_id = node_id
        self.capacity = capacity
        self.records: list[tuple[int, str, str, bytes]] = []  # offset, kind, id, frame
        self._next_offset = 0

    def append(self, frame: bytes, kind: str, msg_id: str) -> tuple[int, str | None]:
        """Store a frame; returns (receipt offset, evicted message id or None)."""
        evicted = None
        if len(self.records) >= self.capacity:
            victim = next(
                (i for i, r in enumerate(self.records) if r[1] != KIND_SOS), 0
            )
            evicted = self.records.pop(victim)[2]
        offset = self._next_offset
        self.records.append((offset, kind, msg_id, frame))
        self._next_offset += 4 + len(frame)
        return offset, evicted

    def frames(self) -> list[bytes]:
        return [frame for _, _, _, frame in self.records]

    def find(self, msg_id: str) -> bytes | None:
        for _, _, mid, frame in self.records:
            if mid == msg_id:
                return frame
        return None

    def log_name(self) -> str:
        return f"backup-{self.node_id}.log"

    def write_file(self, directory: str | Path) -> Path:
        path = Path(directory) / self.log_name()
        with open(path, "wb") as fh:
            for frame in self.frames():
                fh.write(struct.pack(">I", len(frame)))
                fh.write(frame)
        return path


def read_backup_file(path: str | Path) -> list[bytes]:
    """Stream the length-prefixed records back out of a durable log."""
    frames = []
    data = Path(path).read_bytes()
    pos = 0
    while pos < len(data):
        if pos + 4 > len(data):
            raise ValueError("truncated length prefix")
        (length,) = struct.unpack(">I", data[pos:pos + 4])
        pos += 4
        if pos + length > len(data):
            raise ValueError("truncated record")
        frames.append(data[pos:pos + length])
        pos += length
    return frames


def battery_gate(battery_pct: float, msg_id: str,
                 open_pct: float = 20.0, close_pct: float = 5.0) -> bool:
    """Admission check for incoming messages on a draining router.

    Full acceptance above open_pct, full rejection at or below
    close_pct, and a linear ramp in between keyed on a stable hash of
    the message id so the same message gets the same verdict everywhere.
    """
    if battery_pct > open_pct:
        return True
    if battery_pct <= close_pct:
        return False
    ramp = (battery_pct - close_pct) / (open_pct - close_pct) * 100.0
    residue = zlib.crc32(msg_id.encode("utf-8")) % 100
    return residue < ramp
