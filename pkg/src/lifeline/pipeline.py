"""Priority store-and-forward pipeline.

Five FIFO queues, index 0 most urgent, served strictly lowest-index
first.  A message whose destination cannot be reached right now has its
runtime priority decremented, i.e. it becomes *more* urgent; failing
again at priority 0 pushes it below zero and parks it in secondary
storage.  Parked messages come back (into queue 1) only once the two
most urgent queues are empty, and a message parked more than SWAP_LIMIT
times is archived for good.  Every CASCADE_EVERY sends the non-urgent
queues shift up one level so nothing starves.

The pipeline is deliberately ignorant of radios and routing: callers
supply a next-hop resolver and a send capability, so the whole module
can be driven synchronously in tests.
"""

from __future__ import annotations

import enum
from collections import deque
from typing import Callable, Optional

from lifeline.frames import NUM_PRIORITIES, EmergencyMessage
from lifeline.params import SimParams


class Outcome(enum.Enum):
    SENT = "sent"
    REQUEUED = "requeued"      # unreachable, now more urgent
    SWAPPED = "swapped"        # unreachable below priority 0, parked
    ARCHIVED = "archived"      # parked once too often
    NO_WORK = "no_work"


NextHopFn = Callable[[EmergencyMessage], Optional[str]]
SendFn = Callable[[EmergencyMessage, str], bool]
EventFn = Callable[..., None]


def _no_event(kind: str, msg: EmergencyMessage | None, **detail) -> None:
    pass


class QueueBank:
    """The five priority queues of one node."""

    def __init__(self, capacity: int = 50):
        self.queues: list[deque[EmergencyMessage]] = [
            deque() for _ in range(NUM_PRIORITIES)
        ]
        self.capacity = capacity
        self.sends_since_cascade = 0

    def enqueue(self, msg: EmergencyMessage) -> None:
        self.queues[msg.runtime_priority].append(msg)

    def head(self) -> tuple[int, EmergencyMessage | None]:
        for i, q in enumerate(self.queues):
            if q:
                return i, q[0]
        return -1, None

    def pop(self, index: int) -> EmergencyMessage:
        return self.queues[index].popleft()

    def occupancy(self) -> list[int]:
        return [len(q) for q in self.queues]

    def total(self) -> int:
        return sum(len(q) for q in self.queues)

    def load_pct(self) -> int:
        if self.capacity <= 0:
            return 0
        return min(100, round(self.total() * 100 / self.capacity))

    def all_messages(self) -> list[EmergencyMessage]:
        return [m for q in self.queues for m in q]


class SwapStore:
    """Secondary storage: parked messages plus the permanent archive."""

    def __init__(self):
        self.swapped: deque[EmergencyMessage] = deque()
        self.archived: list[EmergencyMessage] = []


def swap_out(store: SwapStore, msg: EmergencyMessage, swap_limit: int) -> Outcome:
    """Park an exhausted message; archive it past the swap limit."""
    msg.swap_count += 1
    if msg.swap_count > swap_limit:
        store.archived.append(msg)
        return Outcome.ARCHIVED
    store.swapped.append(msg)
    return Outcome.SWAPPED


def maybe_swap_in(bank: QueueBank, store: SwapStore, batch: int) -> list[EmergencyMessage]:
    """Bring parked messages back, but only while queues 0 and 1 are idle."""
    if bank.queues[0] or bank.queues[1] or not store.swapped:
        return []
    moved = []
    for _ in range(min(batch, len(store.swapped))):
        msg = store.swapped.popleft()
        msg.runtime_priority = 1
        bank.queues[1].append(msg)
        moved.append(msg)
    return moved


def promote_cascade(bank: QueueBank) -> int:
    """Shift queues 2..4 up one level; returns how many messages moved."""
    moved = 0
    for src in (2, 3, 4):
        dst = src - 1
        while bank.queues[src]:
            msg = bank.queues[src].popleft()
            msg.runtime_priority = dst
            bank.queues[dst].append(msg)
            moved += 1
    bank.sends_since_cascade = 0
    return moved


def forward_step(
    bank: QueueBank,
    store: SwapStore,
    next_hop_for: NextHopFn,
    send: SendFn,
    params: SimParams,
    on_event: EventFn = _no_event,
) -> Outcome:
    """One service attempt on the head of the most urgent non-empty queue."""
    index, msg = bank.head()
    if msg is None:
        return Outcome.NO_WORK
    bank.pop(index)
    next_hop = next_hop_for(msg)
    if next_hop is not None and send(msg, next_hop):
        bank.sends_since_cascade += 1
        on_event("send", msg, queue=index, next_hop=next_hop,
                 occupancy=bank.occupancy())
        if bank.sends_since_cascade >= params.cascade_every:
            moved = promote_cascade(bank)
            if moved:
                on_event("cascade", None, moved=moved,
                         occupancy=bank.occupancy())
        return Outcome.SENT
    msg.runtime_priority -= 1
    if msg.runtime_priority < 0:
        outcome = swap_out(store, msg, params.swap_limit)
        on_event("swap_out" if outcome is Outcome.SWAPPED else "archive",
                 msg, swaps=msg.swap_count)
        return outcome
    bank.enqueue(msg)
    on_event("requeue", msg, queue=msg.runtime_priority)
    return Outcome.REQUEUED


def service_queues(
    bank: QueueBank,
    store: SwapStore,
    next_hop_for: NextHopFn,
    send: SendFn,
    params: SimParams,
    on_event: EventFn = _no_event,
) -> int:
    """One service round: swap-in check, then drain the send budget.

    Each message gets at most one attempt per round; once the head is a
    message we already tried, the link situation will not have changed,
    so the round ends.  Returns the number of frames sent.
    """
    for msg in maybe_swap_in(bank, store, params.swap_in_batch):
        on_event("swap_in", msg, swaps=msg.swap_count,
                 occupancy=bank.occupancy())
    sent = 0
    attempted: set[int] = set()
    while sent < params.fwd_per_tick:
        _, msg = bank.head()
        if msg is None or id(msg) in attempted:
            break
        attempted.add(id(msg))
        if forward_step(bank, store, next_hop_for, send, params, on_event) is Outcome.SENT:
            sent += 1
    return sent
