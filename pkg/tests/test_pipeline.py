"""Priority queue pipeline tests driven through fake links."""

from lifeline import pipeline
from lifeline.frames import KIND_SOS, EmergencyMessage
from lifeline.params import SimParams
from worldgen import run_priority_traffic

PARAMS = SimParams()


def msg(i, prio):
    return EmergencyMessage(id=f"m-{i}", kind=KIND_SOS, priority=prio,
                            origin="10.1.0.1", dest="10.99.0.2")


def reachable(m):
    return "H"


def unreachable(m):
    return None


def send_ok(m, hop):
    return True


def test_serves_lowest_queue_first():
    bank, store = pipeline.QueueBank(), pipeline.SwapStore()
    for i, prio in enumerate((3, 0, 2)):
        bank.enqueue(msg(i, prio))
    order = []
    pipeline.service_queues(bank, store, reachable,
                            lambda m, h: order.append(m.id) or True, PARAMS)
    assert order == ["m-1", "m-2", "m-0"]


def test_unreachable_head_becomes_more_urgent():
    bank, store = pipeline.QueueBank(), pipeline.SwapStore()
    m = msg(0, 2)
    bank.enqueue(m)
    out = pipeline.forward_step(bank, store, unreachable, send_ok, PARAMS)
    assert out is pipeline.Outcome.REQUEUED
    assert m.runtime_priority == 1
    assert bank.occupancy() == [0, 1, 0, 0, 0]
    assert m.priority == 2          # header priority untouched

    pipeline.forward_step(bank, store, unreachable, send_ok, PARAMS)
    assert m.runtime_priority == 0
    out = pipeline.forward_step(bank, store, unreachable, send_ok, PARAMS)
    assert out is pipeline.Outcome.SWAPPED
    assert m.swap_count == 1
    assert list(store.swapped) == [m]
    assert bank.total() == 0


def test_send_failure_counts_like_no_route():
    bank, store = pipeline.QueueBank(), pipeline.SwapStore()
    m = msg(0, 1)
    bank.enqueue(m)
    out = pipeline.forward_step(bank, store, reachable,
                                lambda mm, h: False, PARAMS)
    assert out is pipeline.Outcome.REQUEUED
    assert m.runtime_priority == 0
    assert bank.sends_since_cascade == 0


def test_swap_in_only_when_urgent_queues_empty():
    bank, store = pipeline.QueueBank(), pipeline.SwapStore()
    parked = msg(9, 0)
    parked.swap_count = 1
    store.swapped.append(parked)

    bank.enqueue(msg(0, 0))
    assert pipeline.maybe_swap_in(bank, store, PARAMS.swap_in_batch) == []
    bank.pop(0)
    bank.enqueue(msg(1, 1))
    assert pipeline.maybe_swap_in(bank, store, PARAMS.swap_in_batch) == []
    bank.pop(1)
    moved = pipeline.maybe_swap_in(bank, store, PARAMS.swap_in_batch)
    assert moved == [parked]
    assert parked.runtime_priority == 1


def test_two_swapped_messages_return_to_queue_one_in_order():
    bank, store = pipeline.QueueBank(), pipeline.SwapStore()
    first, second = msg(0, 0), msg(1, 0)
    store.swapped.extend([first, second])
    moved = pipeline.maybe_swap_in(bank, store, PARAMS.swap_in_batch)
    assert moved == [first, second]
    assert list(bank.queues[1]) == [first, second]


def test_swap_in_batch_size():
    bank, store = pipeline.QueueBank(), pipeline.SwapStore()
    parked = [msg(i, 0) for i in range(6)]
    store.swapped.extend(parked)
    moved = pipeline.maybe_swap_in(bank, store, PARAMS.swap_in_batch)
    assert moved == parked[:4]
    assert list(store.swapped) == parked[4:]


def test_message_archives_after_swap_limit_and_never_returns():
    bank, store = pipeline.QueueBank(), pipeline.SwapStore()
    m = msg(0, 0)
    bank.enqueue(m)
    for _ in range(12):
        pipeline.service_queues(bank, store, unreachable, send_ok, PARAMS)
        if store.archived:
            break
    assert store.archived == [m]
    assert m.swap_count == 3
    assert bank.total() == 0
    assert not store.swapped
    before = len(store.archived)
    pipeline.service_queues(bank, store, unreachable, send_ok, PARAMS)
    assert bank.total() == 0 and len(store.archived) == before


def test_cascade_after_eight_sends():
    bank, store = pipeline.QueueBank(), pipeline.SwapStore()
    low = [msg(100 + q, q) for q in (2, 3, 4)]
    for m in low:
        bank.enqueue(m)
    for i in range(8):
        bank.enqueue(msg(i, 0))
    pipeline.service_queues(bank, store, reachable, send_ok, PARAMS)  # 4 sends
    assert bank.occupancy() == [4, 0, 1, 1, 1]
    pipeline.service_queues(bank, store, reachable, send_ok, PARAMS)  # 8th send
    assert bank.occupancy() == [0, 1, 1, 1, 0]
    assert [m.runtime_priority for m in low] == [1, 2, 3]
    assert bank.sends_since_cascade == 0


def test_budget_limits_sends_per_round():
    bank, store = pipeline.QueueBank(), pipeline.SwapStore()
    for i in range(10):
        bank.enqueue(msg(i, 0))
    sent = pipeline.service_queues(bank, store, reachable, send_ok, PARAMS)
    assert sent == PARAMS.fwd_per_tick == 4
    assert bank.total() == 6


def test_randomized_traffic_respects_priority_discipline():
    events, bank, store = run_priority_traffic(seed=11, total=200)
    sends = [(mid, d) for kind, mid, d in events if kind == "send"]
    assert len(sends) + len(store.archived) == 200
    for mid, detail in sends:
        q = detail["queue"]
        assert all(detail["occupancy"][i] == 0 for i in range(q)), mid
    archived_at = {}
    for pos, (kind, mid, _) in enumerate(events):
        if kind == "archive":
            archived_at[mid] = pos
    for pos, (kind, mid, _) in enumerate(events):
        if mid in archived_at and kind != "archive":
            assert pos < archived_at[mid], f"{mid} seen after archive"
    for kind, mid, detail in events:
        if kind == "swap_in":
            assert detail["occupancy"][0] == 0
            assert detail["swaps"] <= 2
