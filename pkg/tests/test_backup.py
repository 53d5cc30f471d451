"""Backup policy tests with an independent brute-force evaluator.

The mask sweep re-derives every decision from the option table written
out plainly below, so a bug in the production evaluator cannot hide in
its own mirror.
"""

import itertools

import pytest

from lifeline.backup import (
    EVENT_FORWARDED, EVENT_RECEIVED,
    BackupContext, BackupRule, BackupStore, battery_gate, evaluate_backup,
    read_backup_file, rule_fires,
)

OPTION_TIER = {1: 1, 2: 1, 3: 2, 4: 2, 5: 3, 6: 3}
GRID_PARAMS = {3: 25.0, 4: 2, 5: 40.0, 6: 40.0}


def brute_force_decision(rules, ctx):
    fired = []
    for rule in rules:
        hit = {
            1: ctx.event == EVENT_RECEIVED,
            2: ctx.event == EVENT_FORWARDED,
            3: ctx.battery_pct < (rule.param or 0),
            4: ctx.msg_priority < (rule.param or 0),
            5: ctx.local_load_pct > (rule.param or 100),
            6: ctx.source_load_pct > (rule.param or 100),
        }[rule.option]
        if hit:
            fired.append(rule.option)
    if not fired:
        return False, None
    winner = min(fired, key=lambda o: (OPTION_TIER[o], o))
    return True, winner


def context_grid():
    for event, battery, local, source, prio in itertools.product(
            (EVENT_RECEIVED, EVENT_FORWARDED), (10.0, 30.0),
            (20, 60), (20, 60), (0, 3)):
        yield BackupContext(event=event, battery_pct=battery,
                            local_load_pct=local, source_load_pct=source,
                            msg_priority=prio)


def rules_for_mask(mask: int) -> list[BackupRule]:
    return [BackupRule(opt, GRID_PARAMS.get(opt))
            for opt in range(1, 7) if mask >> (opt - 1) & 1]


def test_all_masks_agree_with_brute_force():
    cases = 0
    for mask in range(64):
        rules = rules_for_mask(mask)
        for ctx in context_grid():
            want_backup, want_by = brute_force_decision(rules, ctx)
            got = evaluate_backup(rules, ctx)
            assert (got.backup, got.decided_by) == (want_backup, want_by), \
                f"mask={mask:06b} ctx={ctx}"
            cases += 1
    assert cases == 64 * 32


def test_worked_example_forwarded_beats_load_rule():
    rules = [BackupRule(2, None), BackupRule(5, 5.0)]
    ctx = BackupContext(event=EVENT_FORWARDED, battery_pct=90.0,
                        local_load_pct=10, source_load_pct=10,
                        msg_priority=1)
    decision = evaluate_backup(rules, ctx)
    assert decision.backup is True
    assert decision.decided_by == 2


def test_option_tiers():
    assert [BackupRule(o, GRID_PARAMS.get(o)).tier for o in range(1, 7)] \
        == [1, 1, 2, 2, 3, 3]


def test_rule_semantics():
    ctx = BackupContext(event=EVENT_RECEIVED, battery_pct=30.0,
                        local_load_pct=50, source_load_pct=10,
                        msg_priority=2)
    assert rule_fires(BackupRule(1, None), ctx)
    assert not rule_fires(BackupRule(2, None), ctx)
    assert rule_fires(BackupRule(3, 31.0), ctx)
    assert not rule_fires(BackupRule(3, 30.0), ctx)      # strict less-than
    assert rule_fires(BackupRule(4, 3), ctx)             # prio 2 outranks 3
    assert not rule_fires(BackupRule(4, 2), ctx)
    assert rule_fires(BackupRule(5, 49.0), ctx)
    assert not rule_fires(BackupRule(5, 50.0), ctx)      # strict greater-than
    assert not rule_fires(BackupRule(6, 10.0), ctx)


@pytest.mark.parametrize("option,param", [
    (3, 0), (3, 101), (4, 0), (4, 5), (4, 2.5),
    (5, 0), (5, 100), (6, 0), (6, 100),
    (1, 10), (2, 10), (0, None), (7, None),
])
def test_invalid_rules_rejected(option, param):
    with pytest.raises(ValueError):
        BackupRule(option, param).validate()


def test_no_rules_means_no_backup():
    ctx = BackupContext(event=EVENT_FORWARDED, battery_pct=1.0,
                        local_load_pct=99, source_load_pct=99,
                        msg_priority=0)
    decision = evaluate_backup([], ctx)
    assert decision.backup is False and decision.decided_by is None


# -- battery admission gate -------------------------------------------

def test_gate_open_above_threshold():
    assert battery_gate(20.01, "anything")
    assert battery_gate(100.0, "x")


def test_gate_closed_at_floor():
    assert not battery_gate(5.0, "anything")
    assert not battery_gate(0.0, "x")


def test_gate_ramp_uses_message_hash():
    # crc32("P-1-1") % 100 == 35, crc32("P-1-2") % 100 == 69.
    # At 12.5% battery the admission threshold is exactly 50.
    assert battery_gate(12.5, "P-1-1")
    assert not battery_gate(12.5, "P-1-2")


def test_gate_ramp_boundaries():
    # crc32("P-1-3") % 100 == 3; threshold crosses 3 at 5.45% battery
    assert battery_gate(5.6, "P-1-3")
    assert not battery_gate(5.4, "P-1-3")


# -- durable store ----------------------------------------------------

def test_store_evicts_oldest_non_sos_first():
    store = BackupStore("R-1", capacity=3)
    store.append(b"frame-a", "REPLY", "a")
    store.append(b"frame-b", "SOS", "b")
    store.append(b"frame-c", "REPLY", "c")
    receipt, evicted = store.append(b"frame-d", "SOS", "d")
    assert evicted == "a"
    ids = [rec[2] for rec in store.records]
    assert ids == ["b", "c", "d"]


def test_store_evicts_oldest_sos_when_nothing_else():
    store = BackupStore("R-1", capacity=2)
    store.append(b"frame-a", "SOS", "a")
    store.append(b"frame-b", "SOS", "b")
    _, evicted = store.append(b"frame-c", "SOS", "c")
    assert evicted == "a"


def test_store_file_round_trip(tmp_path):
    store = BackupStore("R-7", capacity=8)
    frames = [b"<EMG one>", b"<EMG two>", b"<EMG three>"]
    for i, frame in enumerate(frames):
        store.append(frame, "SOS", f"m-{i}")
    path = store.write_file(tmp_path)
    assert path.name == "backup-R-7.log"
    assert read_backup_file(path) == frames


def test_truncated_store_file_raises(tmp_path):
    store = BackupStore("R-7", capacity=8)
    store.append(b"0123456789", "SOS", "m")
    path = store.write_file(tmp_path)
    data = path.read_bytes()
    path.write_bytes(data[:-3])
    with pytest.raises(ValueError):
        read_backup_file(path)
