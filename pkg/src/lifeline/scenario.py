"""Scenario files: the declarative input of every simulation run.

A scenario is JSON with three blocks: "params" (overrides for
SimParams), "nodes", and "events".  Validation failures raise
ScenarioError naming the offending path, e.g. ``nodes[3].anchor``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from lifeline.backup import BackupRule
from lifeline.frames import valid_address, valid_node_id
from lifeline.params import STATION_NET_PREFIX, SimParams

PHONE = "phone"
ROUTER = "router"
STATION = "station"
KINDS = (PHONE, ROUTER, STATION)

DORMANT = "dormant"
EMERGENCY = "emergency"
DOWN = "down"

ACTIONS = frozenset((
    "kill_node", "cut_ac_power", "restore_power", "move_node",
    "airdrop_router", "send_sos", "drain_battery", "partial_crash",
))


class ScenarioError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass
class NodeSpec:
    id: str
    kind: str
    x: float
    y: float
    range_m: float
    battery: float = 100.0
    ac_powered: bool | None = None     # None: kind default
    mode: str | None = None            # None: kind default
    anchor: tuple[float, float] | None = None
    backup_rules: list[BackupRule] = field(default_factory=list)
    addr: str | None = None
    drain_pct_h: float | None = None


@dataclass
class ScenarioEvent:
    at: float
    action: str
    args: dict


@dataclass
class Scenario:
    params: SimParams
    nodes: list[NodeSpec]
    events: list[ScenarioEvent]


def _require(cond: bool, path: str, message: str) -> None:
    if not cond:
        raise ScenarioError(path, message)


def _num(value, path: str) -> float:
    _require(isinstance(value, (int, float)) and not isinstance(value, bool),
             path, "expected a number")
    return float(value)


def _parse_node(raw: dict, index: int, params: SimParams) -> NodeSpec:
    path = f"nodes[{index}]"
    _require(isinstance(raw, dict), path, "expected an object")
    node_id = raw.get("id")
    _require(isinstance(node_id, str) and valid_node_id(node_id),
             f"{path}.id", "missing or invalid node id")
    kind = raw.get("kind")
    _require(kind in KINDS, f"{path}.kind", f"kind must be one of {KINDS}")
    x = _num(raw.get("x", 0.0), f"{path}.x")
    y = _num(raw.get("y", 0.0), f"{path}.y")
    default_range = {
        PHONE: params.phone_range,
        ROUTER: params.router_range,
        STATION: params.station_range,
    }[kind]
    range_m = _num(raw.get("range", default_range), f"{path}.range")
    _require(range_m > 0, f"{path}.range", "range must be positive")
    battery = _num(raw.get("battery", 100.0), f"{path}.battery")
    _require(0 <= battery <= 100, f"{path}.battery", "battery must be 0..100")

    ac = raw.get("ac_powered")
    _require(ac is None or isinstance(ac, bool), f"{path}.ac_powered",
             "expected a boolean")
    mode = raw.get("mode")
    _require(mode in (None, DORMANT, EMERGENCY), f"{path}.mode",
             "mode must be 'dormant' or 'emergency'")
    if mode == DORMANT:
        _require(kind == ROUTER, f"{path}.mode",
                 "only routers can start dormant")

    anchor = None
    if raw.get("anchor") is not None:
        _require(kind != PHONE, f"{path}.anchor",
                 "phones cannot serve as anchors")
        a = raw["anchor"]
        _require(isinstance(a, dict) and "x" in a and "y" in a,
                 f"{path}.anchor", "expected {x, y}")
        anchor = (_num(a["x"], f"{path}.anchor.x"),
                  _num(a["y"], f"{path}.anchor.y"))

    rules = []
    for j, rule_raw in enumerate(raw.get("backup_rules", [])):
        rpath = f"{path}.backup_rules[{j}]"
        _require(isinstance(rule_raw, dict) and "option" in rule_raw,
                 rpath, "expected {option[, param]}")
        rule = BackupRule(rule_raw["option"], rule_raw.get("param"))
        try:
            rule.validate()
        except ValueError as exc:
            raise ScenarioError(rpath, str(exc)) from exc
        rules.append(rule)

    addr = raw.get("addr")
    if addr is not None:
        _require(isinstance(addr, str) and valid_address(addr),
                 f"{path}.addr", "invalid address")
        in_station_net = addr.startswith(STATION_NET_PREFIX)
        if kind == STATION:
            _require(in_station_net, f"{path}.addr",
                     f"station addresses must be in {STATION_NET_PREFIX}0/24")
        else:
            _require(not in_station_net, f"{path}.addr",
                     f"{STATION_NET_PREFIX}0/24 is reserved for stations")

    drain = raw.get("drain_pct_h")
    if drain is not None:
        drain = _num(drain, f"{path}.drain_pct_h")
        _require(drain >= 0, f"{path}.drain_pct_h", "must be non-negative")

    return NodeSpec(node_id, kind, x, y, range_m, battery, ac, mode,
                    anchor, rules, addr, drain)


def _check_event_args(ev: ScenarioEvent, path: str, known: set[str],
                      stations: set[str]) -> None:
    args = ev.args

    def node_ref(key: str, may_be_new: bool = False) -> str:
        value = args.get(key)
        _require(isinstance(value, str), f"{path}.args.{key}",
                 "expected a node id")
        if not may_be_new:
            _require(value in known, f"{path}.args.{key}",
                     f"unknown node {value!r}")
        return value

    if ev.action in ("kill_node", "cut_ac_power", "restore_power",
                     "drain_battery"):
        node_ref("node")
        if ev.action == "drain_battery":
            _num(args.get("rate"), f"{path}.args.rate")
    elif ev.action == "move_node":
        node_ref("node")
        _num(args.get("x"), f"{path}.args.x")
        _num(args.get("y"), f"{path}.args.y")
    elif ev.action == "partial_crash":
        nodes = args.get("nodes")
        _require(isinstance(nodes, list) and nodes, f"{path}.args.nodes",
                 "expected a non-empty list of node ids")
        for n in nodes:
            _require(isinstance(n, str) and n in known, f"{path}.args.nodes",
                     f"unknown node {n!r}")
    elif ev.action == "send_sos":
        node_ref("from")
        prio = args.get("priority", 0)
        _require(isinstance(prio, int) and 0 <= prio <= 4,
                 f"{path}.args.priority", "priority must be 0..4")
        if "to" not in args:
            _require(bool(stations), f"{path}.args",
                     "no station in scenario and no explicit 'to'")
    elif ev.action == "airdrop_router":
        new_id = node_ref("id", may_be_new=True)
        _require(valid_node_id(new_id), f"{path}.args.id", "invalid node id")
        _require(new_id not in known, f"{path}.args.id",
                 f"node {new_id!r} already exists")
        _num(args.get("x"), f"{path}.args.x")
        _num(args.get("y"), f"{path}.args.y")
        known.add(new_id)


def parse_scenario(raw: dict) -> Scenario:
    _require(isinstance(raw, dict), "$", "scenario must be a JSON object")
    params = SimParams()
    overrides = raw.get("params", {})
    _require(isinstance(overrides, dict), "params", "expected an object")
    try:
        params = params.with_overrides(overrides)
    except KeyError as exc:
        raise ScenarioError(f"params.{exc.args[0]}", "unknown parameter")

    nodes_raw = raw.get("nodes")
    _require(isinstance(nodes_raw, list) and nodes_raw, "nodes",
             "expected a non-empty list")
    nodes = [_parse_node(n, i, params) for i, n in enumerate(nodes_raw)]
    seen: set[str] = set()
    for i, spec in enumerate(nodes):
        _require(spec.id not in seen, f"nodes[{i}].id",
                 f"duplicate node id {spec.id!r}")
        seen.add(spec.id)

    stations = {n.id for n in nodes if n.kind == STATION}
    known = set(seen)
    events = []
    for i, ev_raw in enumerate(raw.get("events", [])):
        path = f"events[{i}]"
        _require(isinstance(ev_raw, dict), path, "expected an object")
        at = _num(ev_raw.get("at"), f"{path}.at")
        _require(at >= 0, f"{path}.at", "event time must be >= 0")
        action = ev_raw.get("action")
        _require(action in ACTIONS, f"{path}.action",
                 f"unknown action {action!r}")
        args = ev_raw.get("args", {})
        _require(isinstance(args, dict), f"{path}.args", "expected an object")
        ev = ScenarioEvent(at, action, args)
        _check_event_args(ev, path, known, stations)
        events.append(ev)
    events.sort(key=lambda e: e.at)
    return Scenario(params, nodes, events)


def load_scenario(path: str | Path) -> Scenario:
    try:
        raw = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioError("$", f"invalid JSON: {exc}") from exc
    return parse_scenario(raw)
