"""Command line front door.

    lifeline run <scenario> [--until T] [--seed N] [--log FILE]
                 [--backup-dir DIR]
    lifeline serve <scenario> [--host H] [--port P] [--speed X]
                 [--listen-tcp [PORT]] [--static DIR] [--until T]
    lifeline inspect <scenario> [--at T] [--json]
    lifeline replay <log> [--kind K] [--node N]
    lifeline report <log> --out DIR
"""

from __future__ import annotations

import argparse
import json
import sys
import threading
from pathlib import Path

from lifeline import scenario as sc
from lifeline.params import FRAME_TCP_PORT
from lifeline.world import World


def _load_world(path: str, seed: int | None) -> World:
    scn = sc.load_scenario(path)
    if seed is not None:
        scn = sc.Scenario(
            params=scn.params.with_overrides({"seed": seed}),
            nodes=scn.nodes, events=scn.events,
        )
    return World(scn)


def _default_until(scn_path: str) -> float:
    scn = sc.load_scenario(scn_path)
    last = max((ev.at for ev in scn.events), default=0.0)
    return max(120.0, last + 90.0)


def cmd_run(args) -> int:
    world = _load_world(args.scenario, args.seed)
    until = args.until if args.until is not None else _default_until(args.scenario)
    world.run_until(until)
    world.finish()
    log_path = Path(args.log)
    log_path.write_bytes(world.log_bytes())
    if args.backup_dir:
        backup_dir = Path(args.backup_dir)
        backup_dir.mkdir(parents=True, exist_ok=True)
        for path in world.write_backups(backup_dir):
            print(f"backup written: {path}")
    accepted = len(world.accepted)
    delivered = len(world.delivered_ids)
    print(f"simulated {until:.1f}s: {accepted} messages accepted, "
          f"{delivered} delivered, {len(world.dropped_ids)} dropped, "
          f"{len(world.rejected_ids)} rejected")
    print(f"log written: {log_path}")
    return 0


def cmd_serve(args) -> int:
    from lifeline.serve import FrameIntake, LiveRunner, make_http_server

    world = _load_world(args.scenario, args.seed)
    runner = LiveRunner(world, speed=args.speed)
    server = make_http_server(runner, args.host, args.port,
                              static_dir=args.static)
    threading.Thread(target=server.serve_forever, daemon=True).start()
    print(f"api: http://{args.host}:{server.server_address[1]}/api/topology")
    if args.listen_tcp is not None:
        intake = FrameIntake(runner, args.host, args.listen_tcp)
        threading.Thread(target=intake.serve_forever, daemon=True).start()
        print(f"frame intake: tcp://{args.host}:{intake.server_address[1]}")
    try:
        runner.run_forever(until=args.until)
    except KeyboardInterrupt:
        pass
    finally:
        runner.stop()
        server.shutdown()
    if args.log:
        world.finish()
        Path(args.log).write_bytes(world.log_bytes())
        print(f"log written: {args.log}")
    return 0


def cmd_inspect(args) -> int:
    world = _load_world(args.scenario, args.seed)
    world.run_until(args.at)
    rows = []
    for node_id, node in sorted(world.nodes.items()):
        routes = len(node.olsr.routing_table) if node.olsr else 0
        rows.append({
            "id": node_id, "kind": node.kind, "mode": node.mode,
            "addr": node.addr,
            "battery": round(node.battery(world.now), 1),
            "neighbors": (sorted(node.olsr.symmetric_neighbors())
                          if node.olsr else []),
            "routes": routes,
            "queued": node.bank.total(),
            "swapped": len(node.swap.swapped),
            "archived": len(node.swap.archived),
        })
    if args.json:
        print(json.dumps({"t": world.now, "nodes": rows}, indent=2))
        return 0
    print(f"t={world.now:.1f}s  nodes={len(rows)}")
    header = (f"{'id':10} {'kind':8} {'mode':10} {'addr':12} "
              f"{'batt%':>6} {'routes':>6} {'q':>3} {'swap':>4} neighbors")
    print(header)
    for r in rows:
        print(f"{r['id']:10} {r['kind']:8} {r['mode']:10} {r['addr']:12} "
              f"{r['battery']:6.1f} {r['routes']:6d} {r['queued']:3d} "
              f"{r['swapped']:4d} {','.join(r['neighbors'])}")
    return 0


def cmd_replay(args) -> int:
    from lifeline.report import load_log

    for rec in load_log(args.log):
        if args.kind and rec["kind"] != args.kind:
            continue
        if args.node and rec["node"] != args.node:
            continue
        detail = " ".join(f"{k}={v}" for k, v in rec["detail"].items())
        print(f"{rec['t']:10.3f}  {rec['node']:10}  {rec['kind']:12} {detail}")
    return 0


def cmd_report(args) -> int:
    from lifeline.report import build_report

    result = build_report(args.log, args.out)
    for key, value in result["summary"].items():
        print(f"{key}: {value}")
    for path in result["written"]:
        print(f"written: {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lifeline",
        description="emergency mesh network simulator and station service")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario to completion")
    p_run.add_argument("scenario")
    p_run.add_argument("--until", type=float, default=None,
                       help="sim seconds to run (default: last event + 90)")
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--log", default="run.jsonl",
                       help="event log output path")
    p_run.add_argument("--backup-dir", default=None,
                       help="write durable message stores here")
    p_run.set_defaults(func=cmd_run)

    p_serve = sub.add_parser("serve", help="run live with the HTTP API")
    p_serve.add_argument("scenario")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8787)
    p_serve.add_argument("--speed", type=float, default=1.0,
                         help="sim seconds per wall second")
    p_serve.add_argument("--seed", type=int, default=None)
    p_serve.add_argument("--until", type=float, default=None)
    p_serve.add_argument("--listen-tcp", type=int, nargs="?",
                         const=FRAME_TCP_PORT, default=None,
                         help="accept raw frames on this TCP port")
    p_serve.add_argument("--static", default=None,
                         help="serve this directory at / (console build)")
    p_serve.add_argument("--log", default=None)
    p_serve.set_defaults(func=cmd_serve)

    p_inspect = sub.add_parser("inspect",
                               help="run to a point and dump node state")
    p_inspect.add_argument("scenario")
    p_inspect.add_argument("--at", type=float, default=60.0)
    p_inspect.add_argument("--seed", type=int, default=None)
    p_inspect.add_argument("--json", action="store_true")
    p_inspect.set_defaults(func=cmd_inspect)

    p_replay = sub.add_parser("replay", help="pretty-print an event log")
    p_replay.add_argument("log")
    p_replay.add_argument("--kind", default=None)
    p_replay.add_argument("--node", default=None)
    p_replay.set_defaults(func=cmd_replay)

    p_report = sub.add_parser("report",
                              help="summarize a log into CSV and figures")
    p_report.add_argument("log")
    p_report.add_argument("--out", required=True)
    p_report.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
