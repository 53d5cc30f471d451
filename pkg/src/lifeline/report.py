"""Post-run reporting: delimited summaries and rendered figures.

Works purely from a run's JSONL event log, so it can be pointed at any
log produced by `lifeline run` (or by the test suite).  Writes
messages.csv and totals.csv plus three PNG figures into the output
directory and returns what it wrote.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

ACCEPT_KINDS = ("sos", "reply", "locadvert", "locreply", "inject")
TERMINAL_KINDS = ("delivered", "drop", "reject", "archive")


def load_log(path) -> list[dict]:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records


def message_rows(records: list[dict]) -> list[dict]:
    """One lifecycle row per tracked message, in acceptance order."""
    rows: dict[str, dict] = {}
    for rec in records:
        detail = rec.get("detail", {})
        msg_id = detail.get("id")
        if not msg_id:
            continue
        kind = rec["kind"]
        if kind in ACCEPT_KINDS and msg_id not in rows:
            rows[msg_id] = {
                "id": msg_id, "kind": kind, "origin": rec["node"],
                "accepted_t": rec["t"], "final": "pending", "final_t": "",
                "latency_s": "", "hops": "", "swaps": "",
            }
        elif kind in TERMINAL_KINDS and msg_id in rows:
            row = rows[msg_id]
            row["final"] = kind
            row["final_t"] = rec["t"]
            if kind == "delivered":
                row["latency_s"] = round(rec["t"] - row["accepted_t"], 3)
                row["hops"] = detail.get("hops", "")
                row["swaps"] = detail.get("swaps", "")
    return list(rows.values())


def write_messages_csv(records: list[dict], path: Path) -> list[dict]:
    rows = message_rows(records)
    fields = ["id", "kind", "origin", "accepted_t", "final", "final_t",
              "latency_s", "hops", "swaps"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        writer.writerows(rows)
    return rows


def totals(records: list[dict]) -> dict:
    rows = message_rows(records)
    delivered = [r for r in rows if r["final"] == "delivered"]
    latencies = [r["latency_s"] for r in delivered
                 if isinstance(r["latency_s"], (int, float))]
    out = {
        "accepted": len(rows),
        "delivered": len(delivered),
        "delivery_rate": (round(len(delivered) / len(rows), 4)
                          if rows else ""),
        "mean_latency_s": (round(sum(latencies) / len(latencies), 3)
                           if latencies else ""),
        "boots": sum(1 for r in records if r["kind"] == "boot"),
        "kills": sum(1 for r in records
                     if r["kind"] in ("kill", "down")),
    }
    for rec in records:
        if rec["kind"] == "stats":
            d = rec["detail"]
            out["tc_originated"] = d.get("tc_originated", "")
            out["tc_forwarded"] = d.get("tc_forwarded", "")
            naive = d.get("naive_flood_baseline", 0)
            sent = d.get("tc_originated", 0) + d.get("tc_forwarded", 0)
            if naive:
                out["flood_savings_pct"] = round(100 * (1 - sent / naive), 2)
    return out


def write_totals_csv(records: list[dict], path: Path) -> dict:
    summary = totals(records)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["metric", "value"])
        for key, value in summary.items():
            writer.writerow([key, value])
    return summary


def _node_states(records: list[dict]) -> dict[str, dict]:
    """Final position/range/mode per node, from init then mutations."""
    nodes: dict[str, dict] = {}
    for rec in records:
        d = rec.get("detail", {})
        if rec["kind"] == "init":
            nodes[rec["node"]] = {
                "x": d["x"], "y": d["y"], "range": d["range"],
                "kind": d["kind"], "mode": d["mode"],
                "anchor": d.get("anchor"),
            }
        elif rec["kind"] == "move" and rec["node"] in nodes:
            nodes[rec["node"]]["x"] = d["x"]
            nodes[rec["node"]]["y"] = d["y"]
        elif rec["kind"] in ("kill", "down") and rec["node"] in nodes:
            nodes[rec["node"]]["mode"] = "down"
        elif rec["kind"] == "boot" and rec["node"] in nodes:
            nodes[rec["node"]]["mode"] = "emergency"
    return nodes


_STYLE = {"phone": ("o", "tab:blue"), "router": ("s", "tab:orange"),
          "station": ("*", "tab:red")}


def render_topology(records: list[dict], path: Path) -> None:
    nodes = _node_states(records)
    fig, ax = plt.subplots(figsize=(8, 8))
    ids = sorted(nodes)
    for a_i, a in enumerate(ids):
        for b in ids[a_i + 1:]:
            na, nb = nodes[a], nodes[b]
            if na["mode"] == "down" or nb["mode"] == "down":
                continue
            dist = math.hypot(na["x"] - nb["x"], na["y"] - nb["y"])
            if dist <= min(na["range"], nb["range"]):
                ax.plot([na["x"], nb["x"]], [na["y"], nb["y"]],
                        color="0.8", lw=0.8, zorder=1)
    for node_id in ids:
        n = nodes[node_id]
        marker, color = _STYLE.get(n["kind"], ("o", "gray"))
        if n["mode"] == "down":
            ax.scatter(n["x"], n["y"], marker="x", s=60, color="red",
                       zorder=3)
        else:
            size = 160 if n["kind"] == "station" else 60
            ax.scatter(n["x"], n["y"], marker=marker, s=size, color=color,
                       zorder=3, edgecolors="black", linewidths=0.5)
        if n["anchor"]:
            ax.scatter(n["x"], n["y"], marker="o", s=220, facecolors="none",
                       edgecolors="green", zorder=2)
        ax.annotate(node_id, (n["x"], n["y"]),
                    textcoords="offset points", xytext=(4, 4), fontsize=7)
    ax.set_aspect("equal")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_title("network layout (final)")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_timeline(records: list[dict], path: Path) -> None:
    accept_t, deliver_t = [], []
    boots, kills = [], []
    for rec in records:
        if rec["kind"] in ACCEPT_KINDS and rec.get("detail", {}).get("id"):
            accept_t.append(rec["t"])
        elif rec["kind"] == "delivered":
            deliver_t.append(rec["t"])
        elif rec["kind"] == "boot":
            boots.append(rec["t"])
        elif rec["kind"] in ("kill", "down"):
            kills.append(rec["t"])
    fig, ax = plt.subplots(figsize=(9, 4.5))
    if accept_t:
        ax.step(accept_t, range(1, len(accept_t) + 1), where="post",
                label="accepted", color="tab:blue")
    if deliver_t:
        ax.step(deliver_t, range(1, len(deliver_t) + 1), where="post",
                label="delivered", color="tab:green")
    for i, t in enumerate(boots):
        ax.axvline(t, color="green", alpha=0.3, lw=1,
                   label="boot" if i == 0 else None)
    for i, t in enumerate(kills):
        ax.axvline(t, color="red", alpha=0.3, lw=1,
                   label="node lost" if i == 0 else None)
    ax.set_xlabel("t [s]")
    ax.set_ylabel("messages (cumulative)")
    ax.set_title("message flow")
    if accept_t or deliver_t or boots or kills:
        ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_queues(records: list[dict], path: Path) -> None:
    series: dict[str, list[tuple[float, int]]] = {}
    for rec in records:
        qsize = rec.get("detail", {}).get("qsize")
        if qsize is not None:
            series.setdefault(rec["node"], []).append((rec["t"], qsize))
    busiest = sorted(series,
                     key=lambda n: (-max(q for _, q in series[n]), n))[:6]
    fig, ax = plt.subplots(figsize=(9, 4.5))
    for node in busiest:
        pts = series[node]
        ax.step([t for t, _ in pts], [q for _, q in pts], where="post",
                label=node)
    ax.set_xlabel("t [s]")
    ax.set_ylabel("queued messages")
    ax.set_title("queue depth (busiest nodes)")
    if busiest:
        ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def build_report(log_path, outdir) -> dict:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    records = load_log(log_path)
    write_messages_csv(records, outdir / "messages.csv")
    summary = write_totals_csv(records, outdir / "totals.csv")
    render_topology(records, outdir / "topology.png")
    render_timeline(records, outdir / "timeline.png")
    render_queues(records, outdir / "queues.png")
    return {
        "summary": summary,
        "written": [str(outdir / name) for name in (
            "messages.csv", "totals.csv", "topology.png", "timeline.png",
            "queues.png")],
    }
