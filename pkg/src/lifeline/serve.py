"""HTTP/JSON front of a running world, plus the raw-frame TCP intake.

Endpoints (all JSON unless noted):

    GET  /api/topology                  current station-side snapshot
    GET  /api/messages?since=N          inbox entries with seq > N
    GET  /api/victims                   one record per victim
    POST /api/victims/<id>/reply        {"text", "token"?, "priority"?}
    GET  /api/estimates/<id>            position estimate for a victim
    POST /api/scenario/event            {"action", "args"}
    GET  /api/events?since=N            long-poll over the event log
    GET  /api/photos/<sha256>           photo bytes

Errors come back as {"error": ..., "path": ...} with a matching status.
The sim advances on its own thread; every handler takes the runner lock,
so reads and operator actions are serialized between sim steps.

The TCP intake accepts one emergency frame per connection (terminated by
the closing tag or EOF), injects it at the device owning the frame's
source address, and answers "OK <id>" or "ERR <reason>".
"""

from __future__ import annotations

import json
import mimetypes
import socket
import socketserver
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlparse

from lifeline.frames import FrameError, parse_frame
from lifeline.params import FRAME_TCP_PORT
from lifeline.station import ApiError
from lifeline.world import World

LONG_POLL_MAX_S = 30.0


class LiveRunner:
    """Advances a world in small slices, paced against the wall clock."""

    def __init__(self, world: World, speed: float = 1.0,
                 slice_s: float = 0.1):
        self.world = world
        self.speed = speed
        self.slice_s = slice_s
        self.lock = threading.RLock()
        self.cond = threading.Condition(self.lock)
        self._stop = threading.Event()

    def advance(self, dt: float) -> None:
        with self.cond:
            self.world.run_until(self.world.now + dt)
            self.cond.notify_all()

    def run_forever(self, until: float | None = None) -> None:
        while not self._stop.is_set():
            if until is not None and self.world.now >= until:
                break
            self.advance(self.slice_s)
            time.sleep(self.slice_s / self.speed)

    def stop(self) -> None:
        self._stop.set()
        with self.cond:
            self.cond.notify_all()

    def events_since(self, since: int) -> tuple[list[dict], int]:
        log = self.world.log
        return list(log[since:]), len(log)


def make_handler(runner: LiveRunner, static_dir: str | None = None):
    world = runner.world
    service = world.station_service

    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, fmt, *args):
            pass

        # -- plumbing --------------------------------------------------

        def _send(self, status: int, body: bytes, ctype: str) -> None:
            self.send_response(status)
            self.send_header("Content-Type", ctype)
            self.send_header("Content-Length", str(len(body)))
            self.send_header("Access-Control-Allow-Origin", "*")
            self.send_header("Access-Control-Allow-Headers", "Content-Type")
            self.send_header("Access-Control-Allow-Methods",
                             "GET, POST, OPTIONS")
            self.end_headers()
            self.wfile.write(body)

        def _json(self, payload, status: int = 200) -> None:
            body = json.dumps(payload, separators=(",", ":")).encode("utf-8")
            self._send(status, body, "application/json")

        def _error(self, status: int, message: str) -> None:
            self._json({"error": message, "path": self.path}, status)

        def _read_body(self) -> dict:
            length = int(self.headers.get("Content-Length") or 0)
            if length <= 0:
                return {}
            raw = self.rfile.read(length)
            try:
                data = json.loads(raw.decode("utf-8"))
            except (UnicodeDecodeError, json.JSONDecodeError):
                raise ApiError(400, "request body is not valid JSON")
            if not isinstance(data, dict):
                raise ApiError(400, "request body must be a JSON object")
            return data

        def do_OPTIONS(self):
            self._send(204, b"", "text/plain")

        # -- routing ---------------------------------------------------

        def do_GET(self):
            try:
                self._route("GET")
            except ApiError as exc:
                self._error(exc.status, exc.message)
            except BrokenPipeError:
                pass

        def do_POST(self):
            try:
                self._route("POST")
            except ApiError as exc:
                self._error(exc.status, exc.message)
            except BrokenPipeError:
                pass

        def _route(self, method: str) -> None:
            url = urlparse(self.path)
            parts = [p for p in url.path.split("/") if p]
            query = {k: v[-1] for k, v in parse_qs(url.query).items()}

            if not parts or parts[0] != "api":
                if method == "GET":
                    self._static(url.path)
                    return
                raise ApiError(404, "not found")
            if service is None:
                raise ApiError(503, "no station in this scenario")

            route = tuple(parts[1:])
            if method == "GET" and route == ("topology",):
                with runner.lock:
                    self._json(service.snapshot())
            elif method == "GET" and route == ("messages",):
                since = _int_arg(query, "since", 0)
                with runner.lock:
                    msgs = service.messages_since(since)
                    last = service.inbox[-1]["seq"] if service.inbox else 0
                self._json({"messages": msgs, "last_seq": last})
            elif method == "GET" and route == ("victims",):
                with runner.lock:
                    self._json({"victims": service.victims_json()})
            elif (method == "POST" and len(route) == 3
                  and route[0] == "victims" and route[2] == "reply"):
                body = self._read_body()
                with runner.lock:
                    result = service.reply(
                        route[1], body.get("text", ""),
                        token=body.get("token"),
                        priority=body.get("priority", 0))
                self._json(result)
            elif method == "GET" and len(route) == 2 and route[0] == "estimates":
                with runner.lock:
                    self._json(service.estimate(route[1]))
            elif method == "POST" and route == ("scenario", "event"):
                body = self._read_body()
                action = body.get("action")
                if not isinstance(action, str):
                    raise ApiError(422, "action must be a string")
                with runner.lock:
                    result = service.operator_event(action,
                                                    body.get("args", {}))
                self._json(result)
            elif method == "GET" and route == ("events",):
                self._events(query)
            elif method == "GET" and len(route) == 2 and route[0] == "photos":
                with runner.lock:
                    data = service.photo(route[1])
                self._send(200, data, "application/octet-stream")
            else:
                raise ApiError(404, "not found")

        def _events(self, query: dict) -> None:
            since = _int_arg(query, "since", 0)
            timeout = min(LONG_POLL_MAX_S,
                          float(query.get("timeout", 25.0)))
            deadline = time.monotonic() + timeout
            with runner.cond:
                events, nxt = runner.events_since(since)
                while not events:
                    left = deadline - time.monotonic()
                    if left <= 0:
                        break
                    runner.cond.wait(left)
                    events, nxt = runner.events_since(since)
            self._json({"events": events, "next": nxt})

        def _static(self, path: str) -> None:
            if static_dir is None:
                raise ApiError(404, "not found")
            root = Path(static_dir).resolve()
            name = path.lstrip("/") or "index.html"
            target = (root / name).resolve()
            if not str(target).startswith(str(root)) or not target.is_file():
                raise ApiError(404, "not found")
            ctype = mimetypes.guess_type(str(target))[0] or "application/octet-stream"
            self._send(200, target.read_bytes(), ctype)

    return Handler


def _int_arg(query: dict, key: str, default: int) -> int:
    try:
        return int(query.get(key, default))
    except ValueError:
        raise ApiError(400, f"{key} must be an integer")


def make_http_server(runner: LiveRunner, host: str = "127.0.0.1",
                     port: int = 8787,
                     static_dir: str | None = None) -> ThreadingHTTPServer:
    server = ThreadingHTTPServer((host, port), make_handler(runner, static_dir))
    server.daemon_threads = True
    return server


class FrameIntake(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, runner: LiveRunner, host: str = "127.0.0.1",
                 port: int = FRAME_TCP_PORT):
        self.runner = runner
        super().__init__((host, port), _FrameHandler)


class _FrameHandler(socketserver.BaseRequestHandler):
    def handle(self):
        self.request.settimeout(4.0)
        chunks = []
        try:
            while b"</EMG>" not in b"".join(chunks):
                data = self.request.recv(65536)
                if not data:
                    break
                chunks.append(data)
                if sum(len(c) for c in chunks) > 512 * 1024:
                    break
        except socket.timeout:
            pass
        raw = b"".join(chunks)
        reply = self._inject(raw)
        try:
            self.request.sendall(reply)
        except OSError:
            pass

    def _inject(self, raw: bytes) -> bytes:
        runner: LiveRunner = self.server.runner
        try:
            msg = parse_frame(raw.strip())
        except FrameError as exc:
            return f"ERR {exc}\n".encode()
        if msg is None:
            return b"ERR not an emergency frame\n"
        with runner.lock:
            world = runner.world
            origin = world.addr_book.get(msg.origin)
            if origin is None:
                return b"ERR unknown origin address\n"
            node = world.nodes[origin]
            if not node.up(world.now):
                return b"ERR origin device is down\n"
            msg.runtime_priority = msg.priority
            msg.created_at = world.now
            world.accepted.setdefault(msg.id, origin)
            node.bank.enqueue(msg)
            world._log("inject", origin, id=msg.id, kind=msg.kind,
                       qsize=node.bank.total())
            world._ensure_fwd(node)
        return f"OK {msg.id}\n".encode()
