"""Operator gateway: live machine control and paced trace replay.

Two listeners speak the same versioned protocol: a TCP socket carrying
newline-delimited JSON, and a WebSocket bridge for the browser console.
Client messages::

    {"v": 1, "kind": "subscribe", "client_id": "console-1"}
    {"v": 1, "kind": "status"}
    {"v": 1, "kind": "dump_bin", "bin": 3, "client_id": "c1", "cmd_id": "k9"}
    {"v": 1, "kind": "pause", ...}   {"v": 1, "kind": "resume", ...}

Server messages::

    {"v": 1, "kind": "hello", "mode": "live"|"replay", "pace": ..., "header": {...}}
    {"v": 1, "kind": "snapshot", "state": {...}}
    {"v": 1, "kind": "event", "event": {...trace record...}}
    {"v": 1, "kind": "notification", "sms": "...", "bin": ..., "level_pct": ...}
    {"v": 1, "kind": "ack", "cmd_id": ..., "event_id": ...}
    {"v": 1, "kind": "error", "code": "bad-command"|"unknown-bin"|"not-running", ...}
    {"v": 1, "kind": "end", "metrics": {...}}

A single session thread owns the simulation engine, paces it against
wall time (sim seconds per wall second = `pace`), and is the only
thread that touches engine state; client threads talk to it through a
request queue.  Commands are acknowledged when the corresponding
OperatorCommand event is applied, carrying that event's id.  Replay
mode streams a recorded trace at the same pace and rejects commands
with `not-running`.
"""

from __future__ import annotations

import json
import queue
import socket
import socketserver
import threading
import time
from dataclasses import dataclass, field
from typing import Callable

from .domain import level_percent_from_distance
from .sim import US, ScenarioCommand, SimEngine
from .trace import SimEvent

PROTOCOL_VERSION = 1
DEFAULT_TCP_PORT = 8766
DEFAULT_WS_PORT = 8765
_QUEUE_LIMIT = 4096

_COMMANDS = ("dump_bin", "pause", "resume")


def _msg(kind: str, **payload) -> dict:
    out = {"v": PROTOCOL_VERSION, "kind": kind}
    out.update(payload)
    return out


@dataclass
class ClientConn:
    conn_id: int
    client_id: str = ""
    subscribed: bool = False
    outbox: "queue.Queue[dict | None]" = field(
        default_factory=lambda: queue.Queue(maxsize=_QUEUE_LIMIT)
    )
    dropped: int = 0

    def send(self, message: dict | None) -> None:
        try:
            self.outbox.put_nowait(message)
        except queue.Full:
            self.dropped += 1


class _ReplayState:
    """Machine state reconstructed from trace records, for snapshots."""

    def __init__(self, header: dict):
        self.header = header
        self.depth_mm = int(header.get("bin_depth_mm", 500))
        self.counts = {b: 0 for b in range(1, 7)}
        self.levels = {b: 0.0 for b in range(1, 7)}
        self.last_detected: str | None = None
        self.belt_running = True
        self.binned = 0
        self.rejected = 0
        self.t_us = 0

    def update(self, record: dict) -> None:
        kind = record.get("kind")
        self.t_us = record.get("t", self.t_us)
        if kind == "LevelSample":
            b = record["bin"]
            self.counts[b] = record["count"]
            self.levels[b] = level_percent_from_distance(
                record["distance_mm"] / 1000.0, self.depth_mm / 1000.0
            )
        elif kind == "Classified":
            self.last_detected = record["predicted"]
        elif kind == "ItemBinned":
            self.binned += 1
            self.counts[record["bin"]] += 1
        elif kind == "OperatorCommand" and record.get("command") == "dump_bin":
            self.counts[record["bin"]] = 0
        elif kind == "ItemRejected":
            self.rejected += 1
        elif kind == "BeltPaused":
            self.belt_running = False
        elif kind == "BeltResumed":
            self.belt_running = True

    def snapshot(self) -> dict:
        return {
            "t_us": self.t_us,
            "machine_id": self.header.get("machine_id", "?"),
            "belt_running": self.belt_running,
            "paused_reasons": [] if self.belt_running else ["replay"],
            "last_detected": self.last_detected,
            "bins": [
                {"bin": b, "count": self.counts[b], "level_pct": round(self.levels[b], 2)}
                for b in range(1, 7)
            ],
            "items_in_flight": 0,
            "binned_total": self.binned,
            "rejected_total": self.rejected,
        }


class GatewaySession(threading.Thread):
    """Owns the engine (or replay stream) and paces it against the wall
    clock.  All engine access happens on this thread."""

    def __init__(
        self,
        engine: SimEngine | None = None,
        replay: tuple[dict, list[SimEvent]] | None = None,
        pace: float = 1.0,
    ):
        super().__init__(daemon=True, name="gateway-session")
        if (engine is None) == (replay is None):
            raise ValueError("need exactly one of engine or replay")
        if pace <= 0:
            raise ValueError("pace must be positive")
        self.engine = engine
        self.replay = replay
        self.pace = pace
        self.mode = "live" if engine is not None else "replay"
        self.ended = threading.Event()
        self._stop = threading.Event()
        self._requests: "queue.Queue[tuple]" = queue.Queue()
        self._clients: dict[int, ClientConn] = {}
        self._clients_lock = threading.Lock()
        self._next_conn_id = 1
        self._pending_acks: dict[int, tuple[ClientConn, object]] = {}
        self._wall_start = 0.0
        if engine is not None:
            engine.on_event = self._on_engine_event
            engine.on_command_event = self._on_command_applied
            self._replay_state = None
        else:
            self._replay_state = _ReplayState(replay[0])

    # -- client registry -------------------------------------------------

    def attach(self) -> ClientConn:
        with self._clients_lock:
            client = ClientConn(self._next_conn_id)
            self._next_conn_id += 1
            self._clients[client.conn_id] = client
        return client

    def detach(self, client: ClientConn) -> None:
        with self._clients_lock:
            self._clients.pop(client.conn_id, None)
        client.send(None)

    def _broadcast(self, message: dict) -> None:
        with self._clients_lock:
            targets = [c for c in self._clients.values() if c.subscribed]
        for client in targets:
            client.send(message)

    # -- protocol entry point (called from client reader threads) --------

    def handle_message(self, client: ClientConn, raw: str) -> None:
        try:
            msg = json.loads(raw)
        except json.JSONDecodeError:
            client.send(_msg("error", code="bad-command", detail="invalid json"))
            return
        if not isinstance(msg, dict) or msg.get("v") != PROTOCOL_VERSION:
            client.send(
                _msg("error", code="bad-command", detail="missing or unsupported version")
            )
            return
        kind = msg.get("kind")
        cmd_id = msg.get("cmd_id")
        if kind == "subscribe":
            client.subscribed = True
            client.client_id = str(msg.get("client_id", f"conn-{client.conn_id}"))
            client.send(self.hello())
            self._request_snapshot(client)
            return
        if kind == "status":
            self._request_snapshot(client)
            return
        if kind in _COMMANDS:
            bin_index = msg.get("bin")
            if kind == "dump_bin" and not (isinstance(bin_index, int) and 1 <= bin_index <= 6):
                client.send(_msg("error", code="unknown-bin", detail=f"bin {bin_index!r}", cmd_id=cmd_id))
                return
            if self.mode == "replay" or self.ended.is_set():
                client.send(
                    _msg("error", code="not-running", detail="no live run accepting commands", cmd_id=cmd_id)
                )
                return
            self._requests.put(("command", client, kind, bin_index, cmd_id))
            return
        client.send(_msg("error", code="bad-command", detail=f"unknown kind {kind!r}", cmd_id=cmd_id))

    def hello(self) -> dict:
        header = self.engine.header() if self.engine is not None else self.replay[0]
        return _msg("hello", mode=self.mode, pace=self.pace, header=header)

    def _request_snapshot(self, client: ClientConn) -> None:
        # After the run ends the session thread no longer drains requests,
        # but nothing mutates state anymore either, so reading is safe.
        if self.ended.is_set():
            client.send(_msg("snapshot", state=self._snapshot()))
        else:
            self._requests.put(("status", client))

    # -- session thread --------------------------------------------------

    def run(self) -> None:
        self._wall_start = time.monotonic()
        try:
            if self.engine is not None:
                self._run_live()
            else:
                self._run_replay()
        finally:
            self.ended.set()
            if self.engine is not None:
                metrics = self.engine.result().metrics.to_dict()
            else:
                metrics = None
            self._broadcast(_msg("end", metrics=metrics))

    def stop(self) -> None:
        self._stop.set()
        self._requests.put(("wake",))

    def _wall_sim_us(self) -> int:
        return int((time.monotonic() - self._wall_start) * self.pace * US)

    def _run_live(self) -> None:
        engine = self.engine
        while not self._stop.is_set():
            t_next = engine.peek_time()
            if t_next is None:
                break
            due = self._wall_start + (t_next / US) / self.pace
            delay = due - time.monotonic()
            if delay > 0:
                try:
                    request = self._requests.get(timeout=delay)
                except queue.Empty:
                    continue
                self._handle_request(request)
                continue
            engine.step()

    def _run_replay(self) -> None:
        _, events = self.replay
        for event in events:
            if self._stop.is_set():
                return
            due = self._wall_start + (event.t_us / US) / self.pace
            while True:
                delay = due - time.monotonic()
                if delay <= 0:
                    break
                try:
                    request = self._requests.get(timeout=delay)
                except queue.Empty:
                    break
                self._handle_request(request)
            record = event.to_record()
            self._replay_state.update(record)
            self._broadcast(_msg("event", event=record))

    def _handle_request(self, request: tuple) -> None:
        op = request[0]
        if op == "status":
            _, client = request
            client.send(_msg("snapshot", state=self._snapshot()))
        elif op == "command":
            _, client, kind, bin_index, cmd_id = request
            at_us = max(self.engine.clock, self._wall_sim_us())
            queued = self.engine.inject_command(kind, bin_index, client.client_id, at_us)
            self._pending_acks[id(queued)] = (client, cmd_id)

    def _snapshot(self) -> dict:
        if self.engine is not None:
            return self.engine.snapshot()
        return self._replay_state.snapshot()

    # -- engine callbacks (session thread) -------------------------------

    def _on_engine_event(self, event: SimEvent) -> None:
        record = event.to_record()
        self._broadcast(_msg("event", event=record))
        if event.kind == "NotificationSent" and event.attrs.get("outcome") == "sent":
            notif = self.engine.notifications[event.attrs["notif"] - 1]
            self._broadcast(
                _msg(
                    "notification",
                    sms=notif["sms"],
                    bin=notif["bin"],
                    level_pct=notif["level_pct"],
                )
            )

    def _on_command_applied(self, command: ScenarioCommand, event_id: int) -> None:
        pending = self._pending_acks.pop(id(command), None)
        if pending is not None:
            client, cmd_id = pending
            client.send(_msg("ack", cmd_id=cmd_id, event_id=event_id))


# -- TCP listener --------------------------------------------------------


class _TcpHandler(socketserver.StreamRequestHandler):
    def handle(self) -> None:
        session: GatewaySession = self.server.session  # type: ignore[attr-defined]
        client = session.attach()
        writer = threading.Thread(
            target=_drain_to_socket, args=(client, self.connection), daemon=True
        )
        writer.start()
        try:
            for raw in self.rfile:
                line = raw.decode("utf-8", errors="replace").strip()
                if line:
                    session.handle_message(client, line)
        except (ConnectionError, OSError):
            pass
        finally:
            session.detach(client)


def _drain_to_socket(client: ClientConn, conn: socket.socket) -> None:
    while True:
        message = client.outbox.get()
        if message is None:
            return
        try:
            conn.sendall((json.dumps(message, separators=(",", ":")) + "\n").encode())
        except (ConnectionError, OSError):
            return


class _TcpServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True


# -- WebSocket listener --------------------------------------------------


def _ws_handler_factory(session: GatewaySession) -> Callable:
    from websockets.exceptions import ConnectionClosed

    def handler(websocket) -> None:
        client = session.attach()

        def drain() -> None:
            while True:
                message = client.outbox.get()
                if message is None:
                    return
                try:
                    websocket.send(json.dumps(message, separators=(",", ":")))
                except ConnectionClosed:
                    return
                except OSError:
                    return

        writer = threading.Thread(target=drain, daemon=True)
        writer.start()
        try:
            for raw in websocket:
                session.handle_message(client, raw)
        except ConnectionClosed:
            pass
        finally:
            session.detach(client)

    return handler


class Gateway:
    """Bundles one session with its TCP and WebSocket listeners."""

    def __init__(
        self,
        session: GatewaySession,
        host: str = "127.0.0.1",
        tcp_port: int = DEFAULT_TCP_PORT,
        ws_port: int | None = DEFAULT_WS_PORT,
    ):
        self.session = session
        self._tcp = _TcpServer((host, tcp_port), _TcpHandler)
        self._tcp.session = session  # type: ignore[attr-defined]
        self.tcp_port = self._tcp.server_address[1]
        self._tcp_thread = threading.Thread(
            target=self._tcp.serve_forever, daemon=True, name="gateway-tcp"
        )
        self._ws = None
        self._ws_thread = None
        self.ws_port = None
        if ws_port is not None:
            from websockets.sync.server import serve

            self._ws = serve(_ws_handler_factory(session), host, ws_port)
            self.ws_port = self._ws.socket.getsockname()[1]
            self._ws_thread = threading.Thread(
                target=self._ws.serve_forever, daemon=True, name="gateway-ws"
            )

    def start(self) -> None:
        self._tcp_thread.start()
        if self._ws_thread is not None:
            self._ws_thread.start()
        self.session.start()

    def stop(self) -> None:
        self.session.stop()
        self._tcp.shutdown()
        self._tcp.server_close()
        if self._ws is not None:
            self._ws.shutdown()

    def wait(self, timeout: float | None = None) -> bool:
        """Block until the session ends; True if it did."""
        return self.session.ended.wait(timeout)
