"""Telemetry streaming and operator command endpoint.

Wire protocol (documented in docs/telemetry_protocol.md): newline-delimited
JSON over a single duplex TCP connection. Every frame and command carries a
``v`` version field. The server pushes telemetry frames at up to 20 Hz;
clients send command objects and receive an acknowledgment carrying the
resulting engagement state. Commands are queued here and applied by the
session at tick boundaries, never mid-tick.
"""

from __future__ import annotations

import json
import logging
import queue
import socket
import threading

log = logging.getLogger(__name__)

PROTOCOL_VERSION = 1

COMMAND_KINDS = {"engage", "disengage", "override", "spawn_agent", "set_light"}


class _Client:
    def __init__(self, conn: socket.socket):
        self.conn = conn
        self.outbox: queue.Queue = queue.Queue(maxsize=64)
        self.alive = True

    def send(self, obj: dict) -> None:
        try:
            self.outbox.put_nowait(obj)
        except queue.Full:
            # drop telemetry rather than stall the session
            pass


class TelemetryServer:
    """Threaded NDJSON-over-TCP endpoint for telemetry and operator commands."""

    def __init__(self, port: int = 0, host: str = "127.0.0.1"):
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._sock.bind((host, port))
        self._sock.listen(4)
        self.port = self._sock.getsockname()[1]
        self.commands: queue.Queue = queue.Queue()
        self._clients: list[_Client] = []
        self._lock = threading.Lock()
        self._stop = threading.Event()
        self._accept_thread = threading.Thread(target=self._accept_loop, daemon=True)
        self._accept_thread.start()

    # ------------------------------------------------------------- session

    def broadcast(self, frame: dict) -> None:
        frame = dict(frame)
        frame.setdefault("v", PROTOCOL_VERSION)
        frame.setdefault("type", "telemetry")
        with self._lock:
            clients = list(self._clients)
        for client in clients:
            client.send(frame)

    def pending_commands(self) -> list[tuple[dict, "_Client"]]:
        out = []
        while True:
            try:
                out.append(self.commands.get_nowait())
            except queue.Empty:
                return out

    def ack(self, client: "_Client", command: dict, ok: bool,
            engagement: dict | None = None, message: str = "") -> None:
        client.send({
            "v": PROTOCOL_VERSION,
            "type": "ack" if ok else "rejection",
            "kind": command.get("kind"),
            "seq": command.get("seq"),
            "ok": ok,
            "engagement": engagement,
            "message": message,
        })

    def close(self) -> None:
        self._stop.set()
        try:
            self._sock.close()
        except OSError:
            pass
        with self._lock:
            for client in self._clients:
                client.alive = False
                try:
                    client.conn.close()
                except OSError:
                    pass

    # ------------------------------------------------------------- plumbing

    def _accept_loop(self) -> None:
        while not self._stop.is_set():
            try:
                conn, _ = self._sock.accept()
            except OSError:
                return
            client = _Client(conn)
            with self._lock:
                self._clients.append(client)
            threading.Thread(target=self._reader, args=(client,), daemon=True).start()
            threading.Thread(target=self._writer, args=(client,), daemon=True).start()

    def _reader(self, client: _Client) -> None:
        buf = b""
        while client.alive and not self._stop.is_set():
            try:
                chunk = client.conn.recv(4096)
            except OSError:
                break
            if not chunk:
                break
            buf += chunk
            while b"\n" in buf:
                line, buf = buf.split(b"\n", 1)
                if not line.strip():
                    continue
                try:
                    obj = json.loads(line)
                    if not isinstance(obj, dict) or obj.get("type") != "command" \
                            or obj.get("kind") not in COMMAND_KINDS:
                        raise ValueError("not a valid command object")
                except ValueError as exc:
                    client.send({"v": PROTOCOL_VERSION, "type": "rejection",
                                 "ok": False, "message": str(exc)})
                    continue
                self.commands.put((obj, client))
        self._drop(client)

    def _writer(self, client: _Client) -> None:
        while client.alive and not self._stop.is_set():
            try:
                obj = client.outbox.get(timeout=0.1)
            except queue.Empty:
                continue
            try:
                client.conn.sendall((json.dumps(obj) + "\n").encode())
            except OSError:
                break
        self._drop(client)

    def _drop(self, client: _Client) -> None:
        client.alive = False
        with self._lock:
            if client in self._clients:
                self._clients.remove(client)
        try:
            client.conn.close()
        except OSError:
            pass
