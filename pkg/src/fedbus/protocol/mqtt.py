"""Minimal MQTT 3.1.1 client over a plain socket.

Covers exactly what the nodes need: CONNECT/CONNACK, PUBLISH at QoS 0 and 1,
SUBSCRIBE/SUBACK, PING keepalive, DISCONNECT. No session resumption, no QoS 2,
no will messages.
"""

from __future__ import annotations

import socket
import ssl as ssl_module
import struct
import threading
import time
from dataclasses import dataclass, field

PROTOCOL_NAME = b"\x00\x04MQTT"
PROTOCOL_LEVEL = 4  # 3.1.1

CONNECT = 0x10
CONNACK = 0x20
PUBLISH = 0x30
PUBACK = 0x40
SUBSCRIBE = 0x82
SUBACK = 0x90
PINGREQ = 0xC0
PINGRESP = 0xD0
DISCONNECT = 0xE0

CONNACK_REFUSED_NOT_AUTHORIZED = 5
SUBACK_FAILURE = 0x80


class MqttError(RuntimeError):
    pass


def encode_varint(n: int) -> bytes:
    out = bytearray()
    while True:
        byte = n % 128
        n //= 128
        if n:
            out.append(byte | 0x80)
        else:
            out.append(byte)
            return bytes(out)


def encode_string(s: str) -> bytes:
    raw = s.encode("utf-8")
    return struct.pack("!H", len(raw)) + raw


def read_exact(sock: socket.socket, n: int) -> bytes:
    buf = bytearray()
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            raise MqttError("connection closed")
        buf.extend(chunk)
    return bytes(buf)


def read_packet(sock: socket.socket) -> tuple[int, bytes]:
    """(first header byte, body) of the next control packet."""
    head = read_exact(sock, 1)[0]
    length = 0
    shift = 1
    for _ in range(4):
        byte = read_exact(sock, 1)[0]
        length += (byte & 0x7F) * shift
        if not byte & 0x80:
            break
        shift *= 128
    else:
        raise MqttError("malformed remaining length")
    return head, read_exact(sock, length) if length else b""


@dataclass
class _Pending:
    event: threading.Event = field(default_factory=threading.Event)
    result: int = 0


class MqttClient:
    """Threaded client: one reader, one keepalive pinger.

    ``on_message(topic, payload)`` runs on the reader thread; keep it quick
    or hand the work off to a queue.
    """

    def __init__(
        self,
        host: str,
        port: int,
        client_id: str,
        username: str | None = None,
        password: str | None = None,
        keepalive: int = 60,
        use_tls: bool = False,
        on_message=None,
    ):
        self.host = host
        self.port = port
        self.client_id = client_id
        self.username = username
        self.password = password
        self.keepalive = keepalive
        self.use_tls = use_tls
        self.on_message = on_message
        self._sock: socket.socket | None = None
        self._write_lock = threading.Lock()
        self._packet_id = 0
        self._pending: dict[int, _Pending] = {}
        self._pending_lock = threading.Lock()
        self._stop = threading.Event()
        self._reader: threading.Thread | None = None
        self._pinger: threading.Thread | None = None

    def connect(self, timeout: float = 10.0) -> None:
        sock = socket.create_connection((self.host, self.port), timeout=timeout)
        if self.use_tls:
            context = ssl_module.create_default_context()
            sock = context.wrap_socket(sock, server_hostname=self.host)
        sock.settimeout(timeout)
        flags = 0x02  # clean session
        body = PROTOCOL_NAME + bytes([PROTOCOL_LEVEL])
        tail = encode_string(self.client_id)
        if self.username is not None:
            flags |= 0x80
            tail += encode_string(self.username)
            if self.password is not None:
                flags |= 0x40
                tail += encode_string(self.password)
        body += bytes([flags]) + struct.pack("!H", self.keepalive) + tail
        sock.sendall(bytes([CONNECT]) + encode_varint(len(body)) + body)
        head, ack = read_packet(sock)
        if head & 0xF0 != CONNACK or len(ack) != 2:
            raise MqttError("expected CONNACK")
        if ack[1] != 0:
            raise MqttError(f"connection refused, code {ack[1]}")
        sock.settimeout(None)
        self._sock = sock
        self._stop.clear()
        self._reader = threading.Thread(target=self._read_loop, daemon=True)
        self._reader.start()
        self._pinger = threading.Thread(target=self._ping_loop, daemon=True)
        self._pinger.start()

    def _next_packet_id(self) -> int:
        self._packet_id = self._packet_id % 65535 + 1
        return self._packet_id

    def _send(self, frame: bytes) -> None:
        sock = self._sock
        if sock is None:
            raise MqttError("not connected")
        with self._write_lock:
            sock.sendall(frame)

    def _await_ack(self, packet_id: int, what: str, timeout: float) -> int:
        pending = self._pending[packet_id]
        if not pending.event.wait(timeout):
            with self._pending_lock:
                self._pending.pop(packet_id, None)
            raise MqttError(f"timed out waiting for {what}")
        with self._pending_lock:
            self._pending.pop(packet_id, None)
        return pending.result

    def publish(self, topic: str, payload: bytes, qos: int = 1, retain: bool = False,
                timeout: float = 10.0) -> None:
        head = PUBLISH | (qos << 1) | (1 if retain else 0)
        body = encode_string(topic)
        packet_id = None
        if qos == 1:
            packet_id = self._next_packet_id()
            with self._pending_lock:
                self._pending[packet_id] = _Pending()
            body += struct.pack("!H", packet_id)
        body += payload
        self._send(bytes([head]) + encode_varint(len(body)) + body)
        if packet_id is not None:
            self._await_ack(packet_id, "PUBACK", timeout)

    def subscribe(self, pattern: str, qos: int = 0, timeout: float = 10.0) -> None:
        packet_id = self._next_packet_id()
        with self._pending_lock:
            self._pending[packet_id] = _Pending()
        body = struct.pack("!H", packet_id) + encode_string(pattern) + bytes([qos])
        self._send(bytes([SUBSCRIBE]) + encode_varint(len(body)) + body)
        granted = self._await_ack(packet_id, "SUBACK", timeout)
        if granted == SUBACK_FAILURE:
            raise MqttError(f"subscription to {pattern!r} refused")

    def _read_loop(self) -> None:
        sock = self._sock
        try:
            while not self._stop.is_set():
                head, body = read_packet(sock)
                kind = head & 0xF0
                if kind == PUBLISH:
                    qos = (head >> 1) & 0x03
                    topic_len = struct.unpack("!H", body[:2])[0]
                    topic = body[2 : 2 + topic_len].decode("utf-8")
                    rest = body[2 + topic_len :]
                    if qos > 0:
                        packet_id = struct.unpack("!H", rest[:2])[0]
                        rest = rest[2:]
                        self._send(bytes([PUBACK]) + encode_varint(2) + struct.pack("!H", packet_id))
                    if self.on_message is not None:
                        self.on_message(topic, rest)
                elif kind in (PUBACK, SUBACK):
                    packet_id = struct.unpack("!H", body[:2])[0]
                    with self._pending_lock:
                        pending = self._pending.get(packet_id)
                    if pending is not None:
                        pending.result = body[2] if kind == SUBACK and len(body) > 2 else 0
                        pending.event.set()
                elif kind == PINGRESP:
                    pass
        except (MqttError, OSError):
            pass  # socket gone; close() or the peer ended the session

    def _ping_loop(self) -> None:
        interval = max(self.keepalive / 2.0, 1.0)
        while not self._stop.wait(interval):
            try:
                self._send(bytes([PINGREQ, 0]))
            except (MqttError, OSError):
                return

    def close(self) -> None:
        self._stop.set()
        sock = self._sock
        if sock is not None:
            try:
                with self._write_lock:
                    sock.sendall(bytes([DISCONNECT, 0]))
            except OSError:
                pass
            try:
                sock.close()
            except OSError:
                pass
            self._sock = None
        if self._reader is not None and self._reader is not threading.current_thread():
            self._reader.join(timeout=2.0)
