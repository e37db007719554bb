"""TCP front-end exposing the embedded broker over MQTT 3.1.1.

Runs the federation's single broker process: authentication is the identity
allowlist (CONNACK code 5 otherwise), ACL denials surface as SUBACK failure
codes or silently dropped publishes, matching the in-process contract.
"""

from __future__ import annotations

import socket
import struct
import threading

from .broker import BrokerError, EmbeddedBroker, Subscription
from .mqtt import (
    CONNACK,
    CONNACK_REFUSED_NOT_AUTHORIZED,
    CONNECT,
    DISCONNECT,
    PINGREQ,
    PINGRESP,
    PUBACK,
    PUBLISH,
    SUBACK,
    SUBACK_FAILURE,
    SUBSCRIBE,
    MqttError,
    encode_string,
    encode_varint,
    read_packet,
)


class _Connection:
    def __init__(self, frontend: "MqttFrontend", sock: socket.socket):
        self.frontend = frontend
        self.sock = sock
        self.client_id: str | None = None
        self.write_lock = threading.Lock()
        self.subs: list[Subscription] = []
        self.alive = True

    def send(self, frame: bytes) -> None:
        with self.write_lock:
            self.sock.sendall(frame)

    def close(self) -> None:
        self.alive = False
        for sub in self.subs:
            self.frontend.broker.unsubscribe(sub)
        try:
            self.sock.close()
        except OSError:
            pass


class MqttFrontend:
    def __init__(self, broker: EmbeddedBroker, host: str = "127.0.0.1", port: int = 0):
        self.broker = broker
        self._server = socket.create_server((host, port))
        self.host, self.port = self._server.getsockname()[:2]
        self._stop = threading.Event()
        self._accept_thread: threading.Thread | None = None
        self._connections: list[_Connection] = []
        self._conn_lock = threading.Lock()

    def start(self) -> None:
        self._accept_thread = threading.Thread(target=self._accept_loop, daemon=True)
        self._accept_thread.start()

    def _accept_loop(self) -> None:
        while not self._stop.is_set():
            try:
                sock, _ = self._server.accept()
            except OSError:
                return
            conn = _Connection(self, sock)
            with self._conn_lock:
                self._connections.append(conn)
            threading.Thread(target=self._serve, args=(conn,), daemon=True).start()

    def _serve(self, conn: _Connection) -> None:
        try:
            head, body = read_packet(conn.sock)
            if head & 0xF0 != CONNECT:
                return
            conn.client_id = _parse_connect(body)
            known = conn.client_id in self.broker._identities
            code = 0 if known else CONNACK_REFUSED_NOT_AUTHORIZED
            conn.send(bytes([CONNACK, 2, 0, code]))
            if not known:
                return
            while conn.alive:
                head, body = read_packet(conn.sock)
                kind = head & 0xF0
                if kind == PUBLISH:
                    self._handle_publish(conn, head, body)
                elif kind == SUBSCRIBE & 0xF0:  # type nibble; 0x82 carries flags
                    self._handle_subscribe(conn, body)
                elif kind == PINGREQ:
                    conn.send(bytes([PINGRESP, 0]))
                elif kind == DISCONNECT:
                    return
        except (MqttError, OSError, BrokerError):
            pass
        finally:
            conn.close()
            with self._conn_lock:
                if conn in self._connections:
                    self._connections.remove(conn)

    def _handle_publish(self, conn: _Connection, head: int, body: bytes) -> None:
        qos = (head >> 1) & 0x03
        retain = bool(head & 0x01)
        topic_len = struct.unpack("!H", body[:2])[0]
        topic = body[2 : 2 + topic_len].decode("utf-8")
        rest = body[2 + topic_len :]
        if qos > 0:
            packet_id = struct.unpack("!H", rest[:2])[0]
            rest = rest[2:]
        try:
            self.broker.publish(conn.client_id, topic, rest, retain=retain)
        except BrokerError:
            pass  # oversized or wildcard publish; the ack below still flows
        if qos == 1:
            conn.send(bytes([PUBACK, 2]) + struct.pack("!H", packet_id))

    def _handle_subscribe(self, conn: _Connection, body: bytes) -> None:
        packet_id = struct.unpack("!H", body[:2])[0]
        offset = 2
        codes = bytearray()
        while offset < len(body):
            length = struct.unpack("!H", body[offset : offset + 2])[0]
            pattern = body[offset + 2 : offset + 2 + length].decode("utf-8")
            offset += 2 + length + 1  # trailing requested-qos byte
            try:
                sub = self.broker.subscribe(conn.client_id, pattern)
            except BrokerError:
                codes.append(SUBACK_FAILURE)
                continue
            conn.subs.append(sub)
            codes.append(0)
            threading.Thread(target=self._pump, args=(conn, sub), daemon=True).start()
        frame_body = struct.pack("!H", packet_id) + bytes(codes)
        conn.send(bytes([SUBACK]) + encode_varint(len(frame_body)) + frame_body)

    def _pump(self, conn: _Connection, sub: Subscription) -> None:
        while conn.alive and not self._stop.is_set():
            item = sub.receive(timeout=0.2)
            if item is None:
                continue
            topic, payload = item
            body = encode_string(topic) + payload
            try:
                conn.send(bytes([PUBLISH]) + encode_varint(len(body)) + body)
            except OSError:
                return

    def stop(self) -> None:
        self._stop.set()
        try:
            self._server.close()
        except OSError:
            pass
        with self._conn_lock:
            conns = list(self._connections)
        for conn in conns:
            conn.close()


def _parse_connect(body: bytes) -> str:
    name_len = struct.unpack("!H", body[:2])[0]
    offset = 2 + name_len + 1 + 1 + 2  # name, level, flags, keepalive
    cid_len = struct.unpack("!H", body[offset : offset + 2])[0]
    return body[offset + 2 : offset + 2 + cid_len].decode("utf-8")
