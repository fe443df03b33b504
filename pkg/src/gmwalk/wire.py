"""Client for querying a remote hard-label classifier.

Wire protocol (newline-delimited JSON, UTF-8, one message per line):

    client -> {"type": "hello", "protocol": 1}
    server -> {"type": "ready", "num_classes": k, "num_joints": O,
               "frames": n_or_null}
    client -> {"type": "classify", "id": u64, "frames": [[[x, y, z] * O] * n]}
    server -> {"type": "label", "id": u64, "class": int}
    server -> {"type": "error", "id": u64, "message": "..."}

Endpoints: "host:port" opens a TCP connection; "stdio:<command ...>" spawns
the command and speaks over its stdin/stdout. One connection per attack
instance; the client is not thread-safe across instances.
"""

from __future__ import annotations

import json
import select
import shlex
import socket
import subprocess

import numpy as np

from .classifier import ClassifierGateway, Label
from .errors import ProtocolError, TransportError
from .motion import Motion

PROTOCOL_VERSION = 1
DEFAULT_TIMEOUT = 30.0


def _encode(message: dict) -> bytes:
    return (json.dumps(message, separators=(",", ":"), sort_keys=True) + "\n").encode("utf-8")


class _TcpTransport:
    def __init__(self, host: str, port: int, timeout: float):
        try:
            self._sock = socket.create_connection((host, port), timeout=timeout)
        except OSError as exc:
            raise TransportError(f"cannot connect to {host}:{port}: {exc}") from exc
        self._sock.settimeout(timeout)
        self._reader = self._sock.makefile("rb")

    def send(self, payload: bytes) -> None:
        try:
            self._sock.sendall(payload)
        except OSError as exc:
            raise TransportError(f"send failed: {exc}") from exc

    def recv_line(self) -> bytes:
        try:
            line = self._reader.readline()
        except (OSError, socket.timeout) as exc:
            raise TransportError(f"receive failed: {exc}") from exc
        if not line:
            raise TransportError("server closed the connection")
        return line

    def close(self) -> None:
        try:
            self._reader.close()
            self._sock.close()
        except OSError:
            pass


class _StdioTransport:
    def __init__(self, command: str, timeout: float):
        self._timeout = timeout
        try:
            self._proc = subprocess.Popen(
                shlex.split(command),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
            )
        except OSError as exc:
            raise TransportError(f"cannot spawn {command!r}: {exc}") from exc

    def send(self, payload: bytes) -> None:
        try:
            self._proc.stdin.write(payload)
            self._proc.stdin.flush()
        except (OSError, BrokenPipeError) as exc:
            raise TransportError(f"send failed: {exc}") from exc

    def recv_line(self) -> bytes:
        ready, _, _ = select.select([self._proc.stdout], [], [], self._timeout)
        if not ready:
            raise TransportError(f"no response within {self._timeout}s")
        line = self._proc.stdout.readline()
        if not line:
            raise TransportError("server process closed its output")
        return line

    def close(self) -> None:
        try:
            self._proc.stdin.close()
            self._proc.terminate()
            self._proc.wait(timeout=5.0)
        except (OSError, subprocess.TimeoutExpired):
            self._proc.kill()


def _open_transport(endpoint: str, timeout: float):
    if endpoint.startswith("stdio:"):
        return _StdioTransport(endpoint[len("stdio:"):], timeout)
    host, _, port = endpoint.rpartition(":")
    if not host or not port.isdigit():
        raise ValueError(f"endpoint must be host:port or stdio:<command>, got {endpoint!r}")
    return _TcpTransport(host, int(port), timeout)


class RemoteClassifier:
    """Hard-label oracle behind the wire protocol.

    Connects and completes the handshake eagerly; `num_classes`, `num_joints`
    and `expected_frames` mirror the server's declaration. Responses are
    correlated by the request id, so a duplicated or delayed answer for an
    older id is a protocol error.
    """

    def __init__(self, endpoint: str, timeout: float = DEFAULT_TIMEOUT):
        self.endpoint = endpoint
        self._transport = _open_transport(endpoint, timeout)
        self._next_id = 1
        reply = self._roundtrip({"type": "hello", "protocol": PROTOCOL_VERSION})
        if reply.get("type") != "ready":
            raise ProtocolError(f"expected ready, got {reply.get('type')!r}")
        try:
            self.num_classes = int(reply["num_classes"])
            self.num_joints = int(reply["num_joints"])
            frames = reply.get("frames")
            self.expected_frames = None if frames is None else int(frames)
        except (KeyError, TypeError, ValueError) as exc:
            raise ProtocolError(f"malformed ready message: {reply}") from exc

    def _roundtrip(self, message: dict) -> dict:
        self._transport.send(_encode(message))
        line = self._transport.recv_line()
        try:
            reply = json.loads(line.decode("utf-8"))
        except ValueError as exc:
            raise ProtocolError(f"malformed response line: {line!r}") from exc
        if not isinstance(reply, dict):
            raise ProtocolError(f"response is not an object: {reply!r}")
        return reply

    def decide(self, frames: np.ndarray) -> Label:
        request_id = self._next_id
        self._next_id += 1
        reply = self._roundtrip(
            {"type": "classify", "id": request_id, "frames": np.asarray(frames).tolist()}
        )
        kind = reply.get("type")
        if kind == "error":
            raise ProtocolError(f"server error: {reply.get('message')}")
        if kind != "label":
            raise ProtocolError(f"expected label, got {kind!r}")
        if reply.get("id") != request_id:
            raise ProtocolError(
                f"response id {reply.get('id')} does not match request {request_id}"
            )
        label = reply.get("class")
        if not isinstance(label, int) or not 0 <= label < self.num_classes:
            raise ProtocolError(
                f"class {label!r} outside the handshake range [0, {self.num_classes})"
            )
        return label

    def close(self) -> None:
        self._transport.close()

    def __enter__(self) -> "RemoteClassifier":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()


def remote_classify(endpoint: str, mo: Motion, timeout: float = DEFAULT_TIMEOUT) -> Label:
    """One-shot convenience: connect, handshake, classify one motion."""
    with RemoteClassifier(endpoint, timeout=timeout) as client:
        return client.decide(mo.frames)


def remote_gateway(
    endpoint: str,
    budget: int | None = None,
    timeout: float = DEFAULT_TIMEOUT,
    cache: bool = False,
) -> ClassifierGateway:
    """Ledger-counted gateway backed by a remote classifier connection."""
    client = RemoteClassifier(endpoint, timeout=timeout)
    gateway = ClassifierGateway(
        decision=client.decide,
        num_classes=client.num_classes,
        num_joints=client.num_joints,
        expected_frames=client.expected_frames,
        budget=budget,
        cache=cache,
    )
    gateway.remote = client  # keeps the connection alive and closable
    return gateway
