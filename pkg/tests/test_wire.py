import json
import socket
import threading

import numpy as np
import pytest

from gmwalk.attack import AttackConfig, gmw_attack, write_trace_csv
from gmwalk.classifier import centroid_gateway, train_centroid
from gmwalk.errors import ProtocolError, TransportError
from gmwalk.kinematics import forward_kinematics
from gmwalk.motion import Motion
from gmwalk.wire import RemoteClassifier, remote_classify, remote_gateway

from conftest import branched_skeleton, random_onmanifold_angle_motion


class LoopbackServer:
    """Minimal protocol server for tests; `respond` maps a parsed classify
    request to a response dict (or raw line via `raw`)."""

    def __init__(self, num_classes=2, num_joints=5, respond=None, hard_close_after=None):
        self.num_classes = num_classes
        self.num_joints = num_joints
        self.respond = respond or (lambda req: {"type": "label", "id": req["id"], "class": 0})
        self.hard_close_after = hard_close_after
        self._listener = socket.socket()
        self._listener.bind(("127.0.0.1", 0))
        self._listener.listen(4)
        self.port = self._listener.getsockname()[1]
        self._thread = threading.Thread(target=self._serve, daemon=True)
        self._thread.start()

    @property
    def endpoint(self):
        return f"127.0.0.1:{self.port}"

    def _serve(self):
        while True:
            try:
                conn, _ = self._listener.accept()
            except OSError:
                return
            threading.Thread(target=self._handle, args=(conn,), daemon=True).start()

    def _handle(self, conn):
        answered = 0
        with conn, conn.makefile("rwb") as stream:
            for line in stream:
                try:
                    req = json.loads(line)
                except ValueError:
                    continue
                if req.get("type") == "hello":
                    reply = {
                        "type": "ready",
                        "num_classes": self.num_classes,
                        "num_joints": self.num_joints,
                        "frames": None,
                    }
                elif req.get("type") == "classify":
                    if self.hard_close_after is not None and answered >= self.hard_close_after:
                        return
                    answered += 1
                    reply = self.respond(req)
                else:
                    reply = {"type": "error", "id": req.get("id", 0), "message": "bad type"}
                stream.write((json.dumps(reply) + "\n").encode())
                stream.flush()

    def close(self):
        self._listener.close()


@pytest.fixture
def motion(rng):
    sk = branched_skeleton()
    return forward_kinematics(random_onmanifold_angle_motion(sk, rng, n=5), sk)


def test_fixed_label_server(motion):
    server = LoopbackServer()
    try:
        assert remote_classify(server.endpoint, motion) == 0
        client = RemoteClassifier(server.endpoint)
        assert client.num_classes == 2
        assert client.num_joints == 5
        assert client.expected_frames is None
        assert client.decide(motion.frames) == 0
        client.close()
    finally:
        server.close()


def test_id_mismatch_is_protocol_error(motion):
    server = LoopbackServer(respond=lambda req: {"type": "label", "id": req["id"] + 7, "class": 0})
    try:
        client = RemoteClassifier(server.endpoint)
        with pytest.raises(ProtocolError):
            client.decide(motion.frames)
        client.close()
    finally:
        server.close()


def test_class_outside_handshake_range(motion):
    server = LoopbackServer(respond=lambda req: {"type": "label", "id": req["id"], "class": 9})
    try:
        client = RemoteClassifier(server.endpoint)
        with pytest.raises(ProtocolError):
            client.decide(motion.frames)
        client.close()
    finally:
        server.close()


def test_server_error_message(motion):
    server = LoopbackServer(respond=lambda req: {"type": "error", "id": req["id"], "message": "boom"})
    try:
        client = RemoteClassifier(server.endpoint)
        with pytest.raises(ProtocolError, match="boom"):
            client.decide(motion.frames)
        client.close()
    finally:
        server.close()


def test_mid_stream_close_is_transport_error(motion):
    server = LoopbackServer(hard_close_after=1)
    try:
        client = RemoteClassifier(server.endpoint, timeout=5.0)
        assert client.decide(motion.frames) == 0
        with pytest.raises(TransportError):
            client.decide(motion.frames)
        client.close()
    finally:
        server.close()


def test_unreachable_endpoint():
    with pytest.raises(TransportError):
        RemoteClassifier("127.0.0.1:1", timeout=0.5)


def test_bad_endpoint_string():
    with pytest.raises(ValueError):
        RemoteClassifier("no-port-here")


def corpus(rng, sk):
    data = []
    for c in range(3):
        for _ in range(4):
            mo = forward_kinematics(random_onmanifold_angle_motion(sk, rng, n=12, scale=0.4), sk)
            shifted = mo.frames + np.array([1.5 * c, 0.0, 0.0])
            data.append((mo.with_frames(shifted, label_hint=c), c))
    return data


def test_protocol_transparency_trace_identical(rng, tmp_path):
    """The same decision function behind the wire and in-process yields
    byte-identical attack traces for the same seed."""
    sk = branched_skeleton()
    data = corpus(rng, sk)
    model = train_centroid(data)

    def respond(req):
        frames = np.asarray(req["frames"], dtype=float)
        return {"type": "label", "id": req["id"], "class": int(model.decide(frames))}

    server = LoopbackServer(num_classes=model.num_classes, num_joints=sk.num_joints,
                            respond=respond)
    try:
        x = data[0][0]
        pool = [m for m, _ in data[1:]]
        cfg = AttackConfig(max_iters=15, rng_seed=77, epsilon=0.0, manifold_projection=True)

        local = gmw_attack(x, pool, sk, cfg, centroid_gateway(model))
        remote = gmw_attack(x, pool, sk, cfg, remote_gateway(server.endpoint))

        assert local.trace == remote.trace
        assert np.array_equal(local.adversarial.frames, remote.adversarial.frames)
        p1, p2 = tmp_path / "local.csv", tmp_path / "remote.csv"
        write_trace_csv(local.trace, p1)
        write_trace_csv(remote.trace, p2)
        assert p1.read_bytes() == p2.read_bytes()
    finally:
        server.close()
