import socket
import struct
import threading

import numpy as np
import pytest

from freqshort_sidecar.models import LinearNpzModel
from freqshort_sidecar.protocol import serve_stream


def make_linear_model(input_shape=(1, 8, 8), classes=3, seed=7, normalization=None):
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    dim = int(np.prod(input_shape))
    weights = (rng.standard_normal((dim, classes)) / np.sqrt(dim)).astype(np.float32)
    bias = rng.standard_normal(classes).astype(np.float32)
    return LinearNpzModel(weights, bias, input_shape, normalization)


class RawClient:
    """Frame-level test client written independently of both packages."""

    HEADER = struct.Struct("<4sBBQQ")

    def __init__(self, sock):
        self.sock = sock

    def send_frame(self, kind, request_id, payload, *, magic=b"HFSS", version=1,
                   declared_length=None):
        length = len(payload) if declared_length is None else declared_length
        self.sock.sendall(self.HEADER.pack(magic, version, kind, request_id, length) + payload)

    def send_request(self, request_id, batch):
        arr = np.ascontiguousarray(batch, dtype="<f4")
        payload = struct.pack("<IIII", *arr.shape) + arr.tobytes()
        self.send_frame(0, request_id, payload)

    def recv_exact(self, n):
        data = b""
        while len(data) < n:
            chunk = self.sock.recv(n - len(data))
            if not chunk:
                raise ConnectionError("server closed the stream")
            data += chunk
        return data

    def recv_frame(self):
        header = self.recv_exact(self.HEADER.size)
        magic, version, kind, request_id, length = self.HEADER.unpack(header)
        assert magic == b"HFSS" and version == 1
        payload = self.recv_exact(length) if length else b""
        return kind, request_id, payload

    def recv_logits(self):
        kind, request_id, payload = self.recv_frame()
        assert kind == 1, payload.decode("utf-8", "replace")
        n, k = struct.unpack_from("<II", payload)
        logits = np.frombuffer(payload, dtype="<f4", offset=8).reshape(n, k)
        return request_id, logits

    def close(self):
        self.sock.close()


@pytest.fixture
def serve():
    """Start an in-process server over a socketpair; yields RawClient maker."""
    opened = []

    def start(model):
        client_sock, server_sock = socket.socketpair()
        lock = threading.Lock()

        def send(data):
            with lock:
                try:
                    server_sock.sendall(data)
                except OSError:
                    pass

        thread = threading.Thread(
            target=serve_stream, args=(server_sock.recv, send, model), daemon=True
        )
        thread.start()
        client = RawClient(client_sock)
        opened.append((client, server_sock, thread))
        return client

    yield start
    for client, server_sock, thread in opened:
        client.close()
        server_sock.close()
        thread.join(timeout=5)
