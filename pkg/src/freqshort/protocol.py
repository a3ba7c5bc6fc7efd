"""Binary inference protocol: length-prefixed frames over a byte stream.

Frame layout (little-endian):

    magic   4 bytes  b"HFSS"
    version u8       1
    kind    u8       0 = infer request, 1 = infer response, 2 = error
    id      u64      request id, echoed in the matching response
    length  u64      payload byte count
    payload

Infer request payload: u32 batch | u32 channels | u32 height | u32 width,
then float32 tensor data (batch x channels x height x width, row-major).
Infer response payload: u32 batch | u32 class_count, then float32 logits
(batch x class_count). Error payload: UTF-8 message.

Tensors travel raw in [0, 1]; any normalization recipe belongs to the
serving side.
"""

from __future__ import annotations

import itertools
import socket
import struct
import threading

import numpy as np

from .errors import RemoteEndpointError

__all__ = [
    "MAGIC", "VERSION",
    "KIND_INFER_REQUEST", "KIND_INFER_RESPONSE", "KIND_ERROR",
    "HEADER", "MAX_PAYLOAD",
    "pack_frame", "read_frame",
    "encode_request", "decode_request", "encode_response", "decode_response",
    "RemoteClassifier",
]

MAGIC = b"HFSS"
VERSION = 1
KIND_INFER_REQUEST = 0
KIND_INFER_RESPONSE = 1
KIND_ERROR = 2

HEADER = struct.Struct("<4sBBQQ")
_REQUEST_HEAD = struct.Struct("<IIII")
_RESPONSE_HEAD = struct.Struct("<II")
MAX_PAYLOAD = 1 << 30


def pack_frame(kind: int, request_id: int, payload: bytes) -> bytes:
    return HEADER.pack(MAGIC, VERSION, kind, request_id, len(payload)) + payload


def encode_request(batch: np.ndarray) -> bytes:
    arr = np.ascontiguousarray(batch, dtype=np.float32)
    n, c, h, w = arr.shape
    return _REQUEST_HEAD.pack(n, c, h, w) + arr.tobytes()


def decode_request(payload: bytes) -> np.ndarray:
    if len(payload) < _REQUEST_HEAD.size:
        raise ValueError("request payload shorter than its header")
    n, c, h, w = _REQUEST_HEAD.unpack_from(payload)
    expected = _REQUEST_HEAD.size + 4 * n * c * h * w
    if len(payload) != expected:
        raise ValueError(f"request payload is {len(payload)} bytes, expected {expected}")
    data = np.frombuffer(payload, dtype=np.float32, offset=_REQUEST_HEAD.size)
    return data.reshape(n, c, h, w)


def encode_response(logits: np.ndarray) -> bytes:
    arr = np.ascontiguousarray(logits, dtype=np.float32)
    n, k = arr.shape
    return _RESPONSE_HEAD.pack(n, k) + arr.tobytes()


def decode_response(payload: bytes) -> np.ndarray:
    if len(payload) < _RESPONSE_HEAD.size:
        raise ValueError("response payload shorter than its header")
    n, k = _RESPONSE_HEAD.unpack_from(payload)
    expected = _RESPONSE_HEAD.size + 4 * n * k
    if len(payload) != expected:
        raise ValueError(f"response payload is {len(payload)} bytes, expected {expected}")
    data = np.frombuffer(payload, dtype=np.float32, offset=_RESPONSE_HEAD.size)
    return data.reshape(n, k)


def _read_exact(read, n: int) -> bytes:
    chunks = []
    remaining = n
    while remaining:
        chunk = read(remaining)
        if not chunk:
            raise RemoteEndpointError("connection closed mid-frame")
        chunks.append(chunk)
        remaining -= len(chunk)
    return b"".join(chunks)


def read_frame(read) -> tuple[int, int, bytes]:
    """Read one well-formed frame via ``read(n) -> bytes``.

    Returns (kind, request_id, payload). Protocol violations raise
    RemoteEndpointError; this is the trusting client-side reader.
    """
    header = _read_exact(read, HEADER.size)
    magic, version, kind, request_id, length = HEADER.unpack(header)
    if magic != MAGIC:
        raise RemoteEndpointError(f"bad frame magic {magic!r}", retryable=False)
    if version != VERSION:
        raise RemoteEndpointError(f"unsupported protocol version {version}", retryable=False)
    if length > MAX_PAYLOAD:
        raise RemoteEndpointError(f"payload of {length} bytes exceeds limit", retryable=False)
    payload = _read_exact(read, length) if length else b""
    return kind, request_id, payload


class RemoteClassifier:
    """Protocol client. One logical connection, pipelined request/response.

    Multiple in-flight requests are allowed from any number of threads;
    a background reader matches responses to waiters by request id.
    """

    kind = "remote"

    def __init__(self, read, write, class_count: int | None = None, timeout: float = 60.0):
        self._read = read
        self._write = write
        self._send_lock = threading.Lock()
        self._state_lock = threading.Lock()
        self._results: dict[int, object] = {}
        self._cond = threading.Condition(self._state_lock)
        self._ids = itertools.count(1)
        self._timeout = timeout
        self._class_count = class_count
        self._dead: Exception | None = None
        self._reader = threading.Thread(target=self._reader_loop, daemon=True)
        self._reader.start()

    # -- construction helpers

    @classmethod
    def connect(cls, host: str, port: int, timeout: float = 60.0) -> "RemoteClassifier":
        try:
            sock = socket.create_connection((host, port), timeout=timeout)
        except OSError as exc:
            raise RemoteEndpointError(f"cannot connect to {host}:{port}: {exc}") from exc
        sock.settimeout(timeout)

        def read(n: int) -> bytes:
            try:
                return sock.recv(n)
            except OSError as exc:
                raise RemoteEndpointError(f"socket read failed: {exc}") from exc

        def write(data: bytes) -> None:
            try:
                sock.sendall(data)
            except OSError as exc:
                raise RemoteEndpointError(f"socket write failed: {exc}") from exc

        client = cls(read, write, timeout=timeout)
        client._sock = sock
        return client

    @classmethod
    def over_pipes(cls, stdout, stdin, timeout: float = 60.0) -> "RemoteClassifier":
        """Client over a subprocess's stdio pair (binary mode)."""

        def read(n: int) -> bytes:
            return stdout.read(n)

        def write(data: bytes) -> None:
            stdin.write(data)
            stdin.flush()

        return cls(read, write, timeout=timeout)

    # -- reader machinery

    def _reader_loop(self) -> None:
        try:
            while True:
                kind, request_id, payload = read_frame(self._read)
                if kind == KIND_INFER_RESPONSE:
                    result = decode_response(payload)
                elif kind == KIND_ERROR:
                    result = RemoteEndpointError(
                        payload.decode("utf-8", "replace") or "remote error"
                    )
                else:
                    result = RemoteEndpointError(f"unexpected frame kind {kind}")
                with self._cond:
                    self._results[request_id] = result
                    self._cond.notify_all()
        except Exception as exc:  # reader dies -> wake all waiters
            with self._cond:
                self._dead = exc
                self._cond.notify_all()

    @property
    def class_count(self) -> int:
        if self._class_count is None:
            raise RemoteEndpointError("class count unknown before the first response")
        return self._class_count

    def predict(self, batch: np.ndarray) -> np.ndarray:
        request_id = next(self._ids)
        frame = pack_frame(KIND_INFER_REQUEST, request_id, encode_request(batch))
        try:
            with self._send_lock:
                self._write(frame)
        except (OSError, ValueError) as exc:
            raise RemoteEndpointError(f"request write failed: {exc}") from exc
        with self._cond:
            ok = self._cond.wait_for(
                lambda: request_id in self._results or self._dead is not None,
                timeout=self._timeout,
            )
            if request_id not in self._results:
                if self._dead is not None:
                    raise RemoteEndpointError(f"remote connection lost: {self._dead}")
                if not ok:
                    raise RemoteEndpointError("timed out waiting for inference response")
            result = self._results.pop(request_id)
        if isinstance(result, Exception):
            raise result
        if self._class_count is None:
            self._class_count = int(result.shape[1])
        return np.asarray(result, dtype=np.float64)

    def close(self) -> None:
        sock = getattr(self, "_sock", None)
        if sock is not None:
            try:
                sock.close()
            except OSError:
                pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
