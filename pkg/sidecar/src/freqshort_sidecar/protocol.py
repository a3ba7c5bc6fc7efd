"""Server-side implementation of the binary inference protocol.

Frame layout (little-endian):

    magic   4 bytes  b"HFSS"
    version u8       1
    kind    u8       0 = infer request, 1 = infer response, 2 = error
    id      u64      request id, echoed in the matching response
    length  u64      payload byte count
    payload

Infer request payload: u32 batch | u32 channels | u32 height | u32 width,
then float32 tensor data. Infer response payload: u32 batch | u32
class_count, then float32 logits. Error payload: UTF-8 message.

The parser is defensive: a frame whose envelope is intact but whose content
is malformed (wrong version, unknown kind, payload/dims mismatch, oversized
batch) is consumed and answered with an error frame carrying the same
request id; bytes that do not start with the magic are skipped until the
next magic occurrence (one error frame per skipped run). The connection
survives all of it.
"""

from __future__ import annotations

import struct

import numpy as np

MAGIC = b"HFSS"
VERSION = 1
KIND_INFER_REQUEST = 0
KIND_INFER_RESPONSE = 1
KIND_ERROR = 2

HEADER = struct.Struct("<4sBBQQ")
REQUEST_HEAD = struct.Struct("<IIII")
RESPONSE_HEAD = struct.Struct("<II")

MAX_PAYLOAD = 256 * 1024 * 1024
MAX_BATCH = 4096


def pack_frame(kind: int, request_id: int, payload: bytes) -> bytes:
    return HEADER.pack(MAGIC, VERSION, kind, request_id, len(payload)) + payload


def error_frame(request_id: int, message: str) -> bytes:
    return pack_frame(KIND_ERROR, request_id, message.encode("utf-8"))


def response_frame(request_id: int, logits: np.ndarray) -> bytes:
    arr = np.ascontiguousarray(logits, dtype="<f4")
    payload = RESPONSE_HEAD.pack(arr.shape[0], arr.shape[1]) + arr.tobytes()
    return pack_frame(KIND_INFER_RESPONSE, request_id, payload)


def parse_request(payload: bytes) -> np.ndarray:
    """Decode an infer-request payload; ValueError on any inconsistency."""
    if len(payload) < REQUEST_HEAD.size:
        raise ValueError("request payload shorter than its dimension header")
    batch, channels, height, width = REQUEST_HEAD.unpack_from(payload)
    if batch == 0 or batch > MAX_BATCH:
        raise ValueError(f"batch size {batch} outside 1..{MAX_BATCH}")
    expected = REQUEST_HEAD.size + 4 * batch * channels * height * width
    if len(payload) != expected:
        raise ValueError(
            f"payload is {len(payload)} bytes but dimensions imply {expected}"
        )
    data = np.frombuffer(payload, dtype="<f4", offset=REQUEST_HEAD.size)
    return data.reshape(batch, channels, height, width)


class StreamReader:
    """Buffered reader over a ``recv(n) -> bytes`` callable."""

    def __init__(self, recv):
        self._recv = recv
        self._buf = bytearray()
        self.eof = False

    def ensure(self, n: int) -> bool:
        while len(self._buf) < n and not self.eof:
            try:
                chunk = self._recv(65536)
            except OSError:
                chunk = b""
            if not chunk:
                self.eof = True
            else:
                self._buf.extend(chunk)
        return len(self._buf) >= n

    def peek(self, n: int) -> bytes:
        return bytes(self._buf[:n])

    def take(self, n: int) -> bytes:
        out = bytes(self._buf[:n])
        del self._buf[:n]
        return out

    def skip_to_magic(self) -> int:
        """Drop bytes until the buffer starts with the magic; returns count."""
        idx = self._buf.find(MAGIC, 1)
        if idx < 0:
            # keep a tail that could still be a magic prefix
            dropped = max(len(self._buf) - (len(MAGIC) - 1), 1)
        else:
            dropped = idx
        del self._buf[:dropped]
        return dropped


def serve_stream(recv, send, model) -> None:
    """Answer frames on one byte stream until EOF. Never raises on bad input."""
    reader = StreamReader(recv)
    while True:
        if not reader.ensure(HEADER.size):
            return
        magic, version, kind, request_id, length = HEADER.unpack(reader.peek(HEADER.size))
        if magic != MAGIC:
            reader.skip_to_magic()
            send(error_frame(0, "bad frame magic; resynchronized"))
            continue
        if length > MAX_PAYLOAD:
            # declared length is not trustworthy: drop the header and resync
            reader.take(HEADER.size)
            if reader.peek(len(MAGIC)) != MAGIC:
                reader.skip_to_magic()
            send(error_frame(request_id, f"payload of {length} bytes exceeds limit"))
            continue
        if not reader.ensure(HEADER.size + length):
            return
        reader.take(HEADER.size)
        payload = reader.take(length)
        if version != VERSION:
            send(error_frame(request_id, f"unsupported protocol version {version}"))
            continue
        if kind != KIND_INFER_REQUEST:
            send(error_frame(request_id, f"unexpected frame kind {kind}"))
            continue
        try:
            batch = parse_request(payload)
            logits = model.predict(batch)
        except Exception as exc:  # malformed content or model failure
            send(error_frame(request_id, str(exc) or type(exc).__name__))
            continue
        send(response_frame(request_id, logits))
