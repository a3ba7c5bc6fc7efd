"""Long-running protocol server over TCP or standard I/O."""

from __future__ import annotations

import socket
import sys
import threading

from .protocol import serve_stream


def serve_tcp(model, host: str = "127.0.0.1", port: int = 0, *, ready_callback=None):
    """Accept connections forever; each one is handled on its own thread.

    ``ready_callback`` (if given) receives the bound (host, port) once the
    socket listens — handy when port 0 picks a free port.
    """
    listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    listener.bind((host, port))
    listener.listen()
    if ready_callback is not None:
        ready_callback(listener.getsockname())
    try:
        while True:
            conn, _ = listener.accept()
            thread = threading.Thread(
                target=_serve_connection, args=(conn, model), daemon=True
            )
            thread.start()
    finally:
        listener.close()


def _serve_connection(conn: socket.socket, model) -> None:
    send_lock = threading.Lock()

    def send(data: bytes) -> None:
        with send_lock:
            try:
                conn.sendall(data)
            except OSError:
                pass

    try:
        serve_stream(conn.recv, send, model)
    finally:
        try:
            conn.close()
        except OSError:
            pass


def serve_stdio(model) -> None:
    """Serve one session over this process's stdin/stdout (binary)."""
    stdin = sys.stdin.buffer
    stdout = sys.stdout.buffer

    def send(data: bytes) -> None:
        stdout.write(data)
        stdout.flush()

    serve_stream(stdin.read1 if hasattr(stdin, "read1") else stdin.read, send, model)
