"""Client side of the freqsift-oracle/1 wire protocol.

The protocol is newline-delimited JSON over stdio (a spawned subprocess) or
TCP. The server speaks first:

    {"protocol": "freqsift-oracle/1", "n_classes": N,
     "labels": [...], "sample_rate": R}

then answers each request

    {"id": "...", "sample_rate": R, "samples_b64": "<base64 of
     little-endian float32 samples>"}

with either

    {"id": "...", "probs": [...], "labels": [...]?}   or
    {"id": "...", "error": "..."}

Responses are matched to requests by id, never by arrival order. Multiple
requests may be in flight at once, bounded by ``max_inflight``.
"""

from __future__ import annotations

import base64
import json
import queue
import shlex
import socket
import subprocess
import threading
import uuid
from dataclasses import dataclass

import numpy as np

from .errors import BackendError, InvalidParameterError
from .oracle import ClassifierHandle, OracleFailure
from .signal import Signal

__all__ = [
    "PROTOCOL_NAME",
    "encode_samples",
    "decode_samples",
    "connect_external",
    "ExternalBackend",
    "parse_endpoint",
]

PROTOCOL_NAME = "freqsift-oracle/1"
DEFAULT_TIMEOUT_S = 30.0


def encode_samples(samples: np.ndarray) -> str:
    """Base64 of little-endian float32 samples."""
    return base64.b64encode(
        np.asarray(samples, dtype="<f4").tobytes()
    ).decode("ascii")


def decode_samples(b64: str) -> np.ndarray:
    return np.frombuffer(base64.b64decode(b64), dtype="<f4")


@dataclass(frozen=True)
class Endpoint:
    transport: str  # "stdio" | "tcp"
    command: tuple[str, ...] = ()
    host: str = ""
    port: int = 0


def parse_endpoint(spec: str) -> Endpoint:
    """Parse "stdio:<command line>" or "tcp:<host>:<port>"."""
    if spec.startswith("stdio:"):
        cmd = tuple(shlex.split(spec[len("stdio:") :]))
        if not cmd:
            raise InvalidParameterError("stdio endpoint needs a command")
        return Endpoint(transport="stdio", command=cmd)
    if spec.startswith("tcp:"):
        rest = spec[len("tcp:") :]
        host, sep, port = rest.rpartition(":")
        if not sep or not host:
            raise InvalidParameterError(f"tcp endpoint must be tcp:host:port, got {spec!r}")
        return Endpoint(transport="tcp", host=host, port=int(port))
    raise InvalidParameterError(f"endpoint must start with stdio: or tcp:, got {spec!r}")


class _LineTransport:
    """Blocking line transport with a reader thread, so timeouts work the
    same way over pipes and sockets."""

    def __init__(self):
        self._lines: queue.Queue[str | None] = queue.Queue()
        self._lock = threading.Lock()

    def _start_reader(self, readline):
        def pump():
            try:
                while True:
                    line = readline()
                    if not line:
                        break
                    self._lines.put(line if isinstance(line, str) else line.decode("utf-8"))
            except Exception:
                pass
            finally:
                self._lines.put(None)

        t = threading.Thread(target=pump, daemon=True)
        t.start()

    def recv(self, timeout: float) -> dict:
        try:
            line = self._lines.get(timeout=timeout)
        except queue.Empty:
            raise BackendError(f"oracle timed out after {timeout} s")
        if line is None:
            raise BackendError("oracle closed the connection")
        try:
            return json.loads(line)
        except json.JSONDecodeError as exc:
            raise BackendError(f"malformed oracle message: {exc}", payload=line)

    def send(self, obj: dict) -> None:
        raise NotImplementedError

    def close(self) -> None:
        raise NotImplementedError


class _StdioTransport(_LineTransport):
    def __init__(self, command):
        super().__init__()
        self._proc = subprocess.Popen(
            list(command),
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            stderr=subprocess.DEVNULL,
            text=True,
        )
        self._start_reader(self._proc.stdout.readline)

    def send(self, obj: dict) -> None:
        with self._lock:
            try:
                self._proc.stdin.write(json.dumps(obj) + "\n")
                self._proc.stdin.flush()
            except (BrokenPipeError, ValueError) as exc:
                raise BackendError(f"oracle subprocess pipe closed: {exc}")

    def close(self) -> None:
        try:
            self._proc.stdin.close()
        except Exception:
            pass
        try:
            self._proc.wait(timeout=5)
        except subprocess.TimeoutExpired:
            self._proc.kill()


class _TcpTransport(_LineTransport):
    def __init__(self, host, port, timeout):
        super().__init__()
        self._sock = socket.create_connection((host, port), timeout=timeout)
        # reads block in the reader thread; timeouts are enforced by recv()
        self._sock.settimeout(None)
        self._file = self._sock.makefile("rwb")
        self._start_reader(self._file.readline)

    def send(self, obj: dict) -> None:
        with self._lock:
            try:
                self._file.write((json.dumps(obj) + "\n").encode("utf-8"))
                self._file.flush()
            except OSError as exc:
                raise BackendError(f"oracle socket closed: {exc}")

    def close(self) -> None:
        try:
            self._sock.close()
        except Exception:
            pass


class ExternalBackend:
    """Backend for :func:`freqsift.oracle.classify` that talks the wire
    protocol. Construct via :func:`connect_external`."""

    def __init__(self, transport: _LineTransport, handshake: dict,
                 timeout_s: float, max_inflight: int):
        self._transport = transport
        self._timeout_s = timeout_s
        self._max_inflight = max(1, int(max_inflight))
        self._counter = 0
        self.labels = tuple(str(x) for x in handshake["labels"])
        self.n_classes = int(handshake["n_classes"])
        self.sample_rate = int(handshake["sample_rate"])
        self._stash: dict[str, dict] = {}

    def _next_id(self) -> str:
        self._counter += 1
        return f"q{self._counter}-{uuid.uuid4().hex[:8]}"

    def _request_for(self, signal: Signal, req_id: str) -> dict:
        return {
            "id": req_id,
            "sample_rate": signal.sample_rate_hz,
            "samples_b64": encode_samples(signal.samples),
        }

    def _recv_for(self, req_id: str) -> dict:
        if req_id in self._stash:
            return self._stash.pop(req_id)
        while True:
            msg = self._transport.recv(self._timeout_s)
            got = msg.get("id")
            if got == req_id:
                return msg
            if got is None:
                raise BackendError("oracle response without an id", payload=msg)
            self._stash[str(got)] = msg

    @staticmethod
    def _probs_from(msg: dict):
        if "error" in msg:
            raise BackendError(f"oracle error: {msg['error']}", payload=msg)
        if "probs" not in msg:
            raise BackendError("oracle response missing probs", payload=msg)
        return msg["probs"]

    def predict(self, signal: Signal) -> np.ndarray:
        req_id = self._next_id()
        self._transport.send(self._request_for(signal, req_id))
        return np.asarray(self._probs_from(self._recv_for(req_id)), dtype=np.float64)

    def predict_batch(self, signals) -> list:
        """Pipelined batch: up to max_inflight requests outstanding, results
        returned in input order, per-element failures as OracleFailure."""
        ids = [self._next_id() for _ in signals]
        results: list = [None] * len(signals)
        sent = 0
        for i, req_id in enumerate(ids):
            try:
                # keep the pipeline full before blocking on response i
                while sent < len(signals) and sent - i < self._max_inflight:
                    self._transport.send(self._request_for(signals[sent], ids[sent]))
                    sent += 1
                results[i] = self._probs_from(self._recv_for(req_id))
            except BackendError as exc:
                results[i] = OracleFailure(str(exc), payload=exc.payload)
        return results

    def close(self) -> None:
        self._transport.close()


def connect_external(
    handle_id: str,
    endpoint: Endpoint | str,
    timeout_s: float = DEFAULT_TIMEOUT_S,
    max_inflight: int = 32,
) -> ClassifierHandle:
    """Open a connection, consume the handshake, and wrap it as a handle."""
    ep = parse_endpoint(endpoint) if isinstance(endpoint, str) else endpoint
    try:
        if ep.transport == "stdio":
            transport = _StdioTransport(ep.command)
        else:
            transport = _TcpTransport(ep.host, ep.port, timeout_s)
    except OSError as exc:
        raise BackendError(f"cannot reach oracle endpoint: {exc}") from exc
    handshake = transport.recv(timeout_s)
    if handshake.get("protocol") != PROTOCOL_NAME:
        transport.close()
        raise BackendError(
            f"expected handshake for {PROTOCOL_NAME}, got {handshake.get('protocol')!r}",
            payload=handshake,
        )
    for key in ("n_classes", "labels", "sample_rate"):
        if key not in handshake:
            transport.close()
            raise BackendError(f"handshake missing {key!r}", payload=handshake)
    backend = ExternalBackend(transport, handshake, timeout_s, max_inflight)
    return ClassifierHandle(
        id=handle_id,
        labels=backend.labels,
        backend=backend,
        expected_sample_rate_hz=backend.sample_rate,
    )
