"""freqsift-oracle/1 protocol server.

Wire format (one JSON object per line):

    server -> client, once:
        {"protocol": "freqsift-oracle/1", "n_classes": N,
         "labels": [...], "sample_rate": R}
    client -> server, per query:
        {"id": "...", "sample_rate": R,
         "samples_b64": base64(little-endian float32 samples)}
    server -> client, per query:
        {"id": "...", "probs": [...], "labels": [...]}   # labels first reply only
      or
        {"id": "...", "error": "..."}

Malformed or invalid requests produce per-id error responses and never
terminate the loop; a closed transport shuts the server down cleanly.
Model-specific preprocessing (resampling, padding) belongs here, behind the
predict callable, keeping the engine model-agnostic.
"""

from __future__ import annotations

import argparse
import base64
import importlib
import json
import select
import socket
import sys
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

PROTOCOL_NAME = "freqsift-oracle/1"


@dataclass
class AdapterConfig:
    labels: tuple[str, ...]
    sample_rate_hz: int
    predict: Callable[[np.ndarray, int], Sequence[float]]
    batch_cap: int = 1
    resample: bool = False  # linear-resample mismatched input instead of erroring
    predict_batch: Callable[[list[np.ndarray], int], Sequence[Sequence[float]]] | None = None

    def __post_init__(self):
        self.labels = tuple(str(x) for x in self.labels)
        if not self.labels:
            raise ValueError("labels must be non-empty")
        if int(self.sample_rate_hz) <= 0:
            raise ValueError("sample_rate_hz must be positive")
        if self.batch_cap < 1:
            raise ValueError("batch_cap must be >= 1")

    @property
    def n_classes(self) -> int:
        return len(self.labels)


def _linear_resample(x: np.ndarray, rate_in: int, rate_out: int) -> np.ndarray:
    n_out = max(1, int(round(x.size * rate_out / rate_in)))
    t_in = np.arange(x.size) / rate_in
    t_out = np.arange(n_out) / rate_out
    return np.interp(t_out, t_in, x).astype(np.float64)


def _error(req_id, message: str) -> dict:
    return {"id": req_id, "error": message}


def _normalized(raw, n_classes: int):
    probs = np.asarray(raw, dtype=np.float64).reshape(-1)
    if probs.size != n_classes:
        raise ValueError(f"predict returned {probs.size} values, expected {n_classes}")
    if not np.all(np.isfinite(probs)):
        raise ValueError("predict returned non-finite values")
    probs = np.clip(probs, 0.0, None)
    total = float(probs.sum())
    if total <= 0.0:
        raise ValueError("predict returned a non-positive distribution")
    return (probs / total).tolist()


def _parse_request(line: str, config: AdapterConfig):
    """Returns (req_id, samples) or raises ValueError with a wire message."""
    try:
        req = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ValueError(f"malformed JSON: {exc}") from exc
    if not isinstance(req, dict):
        raise ValueError("request must be a JSON object")
    req_id = req.get("id")
    if req_id is None:
        raise ValueError("request missing id")
    if "samples_b64" not in req:
        raise _RequestError(req_id, "request missing samples_b64")
    if "sample_rate" not in req:
        raise _RequestError(req_id, "request missing sample_rate")
    try:
        samples = np.frombuffer(
            base64.b64decode(req["samples_b64"], validate=True), dtype="<f4"
        )
    except Exception as exc:
        raise _RequestError(req_id, f"undecodable samples_b64: {exc}") from exc
    if samples.size == 0:
        raise _RequestError(req_id, "empty signal")
    rate = int(req["sample_rate"])
    if rate != config.sample_rate_hz:
        if not config.resample:
            raise _RequestError(
                req_id,
                f"sample rate {rate} Hz does not match model rate "
                f"{config.sample_rate_hz} Hz",
            )
        samples = _linear_resample(samples.astype(np.float64), rate, config.sample_rate_hz)
    return req_id, np.asarray(samples, dtype=np.float64)


class _RequestError(Exception):
    def __init__(self, req_id, message):
        super().__init__(message)
        self.req_id = req_id
        self.message = message


def _drain_ready_lines(rfile, cap: int) -> list[bytes]:
    """Greedily pull up to ``cap`` further lines that are already available,
    for internal batching. Only possible on real file descriptors."""
    lines: list[bytes] = []
    try:
        fd = rfile.fileno()
    except (OSError, AttributeError, ValueError):
        return lines
    while len(lines) < cap:
        ready, _, _ = select.select([fd], [], [], 0)
        if not ready:
            break
        line = rfile.readline()
        if not line:
            break
        lines.append(line)
    return lines


def serve_stream(config: AdapterConfig, rfile, wfile) -> None:
    """Run the protocol loop over byte-stream file objects."""

    def send(obj: dict) -> None:
        wfile.write((json.dumps(obj) + "\n").encode("utf-8"))
        wfile.flush()

    send(
        {
            "protocol": PROTOCOL_NAME,
            "n_classes": config.n_classes,
            "labels": list(config.labels),
            "sample_rate": config.sample_rate_hz,
        }
    )

    first_response = True
    while True:
        line = rfile.readline()
        if not line:
            return  # transport closed: clean shutdown
        pending_lines = [line]
        if config.batch_cap > 1:
            pending_lines += _drain_ready_lines(rfile, config.batch_cap - 1)

        parsed: list[tuple] = []  # (req_id, samples) or None for failures
        for raw in pending_lines:
            text = raw.decode("utf-8", errors="replace").strip()
            if not text:
                continue
            try:
                parsed.append(_parse_request(text, config))
            except _RequestError as exc:
                send(_error(exc.req_id, exc.message))
            except ValueError as exc:
                send(_error(None, str(exc)))

        if not parsed:
            continue

        if config.predict_batch is not None and len(parsed) > 1:
            try:
                raw_batch = config.predict_batch(
                    [s for _, s in parsed], config.sample_rate_hz
                )
                outcomes = [(rid, raw) for (rid, _), raw in zip(parsed, raw_batch)]
            except Exception as exc:
                for rid, _ in parsed:
                    send(_error(rid, f"prediction failed: {exc}"))
                continue
        else:
            outcomes = []
            for rid, samples in parsed:
                try:
                    outcomes.append((rid, config.predict(samples, config.sample_rate_hz)))
                except Exception as exc:
                    send(_error(rid, f"prediction failed: {exc}"))

        for rid, raw in outcomes:
            try:
                reply = {"id": rid, "probs": _normalized(raw, config.n_classes)}
            except ValueError as exc:
                send(_error(rid, str(exc)))
                continue
            if first_response:
                reply["labels"] = list(config.labels)
                first_response = False
            send(reply)


def serve(config: AdapterConfig, transport: str = "stdio") -> None:
    """Serve on "stdio" or "tcp:HOST:PORT" (one connection at a time)."""
    if transport == "stdio":
        serve_stream(config, sys.stdin.buffer, sys.stdout.buffer)
        return
    if transport.startswith("tcp:"):
        _, host, port = transport.split(":", 2)
        server = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        server.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        server.bind((host, int(port)))
        server.listen(1)
        try:
            while True:
                conn, _ = server.accept()
                with conn:
                    f = conn.makefile("rwb")
                    try:
                        serve_stream(config, f, f)
                    except (BrokenPipeError, ConnectionResetError):
                        pass
        finally:
            server.close()
        return
    raise ValueError(f"transport must be stdio or tcp:HOST:PORT, got {transport!r}")


def _resolve(ref: str):
    module_name, sep, attr = ref.partition(":")
    if not sep:
        raise ValueError(f"predict reference must be module:attr, got {ref!r}")
    return getattr(importlib.import_module(module_name), attr)


def config_from_dict(payload: dict) -> tuple[AdapterConfig, str]:
    """Build (config, transport) from the JSON config file schema:

    {"transport": "stdio" | "tcp:host:port",
     "predict": "module:callable",
     "predict_args": {...},          # optional; makes predict a factory
     "labels": [...], "sample_rate_hz": int,
     "batch_cap": 1, "resample": false}
    """
    target = _resolve(payload["predict"])
    if "predict_args" in payload:
        target = target(**payload["predict_args"])
    predict_batch = None
    if "predict_batch" in payload:
        predict_batch = _resolve(payload["predict_batch"])
    config = AdapterConfig(
        labels=tuple(payload["labels"]),
        sample_rate_hz=int(payload["sample_rate_hz"]),
        predict=target,
        batch_cap=int(payload.get("batch_cap", 1)),
        resample=bool(payload.get("resample", False)),
        predict_batch=predict_batch,
    )
    return config, payload.get("transport", "stdio")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="freqsift-adapter",
        description="Serve an audio classifier over the freqsift-oracle/1 protocol.",
    )
    parser.add_argument("--config", required=True, help="adapter JSON config file")
    parser.add_argument("--transport", help="override the config transport")
    args = parser.parse_args(argv)
    with open(args.config, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    config, transport = config_from_dict(payload)
    serve(config, args.transport or transport)
    return 0


if __name__ == "__main__":
    sys.exit(main())
