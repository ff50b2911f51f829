"""Protocol conformance checks, replayable against any freqsift-oracle/1
server (not just the reference adapter).

Usage:
    freqsift-adapter-conformance --command "python -m my_adapter ..."
    freqsift-adapter-conformance --tcp host:port

Each check prints one ok/FAIL line; the exit code is the number of failed
checks.
"""

from __future__ import annotations

import argparse
import base64
import json
import shlex
import socket
import subprocess
import sys
import uuid
from dataclasses import dataclass

import numpy as np

PROTOCOL_NAME = "freqsift-oracle/1"


@dataclass
class CheckResult:
    name: str
    ok: bool
    detail: str = ""


class _Session:
    """One live connection to the server under test."""

    def __init__(self, command=None, tcp=None, timeout=10.0):
        self.timeout = timeout
        if command is not None:
            self.proc = subprocess.Popen(
                command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL,
            )
            self._rfile = self.proc.stdout
            self._wfile = self.proc.stdin
            self.sock = None
        else:
            host, _, port = tcp.rpartition(":")
            self.sock = socket.create_connection((host, int(port)), timeout=timeout)
            self.sock.settimeout(timeout)
            f = self.sock.makefile("rwb")
            self._rfile = f
            self._wfile = f
            self.proc = None

    def send_line(self, text: str) -> None:
        self._wfile.write((text + "\n").encode("utf-8"))
        self._wfile.flush()

    def send(self, obj: dict) -> None:
        self.send_line(json.dumps(obj))

    def recv(self) -> dict:
        line = self._rfile.readline()
        if not line:
            raise EOFError("server closed the stream")
        return json.loads(line)

    def close(self) -> int | None:
        try:
            self._wfile.close()
        except Exception:
            pass
        if self.proc is not None:
            try:
                return self.proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self.proc.kill()
                return None
        if self.sock is not None:
            self.sock.close()
        return None


def _request(sample_rate: int, samples: np.ndarray, req_id: str | None = None) -> dict:
    return {
        "id": req_id or f"conf-{uuid.uuid4().hex[:8]}",
        "sample_rate": sample_rate,
        "samples_b64": base64.b64encode(
            np.asarray(samples, dtype="<f4").tobytes()
        ).decode("ascii"),
    }


def _valid_probs(probs, n_classes: int) -> bool:
    arr = np.asarray(probs, dtype=np.float64)
    return (
        arr.ndim == 1
        and arr.size == n_classes
        and bool(np.all(arr >= -1e-9))
        and abs(float(arr.sum()) - 1.0) < 1e-6
    )


def run_conformance(command=None, tcp=None, timeout=10.0) -> list[CheckResult]:
    results: list[CheckResult] = []

    def check(name: str, ok: bool, detail: str = ""):
        results.append(CheckResult(name, bool(ok), detail))

    session = _Session(command=command, tcp=tcp, timeout=timeout)
    try:
        # 1. handshake shape
        try:
            hs = session.recv()
        except Exception as exc:
            check("handshake-received", False, str(exc))
            return results
        check("handshake-received", True)
        check(
            "handshake-protocol",
            hs.get("protocol") == PROTOCOL_NAME,
            f"got {hs.get('protocol')!r}",
        )
        labels = hs.get("labels") or []
        n_classes = hs.get("n_classes")
        rate = hs.get("sample_rate")
        check("handshake-labels", isinstance(labels, list) and len(labels) >= 2)
        check("handshake-n-classes", n_classes == len(labels), f"{n_classes} vs {len(labels)}")
        check("handshake-sample-rate", isinstance(rate, int) and rate > 0)
        if not isinstance(rate, int) or rate <= 0:
            return results

        rng = np.random.default_rng(0)

        # 2. single valid request
        req = _request(rate, rng.uniform(-0.5, 0.5, 256))
        session.send(req)
        resp = session.recv()
        check("response-id-matches", resp.get("id") == req["id"], f"got {resp.get('id')!r}")
        check(
            "response-probs-valid",
            "probs" in resp and _valid_probs(resp["probs"], len(labels)),
            f"got {resp.get('probs')!r}",
        )

        # 3. pipelined batch: every id answered exactly once
        reqs = [_request(rate, rng.uniform(-0.5, 0.5, 128)) for _ in range(5)]
        for r in reqs:
            session.send(r)
        got = {}
        for _ in reqs:
            resp = session.recv()
            got[resp.get("id")] = resp
        check(
            "batch-ids-complete",
            set(got) == {r["id"] for r in reqs},
            f"missing {sorted({r['id'] for r in reqs} - set(got))}",
        )
        check(
            "batch-all-valid",
            all("probs" in r and _valid_probs(r["probs"], len(labels)) for r in got.values()),
        )

        # 4. wrong sample rate: per-id error, loop survives
        bad_rate = _request(rate + 1, rng.uniform(-0.5, 0.5, 64))
        session.send(bad_rate)
        resp = session.recv()
        check(
            "wrong-rate-error",
            resp.get("id") == bad_rate["id"] and "error" in resp,
            f"got {resp!r}",
        )

        # 5. malformed JSON: error response, loop survives
        session.send_line("this is not json")
        resp = session.recv()
        check("malformed-json-error", "error" in resp, f"got {resp!r}")

        # 6. missing fields: per-id error
        session.send({"id": "incomplete-1", "sample_rate": rate})
        resp = session.recv()
        check(
            "missing-field-error",
            resp.get("id") == "incomplete-1" and "error" in resp,
            f"got {resp!r}",
        )

        # 7. unknown extra fields are tolerated
        extra = _request(rate, rng.uniform(-0.5, 0.5, 64))
        extra["x-vendor-extension"] = {"nested": True}
        session.send(extra)
        resp = session.recv()
        check(
            "extra-fields-tolerated",
            resp.get("id") == extra["id"] and "probs" in resp,
            f"got {resp!r}",
        )

        # 8. loop still alive after all the abuse
        final = _request(rate, rng.uniform(-0.5, 0.5, 64))
        session.send(final)
        resp = session.recv()
        check("loop-survives-abuse", resp.get("id") == final["id"] and "probs" in resp)
    finally:
        exit_code = session.close()
        if command is not None:
            results.append(
                CheckResult(
                    "clean-shutdown-on-eof",
                    exit_code == 0,
                    f"exit code {exit_code}",
                )
            )
    return results


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="freqsift-adapter-conformance")
    group = parser.add_mutually_exclusive_group(required=True)
    group.add_argument("--command", help="adapter command line (stdio transport)")
    group.add_argument("--tcp", help="host:port of a running adapter")
    parser.add_argument("--timeout", type=float, default=10.0)
    args = parser.parse_args(argv)

    command = shlex.split(args.command) if args.command else None
    results = run_conformance(command=command, tcp=args.tcp, timeout=args.timeout)
    failed = 0
    for r in results:
        status = "ok  " if r.ok else "FAIL"
        detail = f"  ({r.detail})" if r.detail and not r.ok else ""
        print(f"{status} {r.name}{detail}")
        failed += 0 if r.ok else 1
    print(f"{len(results) - failed}/{len(results)} conformance checks passed")
    return failed


if __name__ == "__main__":
    sys.exit(main())
