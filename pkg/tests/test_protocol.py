"""Client-side wire protocol tests against throwaway in-test servers."""

import json
import socket
import sys
import textwrap
import threading

import numpy as np
import pytest

from freqsift import BackendError, OracleFailure, Signal, classify, classify_batch, connect_external
from freqsift.protocol import decode_samples, encode_samples, parse_endpoint
from freqsift.errors import InvalidParameterError


HANDSHAKE = {
    "protocol": "freqsift-oracle/1",
    "n_classes": 2,
    "labels": ["real", "fake"],
    "sample_rate": 8000,
}


def serve_once(conn_file, behavior):
    """Read requests forever, answering per ``behavior(request) -> dict``."""
    conn_file.write((json.dumps(HANDSHAKE) + "\n").encode())
    conn_file.flush()
    for raw in conn_file:
        req = json.loads(raw)
        reply = behavior(req)
        if reply is None:
            continue  # simulate a dropped response
        conn_file.write((json.dumps(reply) + "\n").encode())
        conn_file.flush()


@pytest.fixture
def tcp_server():
    """Start a single-connection fake oracle; yields (port, set_behavior)."""
    sock = socket.socket()
    sock.bind(("127.0.0.1", 0))
    sock.listen(1)
    port = sock.getsockname()[1]
    state = {"behavior": lambda req: {"id": req["id"], "probs": [0.75, 0.25]}}

    def run():
        conn, _ = sock.accept()
        f = conn.makefile("rwb")
        try:
            serve_once(f, lambda req: state["behavior"](req))
        except (BrokenPipeError, ConnectionResetError, ValueError, OSError):
            pass

    thread = threading.Thread(target=run, daemon=True)
    thread.start()
    yield port, state
    sock.close()


def test_sample_codec_round_trip(rng):
    x = rng.uniform(-1, 1, 333).astype(np.float32)
    assert np.array_equal(decode_samples(encode_samples(x)), x)


def test_parse_endpoint():
    ep = parse_endpoint("tcp:localhost:9000")
    assert (ep.transport, ep.host, ep.port) == ("tcp", "localhost", 9000)
    ep = parse_endpoint("stdio:python3 -m something --flag x")
    assert ep.command[0] == "python3"
    with pytest.raises(InvalidParameterError):
        parse_endpoint("http://nope")
    with pytest.raises(InvalidParameterError):
        parse_endpoint("stdio:")


def test_tcp_classify(tcp_server):
    port, _ = tcp_server
    handle = connect_external("ext", f"tcp:127.0.0.1:{port}", timeout_s=5)
    assert handle.labels == ("real", "fake")
    assert handle.expected_sample_rate_hz == 8000
    dist = classify(handle, Signal(np.zeros(32), 8000))
    assert np.allclose(dist.probs, [0.75, 0.25])
    handle.backend.close()


def test_tcp_batch_pipelined_and_id_matched(tcp_server):
    port, state = tcp_server
    # answer with a probability derived from the decoded first sample, so a
    # shuffled/misrouted response would be detected
    def behavior(req):
        first = float(decode_samples(req["samples_b64"])[0])
        return {"id": req["id"], "probs": [first, 1 - first]}

    state["behavior"] = behavior
    handle = connect_external("ext", f"tcp:127.0.0.1:{port}", timeout_s=5, max_inflight=4)
    values = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7]
    sigs = [Signal(np.full(16, v, dtype=np.float32), 8000) for v in values]
    out = classify_batch(handle, sigs)
    for v, dist in zip(values, out):
        assert dist.probs[0] == pytest.approx(v, abs=1e-7)
    handle.backend.close()


def test_out_of_order_responses_are_id_matched():
    # server withholds each first response until a second request arrives,
    # then answers the pair in reverse; the client must re-match by id
    sock = socket.socket()
    sock.bind(("127.0.0.1", 0))
    sock.listen(1)
    port = sock.getsockname()[1]

    def run():
        conn, _ = sock.accept()
        f = conn.makefile("rwb")
        f.write((json.dumps(HANDSHAKE) + "\n").encode())
        f.flush()
        held = []
        for raw in f:
            req = json.loads(raw)
            first = float(decode_samples(req["samples_b64"])[0])
            held.append({"id": req["id"], "probs": [first, 1 - first]})
            if len(held) == 2:
                for reply in reversed(held):
                    f.write((json.dumps(reply) + "\n").encode())
                f.flush()
                held = []

    threading.Thread(target=run, daemon=True).start()
    handle = connect_external("ext", f"tcp:127.0.0.1:{port}", timeout_s=5, max_inflight=2)
    values = [0.2, 0.7, 0.4, 0.9]
    sigs = [Signal(np.full(8, v, dtype=np.float32), 8000) for v in values]
    out = classify_batch(handle, sigs)
    for v, dist in zip(values, out):
        assert dist.probs[0] == pytest.approx(v, abs=1e-7)
    handle.backend.close()
    sock.close()


def test_tcp_per_element_error(tcp_server):
    port, state = tcp_server
    calls = {"n": 0}

    def behavior(req):
        calls["n"] += 1
        if calls["n"] == 2:
            return {"id": req["id"], "error": "synthetic failure"}
        return {"id": req["id"], "probs": [1.0, 0.0]}

    state["behavior"] = behavior
    handle = connect_external("ext", f"tcp:127.0.0.1:{port}", timeout_s=5, max_inflight=1)
    sigs = [Signal(np.zeros(8), 8000)] * 3
    out = classify_batch(handle, sigs)
    assert not isinstance(out[0], OracleFailure)
    assert isinstance(out[1], OracleFailure)
    assert "synthetic failure" in out[1].message
    assert not isinstance(out[2], OracleFailure)
    handle.backend.close()


def test_timeout_is_backend_error(tcp_server):
    port, state = tcp_server
    state["behavior"] = lambda req: None  # never answer
    handle = connect_external("ext", f"tcp:127.0.0.1:{port}", timeout_s=0.3)
    with pytest.raises(BackendError, match="timed out"):
        classify(handle, Signal(np.zeros(8), 8000))
    handle.backend.close()


def test_malformed_probs_rejected(tcp_server):
    port, state = tcp_server
    state["behavior"] = lambda req: {"id": req["id"], "probs": [3.0, 1.0]}
    handle = connect_external("ext", f"tcp:127.0.0.1:{port}", timeout_s=5)
    with pytest.raises(BackendError, match="sum"):
        classify(handle, Signal(np.zeros(8), 8000))
    handle.backend.close()


def test_bad_handshake_rejected():
    sock = socket.socket()
    sock.bind(("127.0.0.1", 0))
    sock.listen(1)
    port = sock.getsockname()[1]

    def run():
        conn, _ = sock.accept()
        f = conn.makefile("rwb")
        f.write(b'{"protocol": "something-else/9"}\n')
        f.flush()

    threading.Thread(target=run, daemon=True).start()
    with pytest.raises(BackendError, match="handshake"):
        connect_external("ext", f"tcp:127.0.0.1:{port}", timeout_s=5)
    sock.close()


STDIO_SERVER = textwrap.dedent(
    """
    import json, sys, base64
    print(json.dumps({"protocol": "freqsift-oracle/1", "n_classes": 2,
                      "labels": ["a", "b"], "sample_rate": 8000}), flush=True)
    first = True
    for line in sys.stdin:
        req = json.loads(line)
        reply = {"id": req["id"], "probs": [0.9, 0.1]}
        if first:
            reply["labels"] = ["a", "b"]
            first = False
        print(json.dumps(reply), flush=True)
    """
)


def test_stdio_transport(tmp_path):
    script = tmp_path / "server.py"
    script.write_text(STDIO_SERVER)
    handle = connect_external("ext", f"stdio:{sys.executable} {script}", timeout_s=10)
    dist = classify(handle, Signal(np.zeros(32), 8000))
    assert np.allclose(dist.probs, [0.9, 0.1])
    dist = classify(handle, Signal(np.ones(32) * 0.5, 8000))
    assert np.allclose(dist.probs, [0.9, 0.1])
    handle.backend.close()
