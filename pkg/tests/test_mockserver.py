from __future__ import annotations

import json

import numpy as np
import pytest
import requests

from landmarkpipe.errors import UserError
from landmarkpipe.llmgate import ChatRequest, request_hash
from landmarkpipe.mockserver import MockLlmServer, hash_embedding
from landmarkpipe.prompts import RAG_GENERATE_TEMPLATE, REWRITE_TEMPLATE


def _chat(base_url, content, **kwargs):
    body = {"model": "m", "messages": [{"role": "user", "content": content}], "temperature": 0.0}
    body.update(kwargs)
    resp = requests.post(f"{base_url}/v1/chat/completions", json=body, timeout=10)
    resp.raise_for_status()
    return resp.json()["choices"][0]["message"]["content"]


def test_echo_and_unknown_route(mock_server):
    assert _chat(mock_server.base_url, "just echo this") == "just echo this"
    resp = requests.post(f"{mock_server.base_url}/v1/nothing", json={}, timeout=10)
    assert resp.status_code == 404


def test_pick_rule(mock_server):
    prompt = "Documents...\n\nreturn only the index number of your selection, in format such as [0], [1], etc."
    assert _chat(mock_server.base_url, prompt) == "[1]"


def test_rewrite_rule_varies_by_call():
    with MockLlmServer() as server:
        prompt = REWRITE_TEMPLATE.format(document="one two three four five six seven eight")
        first = _chat(server.base_url, prompt)
        second = _chat(server.base_url, prompt)
        assert first != second  # per-hash counter moves
        assert "one" in first or "one" in second


def test_rewrite_rule_deterministic_across_server_instances():
    prompt = REWRITE_TEMPLATE.format(document="alpha beta gamma delta epsilon zeta")
    outputs = []
    for _ in range(2):
        with MockLlmServer() as server:
            outputs.append([_chat(server.base_url, prompt) for _ in range(4)])
    assert outputs[0] == outputs[1]


def test_rag_rule_emits_content_label():
    with MockLlmServer() as server:
        prompt = RAG_GENERATE_TEMPLATE.format(
            labels="corn, wheat",
            labeled="some labeled doc\nLabel: [corn]",
            unlabeled="an unlabeled doc",
            document="the primary document body",
        )
        out = _chat(server.base_url, prompt)
        assert out.startswith("Content: ")
        assert "Label: [corn]" in out


def test_cot_rule_uses_first_reference_label(mock_server):
    prompt = (
        "*Reference Labeled Documents:\nref one\nLabel: [gold]\n"
        "*Target Document for Prediction:\nthe target\n\nThought: Label:"
    )
    out = _chat(mock_server.base_url, prompt)
    assert out.startswith("Thought:")
    assert out.endswith("Label: [gold]")


def test_stop_truncation_keeps_stop_string(mock_server):
    out = _chat(mock_server.base_url, "before]middle]after", stop=["]"])
    assert out == "before]"


def test_fail_marker_returns_503_then_recovers():
    with MockLlmServer() as server:
        body = {"model": "m", "messages": [{"role": "user", "content": "[[FAIL:1]]ok now"}], "temperature": 0.0}
        first = requests.post(f"{server.base_url}/v1/chat/completions", json=body, timeout=10)
        assert first.status_code == 503
        second = requests.post(f"{server.base_url}/v1/chat/completions", json=body, timeout=10)
        assert second.status_code == 200
        assert second.json()["choices"][0]["message"]["content"] == "ok now"


def test_embeddings_deterministic(mock_server):
    body = {"model": "e", "input": ["alpha", "beta"]}
    a = requests.post(f"{mock_server.base_url}/v1/embeddings", json=body, timeout=10).json()
    b = requests.post(f"{mock_server.base_url}/v1/embeddings", json=body, timeout=10).json()
    va = [row["embedding"] for row in sorted(a["data"], key=lambda r: r["index"])]
    vb = [row["embedding"] for row in sorted(b["data"], key=lambda r: r["index"])]
    assert va == vb
    assert len(va[0]) == 32
    assert va[0] == hash_embedding("alpha")
    assert np.linalg.norm(va[0]) == pytest.approx(1.0)


def test_fixture_transcripts_override_rules(tmp_path):
    req = ChatRequest.user("m", "would normally echo")
    (tmp_path / f"{request_hash(req)}.json").write_text(json.dumps({"response_text": "canned"}), encoding="utf-8")
    with MockLlmServer(fixture_dir=tmp_path) as server:
        assert _chat(server.base_url, "would normally echo") == "canned"
        assert _chat(server.base_url, "not recorded") == "not recorded"


def test_port_in_use_is_user_error(mock_server):
    with pytest.raises(UserError, match="port"):
        MockLlmServer(port=mock_server.port)


def test_bad_json_body(mock_server):
    resp = requests.post(
        f"{mock_server.base_url}/v1/chat/completions",
        data="{not json",
        headers={"Content-Type": "application/json"},
        timeout=10,
    )
    assert resp.status_code == 400


def test_cli_server_shuts_down_on_signal():
    import signal
    import socket
    import subprocess
    import sys
    import time

    with socket.socket() as probe:
        probe.bind(("127.0.0.1", 0))
        port = probe.getsockname()[1]
    proc = subprocess.Popen(
        [sys.executable, "-m", "landmarkpipe.cli", "mock-serve", "--port", str(port)],
        stdout=subprocess.PIPE,
        stderr=subprocess.STDOUT,
        text=True,
    )
    try:
        deadline = time.time() + 10
        while time.time() < deadline:
            try:
                requests.post(f"http://127.0.0.1:{port}/v1/embeddings", json={"input": ["x"]}, timeout=1)
                break
            except requests.RequestException:
                time.sleep(0.1)
        else:
            pytest.fail("mock server never came up")
        proc.send_signal(signal.SIGTERM)
        assert proc.wait(timeout=10) == 0
    finally:
        if proc.poll() is None:
            proc.kill()
