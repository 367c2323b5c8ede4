from __future__ import annotations

import json

import numpy as np
import pytest

from landmarkpipe.errors import GatewayError, ReplayMissError, UserError
from landmarkpipe.llmgate import ChatRequest, Gateway, GatewayConfig, embed_request_hash, request_hash


def _gateway(mock_server, **overrides) -> Gateway:
    cfg = GatewayConfig(
        chat_base_url=mock_server.base_url,
        embed_base_url=mock_server.base_url,
        backoff_base=0.0,
    )
    for key, value in overrides.items():
        setattr(cfg, key, value)
    return Gateway(cfg)


def test_chat_request_validation():
    with pytest.raises(UserError):
        ChatRequest(model="m", messages=())
    with pytest.raises(UserError):
        ChatRequest(model="m", messages=(("robot", "hi"),))
    with pytest.raises(UserError):
        ChatRequest.user("m", "hi", temperature=-0.1)
    with pytest.raises(UserError):
        ChatRequest.user("m", "hi", max_tokens=0)


def test_request_hash_sensitivity():
    a = ChatRequest.user("m", "hello", temperature=0.3)
    same = ChatRequest.user("m", "hello", temperature=0.3)
    assert request_hash(a) == request_hash(same)
    assert request_hash(a) != request_hash(ChatRequest.user("m", "hello", temperature=0.4))
    assert request_hash(a) != request_hash(ChatRequest.user("m2", "hello", temperature=0.3))
    assert request_hash(a) != request_hash(ChatRequest.user("m", "hello", temperature=0.3, stop=("]",)))


def test_chat_echo_and_stop(mock_server):
    gw = _gateway(mock_server)
    assert gw.chat(ChatRequest.user("m", "plain echo please")) == "plain echo please"
    # response ends at the first stop occurrence
    assert gw.chat(ChatRequest.user("m", "abc]def]tail", stop=("]",))) == "abc]"


def test_replay_identity(tmp_path):
    digest = request_hash(ChatRequest.user("m", "anything"))
    (tmp_path / f"{digest}.json").write_text(json.dumps({"response_text": "ok"}), encoding="utf-8")
    gw = Gateway(GatewayConfig(mode="replay", transcript_dir=tmp_path))
    assert gw.chat(ChatRequest.user("m", "anything")) == "ok"
    with pytest.raises(ReplayMissError):
        gw.chat(ChatRequest.user("m", "never recorded"))


def test_record_then_replay(tmp_path, mock_server):
    req = ChatRequest.user("m", "record me")
    recorder = _gateway(mock_server, mode="record", transcript_dir=tmp_path)
    live = recorder.chat(req)
    offline = Gateway(GatewayConfig(mode="replay", transcript_dir=tmp_path))
    assert offline.chat(req) == live


def test_retry_then_success(mock_server):
    gw = _gateway(mock_server)
    # two injected 503s, third attempt succeeds
    assert gw.chat(ChatRequest.user("m", "[[FAIL:2]]retry me")) == "retry me"


def test_retries_exhausted(mock_server):
    gw = _gateway(mock_server, max_retries=2)
    with pytest.raises(GatewayError, match="retries exhausted"):
        gw.chat(ChatRequest.user("m", "[[FAIL:99]]never"))


def test_4xx_is_fatal_without_retries(mock_server):
    gw = _gateway(mock_server)
    # unknown route -> 404, which must not be retried
    gw.config.chat_base_url = mock_server.base_url + "/nowhere"
    with pytest.raises(GatewayError, match="404"):
        gw.chat(ChatRequest.user("m", "hi"))


def test_chat_many_preserves_order(mock_server):
    gw = _gateway(mock_server, max_inflight=4)
    reqs = [ChatRequest.user("m", f"echo {i}") for i in range(12)]
    results = gw.chat_many(reqs)
    assert results == [f"echo {i}" for i in range(12)]


def test_request_count_equals_issued(tmp_path, mock_server):
    # record mode leaves one transcript per distinct issued request
    gw = _gateway(mock_server, mode="record", transcript_dir=tmp_path, max_inflight=3)
    reqs = [ChatRequest.user("m", f"distinct {i}") for i in range(9)]
    gw.chat_many(reqs)
    assert len(list(tmp_path.glob("*.json"))) == 9


def test_embed_shapes_and_determinism(mock_server):
    gw = _gateway(mock_server)
    matrix = gw.embed(["alpha", "beta", "alpha"])
    assert matrix.shape == (3, 32)
    assert np.array_equal(matrix[0], matrix[2])
    again = gw.embed(["alpha", "beta", "alpha"])
    assert np.array_equal(matrix, again)
    assert gw.embed([]).shape[0] == 0


def test_embed_replay_fixture(tmp_path):
    digest = embed_request_hash("default-embed", ["a"])
    (tmp_path / f"{digest}.json").write_text(json.dumps({"vectors": [[1.0, 2.0, 3.0, 4.0]]}), encoding="utf-8")
    gw = Gateway(GatewayConfig(mode="replay", transcript_dir=tmp_path))
    first = gw.embed(["a"])
    second = gw.embed(["a"])
    assert first.shape == (1, 4)
    assert np.array_equal(first, second)


def test_embed_dimension_pinned_per_run(tmp_path):
    d1 = embed_request_hash("default-embed", ["a"])
    d2 = embed_request_hash("default-embed", ["b"])
    (tmp_path / f"{d1}.json").write_text(json.dumps({"vectors": [[1.0, 2.0]]}), encoding="utf-8")
    (tmp_path / f"{d2}.json").write_text(json.dumps({"vectors": [[1.0, 2.0, 3.0]]}), encoding="utf-8")
    gw = Gateway(GatewayConfig(mode="replay", transcript_dir=tmp_path))
    gw.embed(["a"])
    with pytest.raises(GatewayError, match="dimension changed"):
        gw.embed(["b"])


def test_embed_precondition_checks(mock_server):
    gw = _gateway(mock_server, embed_batch_cap=2)
    with pytest.raises(UserError, match="cap"):
        gw.embed(["a", "b", "c"])
    gw2 = _gateway(mock_server, embed_token_limit=4)
    with pytest.raises(UserError, match="token limit"):
        gw2.embed(["a text much longer than twelve characters"])


def test_replay_mode_requires_transcripts():
    with pytest.raises(UserError, match="transcript_dir"):
        Gateway(GatewayConfig(mode="replay"))
    with pytest.raises(UserError, match="mode"):
        Gateway(GatewayConfig(mode="banana"))
