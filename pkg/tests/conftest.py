from __future__ import annotations

import numpy as np
import pytest

from landmarkpipe.config import resolve_builtin
from landmarkpipe.corpus import Corpus, Document, LabelCatalog, load_corpus, split_corpus
from landmarkpipe.errors import GatewayError
from landmarkpipe.llmgate import Gateway, GatewayConfig
from landmarkpipe.mockserver import MockLlmServer


def make_blobs(n=600, d=16, k=6, seed=42, scale=10.0, std=1.0):
    """Well-separated Gaussian blobs: unit-direction centers at radius `scale`."""
    rng = np.random.default_rng(seed)
    centers = rng.normal(size=(k, d))
    centers /= np.linalg.norm(centers, axis=1, keepdims=True)
    centers *= scale
    labels = np.repeat(np.arange(k), n // k)
    X = centers[labels] + rng.normal(scale=std, size=(n, d))
    return X, labels


@pytest.fixture(scope="session")
def blobs6():
    return make_blobs()


@pytest.fixture(scope="session")
def mock_server():
    with MockLlmServer() as server:
        yield server


@pytest.fixture()
def mock_gateway(mock_server):
    return Gateway(
        GatewayConfig(
            chat_base_url=mock_server.base_url,
            embed_base_url=mock_server.base_url,
            chat_model="mock-chat",
            embed_model="mock-embed",
            backoff_base=0.0,
            max_inflight=1,
        )
    )


@pytest.fixture(scope="session")
def reuters_catalog():
    return LabelCatalog.from_file(resolve_builtin("builtin:reuters"))


@pytest.fixture(scope="session")
def wos_catalog():
    return LabelCatalog.from_file(resolve_builtin("builtin:wos"))


@pytest.fixture(scope="session")
def fixture_corpus():
    corpus = load_corpus(resolve_builtin("builtin:fixture200"))
    return split_corpus(corpus, (0.5, 0.3, 0.2), seed=7)


def tiny_corpus(texts_labels, scheme="multi_label", split=None):
    docs = [
        Document(id=f"t{i}", text=text, gold_labels=list(labels), split=split)
        for i, (text, labels) in enumerate(texts_labels)
    ]
    return Corpus(documents=docs, name="tiny", label_scheme=scheme)


class FakeGateway:
    """Duck-typed gateway for unit tests: scripted chat, deterministic embed."""

    def __init__(self, responses=None, chat_model="fake", embed_dim=8, fail=False):
        self.responses = list(responses) if responses else []
        self.prompts: list[str] = []
        self.fail = fail
        self.embed_dim = embed_dim
        self.config = GatewayConfig(chat_model=chat_model, embed_model="fake-embed")

    def chat(self, req) -> str:
        prompt = req.messages[-1][1]
        self.prompts.append(prompt)
        if self.fail:
            raise GatewayError("scripted failure")
        if self.responses:
            return self.responses.pop(0)
        return prompt  # echo

    def embed(self, texts):
        from landmarkpipe.mockserver import hash_embedding

        return np.array([hash_embedding(t, self.embed_dim) for t in texts])
