"""Single gateway for chat-completion and embedding calls.

Speaks the OpenAI-compatible wire protocol (POST {base}/v1/chat/completions
and {base}/v1/embeddings), retries transient failures with exponential
backoff, and can record every exchange to a transcript directory keyed by a
stable request hash. Replay mode serves those transcripts back byte-identical,
so whole pipeline runs are reproducible offline.

No prompt construction happens here; callers hand in finished messages.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import requests

from landmarkpipe.errors import GatewayError, ReplayMissError, UserError

ROLES = {"system", "user", "assistant"}
RETRYABLE_STATUS = {408, 429}


@dataclass(frozen=True)
class ChatRequest:
    model: str
    messages: tuple[tuple[str, str], ...]
    temperature: float = 0.0
    stop: tuple[str, ...] | None = None
    max_tokens: int | None = None

    def __post_init__(self):
        if not self.messages:
            raise UserError("chat request needs at least one message")
        for role, _ in self.messages:
            if role not in ROLES:
                raise UserError(f"unknown message role {role!r}")
        if self.temperature < 0:
            raise UserError("temperature must be >= 0")
        if self.max_tokens is not None and self.max_tokens <= 0:
            raise UserError("max_tokens must be positive")

    @classmethod
    def user(cls, model: str, content: str, **kwargs) -> "ChatRequest":
        return cls(model=model, messages=(("user", content),), **kwargs)

    def body(self) -> dict:
        payload = {
            "model": self.model,
            "messages": [{"role": r, "content": c} for r, c in self.messages],
            "temperature": self.temperature,
        }
        if self.stop:
            payload["stop"] = list(self.stop)
        if self.max_tokens is not None:
            payload["max_tokens"] = self.max_tokens
        return payload


def request_hash(req: ChatRequest) -> str:
    """Stable digest of everything that determines the response."""
    canonical = json.dumps(
        {
            "model": req.model,
            "messages": list(map(list, req.messages)),
            "temperature": req.temperature,
            "stop": list(req.stop) if req.stop else None,
            "max_tokens": req.max_tokens,
        },
        sort_keys=True,
        ensure_ascii=False,
        separators=(",", ":"),
    )
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def embed_request_hash(model: str, texts: list[str]) -> str:
    canonical = json.dumps(
        {"kind": "embeddings", "model": model, "input": texts},
        sort_keys=True,
        ensure_ascii=False,
        separators=(",", ":"),
    )
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


@dataclass
class Transcript:
    request_hash: str
    response_text: str
    latency_ms: float
    mode: str  # live | replay


def estimate_tokens(text: str) -> int:
    """Cheap pre-check estimate (chars/3); the server stays the backstop."""
    return math.ceil(len(text) / 3)


@dataclass
class GatewayConfig:
    chat_base_url: str | None = None
    chat_api_key: str | None = None
    chat_model: str = "default-model"
    embed_base_url: str | None = None
    embed_api_key: str | None = None
    embed_model: str = "default-embed"
    mode: str = "live"  # live | record | replay
    transcript_dir: str | Path | None = None
    max_retries: int = 5
    backoff_base: float = 0.5
    max_inflight: int = 4
    timeout: float = 120.0
    embed_token_limit: int = 8192
    embed_batch_cap: int = 64

    @classmethod
    def from_env(cls, **overrides) -> "GatewayConfig":
        cfg = cls(
            chat_base_url=os.environ.get("LLM_BASE_URL"),
            chat_api_key=os.environ.get("LLM_API_KEY"),
            embed_base_url=os.environ.get("EMBED_BASE_URL"),
            embed_api_key=os.environ.get("EMBED_API_KEY"),
        )
        for key, value in overrides.items():
            setattr(cfg, key, value)
        return cfg


class Gateway:
    """Shareable client with bounded concurrency and order-preserving batches."""

    def __init__(self, config: GatewayConfig):
        if config.mode not in ("live", "record", "replay"):
            raise UserError(f"unknown gateway mode {config.mode!r}")
        if config.mode in ("record", "replay") and config.transcript_dir is None:
            raise UserError(f"{config.mode} mode needs a transcript_dir")
        self.config = config
        self._embed_dim: int | None = None
        if config.transcript_dir is not None:
            Path(config.transcript_dir).mkdir(parents=True, exist_ok=True)

    # -- transcript store -------------------------------------------------

    def _transcript_path(self, digest: str) -> Path:
        return Path(self.config.transcript_dir) / f"{digest}.json"

    def _load_transcript(self, digest: str) -> dict | None:
        if self.config.transcript_dir is None:
            return None
        path = self._transcript_path(digest)
        if not path.exists():
            return None
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)

    def _store_transcript(self, digest: str, payload: dict) -> None:
        if self.config.transcript_dir is None:
            return
        with open(self._transcript_path(digest), "w", encoding="utf-8") as fh:
            json.dump(payload, fh, ensure_ascii=False, sort_keys=True)

    # -- HTTP with retry ---------------------------------------------------

    def _post(self, base_url: str, api_key: str | None, route: str, body: dict) -> dict:
        if not base_url:
            raise UserError(f"no endpoint configured for {route}")
        url = base_url.rstrip("/") + route
        headers = {"Content-Type": "application/json"}
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        last_error: Exception | None = None
        for attempt in range(self.config.max_retries + 1):
            if attempt:
                time.sleep(self.config.backoff_base * (2 ** (attempt - 1)))
            try:
                resp = requests.post(url, json=body, headers=headers, timeout=self.config.timeout)
            except requests.RequestException as exc:
                last_error = exc
                continue
            if resp.status_code == 200:
                try:
                    return resp.json()
                except ValueError as exc:
                    raise GatewayError(f"{route}: response is not JSON: {exc}") from exc
            if resp.status_code in RETRYABLE_STATUS or resp.status_code >= 500:
                last_error = GatewayError(f"{route}: HTTP {resp.status_code}")
                continue
            raise GatewayError(f"{route}: HTTP {resp.status_code}: {resp.text[:200]}")
        raise GatewayError(f"{route}: retries exhausted ({last_error})")

    # -- chat ---------------------------------------------------------------

    def chat(self, req: ChatRequest) -> str:
        """First-choice message content for the request."""
        digest = request_hash(req)
        stored = self._load_transcript(digest)
        if self.config.mode == "replay":
            if stored is None:
                raise ReplayMissError(f"no transcript for request {digest[:12]}…")
            return stored["response_text"]
        if stored is not None and self.config.mode == "record":
            return stored["response_text"]

        started = time.monotonic()
        payload = self._post(self.config.chat_base_url, self.config.chat_api_key, "/v1/chat/completions", req.body())
        latency_ms = (time.monotonic() - started) * 1000.0
        try:
            text = payload["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise GatewayError(f"malformed chat response: {exc!r}") from exc
        if not isinstance(text, str):
            raise GatewayError("malformed chat response: content is not a string")
        if self.config.mode == "record":
            self._store_transcript(
                digest,
                {"kind": "chat", "request": req.body(), "response_text": text, "latency_ms": latency_ms, "mode": "live"},
            )
        return text

    def chat_many(self, requests_: list[ChatRequest]) -> list[str | GatewayError]:
        """Issue up to max_inflight requests at once; results keyed by index."""
        results: list[str | GatewayError] = [GatewayError("not attempted")] * len(requests_)

        def run(i: int, req: ChatRequest):
            try:
                results[i] = self.chat(req)
            except GatewayError as exc:
                results[i] = exc

        if self.config.max_inflight <= 1 or len(requests_) <= 1:
            for i, req in enumerate(requests_):
                run(i, req)
        else:
            with ThreadPoolExecutor(max_workers=self.config.max_inflight) as pool:
                futures = [pool.submit(run, i, req) for i, req in enumerate(requests_)]
                for fut in futures:
                    fut.result()
        return results

    # -- embeddings ----------------------------------------------------------

    def embed(self, texts: list[str]) -> np.ndarray:
        """One row per input text, order preserved, dimension pinned per run."""
        if len(texts) > self.config.embed_batch_cap:
            raise UserError(f"embedding batch of {len(texts)} exceeds cap {self.config.embed_batch_cap}")
        for i, text in enumerate(texts):
            if estimate_tokens(text) > self.config.embed_token_limit:
                raise UserError(f"text {i} exceeds the embedding token limit (~{self.config.embed_token_limit} tokens)")
        if not texts:
            return np.zeros((0, self._embed_dim or 0), dtype=np.float64)

        digest = embed_request_hash(self.config.embed_model, texts)
        stored = self._load_transcript(digest)
        if self.config.mode == "replay":
            if stored is None:
                raise ReplayMissError(f"no transcript for embedding request {digest[:12]}…")
            return self._check_matrix(np.asarray(stored["vectors"], dtype=np.float64), len(texts))
        if stored is not None and self.config.mode == "record":
            return self._check_matrix(np.asarray(stored["vectors"], dtype=np.float64), len(texts))

        body = {"model": self.config.embed_model, "input": texts}
        started = time.monotonic()
        payload = self._post(self.config.embed_base_url, self.config.embed_api_key, "/v1/embeddings", body)
        latency_ms = (time.monotonic() - started) * 1000.0
        try:
            data = sorted(payload["data"], key=lambda item: item.get("index", 0))
            vectors = [item["embedding"] for item in data]
        except (KeyError, TypeError) as exc:
            raise GatewayError(f"malformed embeddings response: {exc!r}") from exc
        if len(vectors) != len(texts):
            raise GatewayError(f"embeddings response has {len(vectors)} rows for {len(texts)} inputs")
        matrix = self._check_matrix(np.asarray(vectors, dtype=np.float64), len(texts))
        if self.config.mode == "record":
            self._store_transcript(
                digest,
                {"kind": "embeddings", "model": self.config.embed_model, "vectors": matrix.tolist(), "latency_ms": latency_ms, "mode": "live"},
            )
        return matrix

    def _check_matrix(self, matrix: np.ndarray, n_rows: int) -> np.ndarray:
        if matrix.ndim != 2 or matrix.shape[0] != n_rows:
            raise GatewayError(f"embedding matrix has shape {matrix.shape}, expected ({n_rows}, D)")
        if self._embed_dim is None:
            self._embed_dim = int(matrix.shape[1])
        elif matrix.shape[1] != self._embed_dim:
            raise GatewayError(f"embedding dimension changed mid-run: {matrix.shape[1]} vs {self._embed_dim}")
        return matrix
