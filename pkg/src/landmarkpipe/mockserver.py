"""Local deterministic stand-in for the chat/embedding endpoints.

Speaks the same wire protocol as the gateway and answers from template rules:
selection prompts get "[1]", rewrite prompts get a word-dropout variant keyed
by a per-prompt call counter, generation prompts get the primary document
blended with its (per-variant) unlabeled references, and labeling prompts
reason then tag with the first reference label. Counters make repeated
identical requests differ deterministically — for a fixed request sequence
two runs produce byte-identical outputs.

A transcript fixture directory can override rules: exact request hashes found
there are served verbatim. Embeddings are seeded hash projections (32-dim by
default): stable per text, no semantics implied.

Deliberate fault injection: prompts containing [[FAIL:n]] return n transient
503s before succeeding; every 11th generation call tags an out-of-catalog
label and every 13th returns unparseable text, so failure accounting paths
stay exercised end to end.
"""

from __future__ import annotations

import hashlib
import json
import re
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import numpy as np

from landmarkpipe.errors import UserError
from landmarkpipe.llmgate import ChatRequest, request_hash

_FAIL_MARKER = re.compile(r"\[\[FAIL:(\d+)\]\]")
_LABEL_LINE = re.compile(r"Label: \[([^\]]*)\]")

EMBED_DIM = 32
BAD_LABEL_EVERY = 11
GARBLE_EVERY = 13


def chat_request_from_body(body: dict) -> ChatRequest:
    return ChatRequest(
        model=body.get("model", "mock"),
        messages=tuple((m["role"], m["content"]) for m in body.get("messages", [])),
        temperature=float(body.get("temperature", 0.0)),
        stop=tuple(body["stop"]) if body.get("stop") else None,
        max_tokens=body.get("max_tokens"),
    )


def hash_embedding(text: str, dim: int = EMBED_DIM) -> list[float]:
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    seed = int.from_bytes(digest[:8], "big")
    vec = np.random.default_rng(seed).standard_normal(dim)
    vec /= np.linalg.norm(vec)
    return [float(v) for v in vec]


def _between(text: str, start_marker: str, end_marker: str | None) -> str:
    start = text.find(start_marker)
    if start < 0:
        return ""
    start += len(start_marker)
    if end_marker is None:
        return text[start:].strip()
    end = text.find(end_marker, start)
    return text[start:end].strip() if end >= 0 else text[start:].strip()


def _mutate_types(text: str, phase: int, period: int) -> str:
    """Deterministic word-substitution cipher: roughly 1/period of the word
    types get a phase-coded replacement, so different phases produce variants
    with controlled vocabulary overlap (the knob the diversity checks need)."""
    out = []
    for word in text.split(" "):
        h = int.from_bytes(hashlib.sha256(word.lower().encode("utf-8")).digest()[:4], "big")
        if word and (h + phase) % period == 0:
            out.append(f"{word}x{phase}")
        else:
            out.append(word)
    return " ".join(out)


class RuleEngine:
    """Stateful deterministic responses for the known prompt families."""

    def __init__(self):
        self._counters: dict[str, int] = {}
        self._rag_calls = 0
        self._lock = threading.Lock()

    def _bump(self, key: str) -> int:
        with self._lock:
            count = self._counters.get(key, 0)
            self._counters[key] = count + 1
            return count

    def respond(self, content: str, digest: str) -> str | None:
        """Response text, or None to signal an injected transient failure."""
        fail = _FAIL_MARKER.search(content)
        if fail:
            budget = int(fail.group(1))
            if self._bump("fail:" + digest) < budget:
                return None
            content = _FAIL_MARKER.sub("", content)

        if "return only the index number" in content:
            return "[1]"

        if "*Original Text:" in content:
            original = _between(content, "*Original Text:", "Rewritten Text:")
            phase = self._bump("rewrite:" + digest)
            return _mutate_types(original, phase, period=12)

        if "*Primary Document for Augmentation:" in content:
            with self._lock:
                call = self._rag_calls
                self._rag_calls += 1
            primary = _between(content, "*Primary Document for Augmentation:", "\n\n*Task:")
            unlabeled = _between(content, "*Reference Unlabeled Documents:", "\n\n*Primary Document")
            labels = _LABEL_LINE.findall(_between(content, "*Reference Labeled Documents:", "\n\n*Reference Unlabeled"))
            label = labels[0].split(",")[0].strip() if labels else "unknown"
            if call % GARBLE_EVERY == GARBLE_EVERY - 1:
                return "the model rambled and produced nothing parseable here"
            if call % BAD_LABEL_EVERY == BAD_LABEL_EVERY - 1:
                label = f"figment-{call}"
            body = _mutate_types(f"{primary} {unlabeled}".strip(), call, period=3)
            return f"Content: {body}\nLabel: [{label}]"

        if "*Target Document for Prediction:" in content:
            labels = _LABEL_LINE.findall(_between(content, "*Reference Labeled Documents:", "*Target Document"))
            label = labels[0] if labels else ""
            return f"Thought: the target document reads like the first reference.\nLabel: [{label}]"

        return content


class _Handler(BaseHTTPRequestHandler):
    def log_message(self, *args):  # silence per-request stderr noise
        pass

    def _send_json(self, payload: dict, status: int = 200) -> None:
        raw = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(raw)))
        self.end_headers()
        self.wfile.write(raw)

    def do_POST(self):
        length = int(self.headers.get("Content-Length", 0))
        try:
            body = json.loads(self.rfile.read(length) or b"{}")
        except json.JSONDecodeError:
            self._send_json({"error": "bad json"}, status=400)
            return
        if self.path.rstrip("/") == "/v1/chat/completions":
            self._chat(body)
        elif self.path.rstrip("/") == "/v1/embeddings":
            self._embeddings(body)
        else:
            self._send_json({"error": f"no route {self.path}"}, status=404)

    def _chat(self, body: dict) -> None:
        try:
            req = chat_request_from_body(body)
        except Exception:
            self._send_json({"error": "malformed chat body"}, status=400)
            return
        digest = request_hash(req)
        fixture = self.server.fixture_response(digest)
        if fixture is not None:
            text = fixture
        else:
            content = req.messages[-1][1]
            text = self.server.rules.respond(content, digest)
            if text is None:
                self._send_json({"error": "injected transient failure"}, status=503)
                return
        if req.stop:
            text = _truncate_at_stop(text, req.stop)
        self._send_json({"choices": [{"index": 0, "message": {"role": "assistant", "content": text}}]})

    def _embeddings(self, body: dict) -> None:
        texts = body.get("input", [])
        if isinstance(texts, str):
            texts = [texts]
        data = [
            {"index": i, "embedding": hash_embedding(t, self.server.embed_dim)}
            for i, t in enumerate(texts)
        ]
        self._send_json({"data": data})


def _truncate_at_stop(text: str, stops) -> str:
    # the cut keeps the stop string, so an answer "ends at" its first "]"
    best = None
    for stop in stops:
        pos = text.find(stop)
        if pos >= 0:
            end = pos + len(stop)
            best = end if best is None else min(best, end)
    return text if best is None else text[:best]


class MockLlmServer:
    """mock endpoint over HTTP; use as a context manager in tests.

    fixture_dir (optional) holds gateway transcripts served verbatim on hash
    match before any rule runs.
    """

    def __init__(self, port: int = 0, fixture_dir: str | Path | None = None, embed_dim: int = EMBED_DIM):
        self.rules = RuleEngine()
        self.embed_dim = embed_dim
        self.fixture_dir = Path(fixture_dir) if fixture_dir else None
        try:
            self._httpd = ThreadingHTTPServer(("127.0.0.1", port), _Handler)
        except OSError as exc:
            raise UserError(f"cannot bind mock server port {port}: {exc}") from exc
        self._httpd.fixture_response = self._fixture_response  # type: ignore[attr-defined]
        self._httpd.rules = self.rules  # type: ignore[attr-defined]
        self._httpd.embed_dim = self.embed_dim  # type: ignore[attr-defined]
        self._thread: threading.Thread | None = None

    def _fixture_response(self, digest: str) -> str | None:
        if self.fixture_dir is None:
            return None
        path = self.fixture_dir / f"{digest}.json"
        if not path.exists():
            return None
        with open(path, encoding="utf-8") as fh:
            return json.load(fh).get("response_text")

    @property
    def port(self) -> int:
        return self._httpd.server_address[1]

    @property
    def base_url(self) -> str:
        return f"http://127.0.0.1:{self.port}"

    def start(self) -> "MockLlmServer":
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)

    def __enter__(self) -> "MockLlmServer":
        return self.start()

    def __exit__(self, *exc):
        self.stop()

    def serve_forever(self) -> None:
        """Blocking run for the CLI; SIGINT/SIGTERM shut down cleanly."""
        import signal

        def handle(_sig, _frame):
            raise KeyboardInterrupt

        signal.signal(signal.SIGTERM, handle)
        try:
            self._httpd.serve_forever()
        except KeyboardInterrupt:
            pass
        finally:
            self._httpd.server_close()
