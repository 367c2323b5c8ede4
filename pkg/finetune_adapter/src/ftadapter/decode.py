"""Model backends with bracket-forced decoding.

Every backend's generate() returns text that starts with "[" and ends at the
first "]" — generation is primed with the opening bracket and cut at the
closing one, optionally restricting sampled tokens to the label vocabulary
(logits mask) with a plain stop-sequence mode as the fallback.

The stub backend needs no ML stack and stands in for a trained model in
tests: it deterministically picks a label from its stored vocabulary by
prompt hash.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

from ftadapter import AdapterError

STUB_MARKER = "stub_model.json"


def load_backend(model_dir: str | Path, use_mask: bool = True):
    model_dir = Path(model_dir)
    if (model_dir / STUB_MARKER).exists():
        return StubBackend(model_dir)
    if (model_dir / "config.json").exists():
        return HfBackend(model_dir, use_mask=use_mask)
    raise AdapterError(f"no loadable model at {model_dir} (expected {STUB_MARKER} or an HF config.json)")


class StubBackend:
    """Deterministic label-picker standing in for a fine-tuned model."""

    def __init__(self, model_dir: Path):
        with open(model_dir / STUB_MARKER, encoding="utf-8") as fh:
            payload = json.load(fh)
        self.labels = payload.get("labels") or []
        if not self.labels:
            raise AdapterError(f"{model_dir / STUB_MARKER} lists no labels")

    def generate(self, prompt: str, max_new_tokens: int = 32) -> str:
        digest = int.from_bytes(hashlib.sha256(prompt.encode("utf-8")).digest()[:8], "big")
        return "[" + self.labels[digest % len(self.labels)] + "]"


class HfBackend:
    """transformers-based path for real checkpoints (optional dependency).

    With a label vocabulary available the sampler is restricted to the token
    ids of the labels plus separator/bracket tokens; otherwise generation just
    stops at the first "]".
    """

    def __init__(self, model_dir: Path, use_mask: bool = True):
        try:
            import torch
            from transformers import AutoModelForCausalLM, AutoTokenizer
        except ImportError as exc:
            raise AdapterError("this model needs the hf extra: pip install 'ftadapter[hf]'") from exc
        self._torch = torch
        self.tokenizer = AutoTokenizer.from_pretrained(model_dir)
        self.model = AutoModelForCausalLM.from_pretrained(model_dir)
        self.model.eval()
        self.use_mask = use_mask
        labels_file = Path(model_dir) / "labels.json"
        self.labels = json.loads(labels_file.read_text(encoding="utf-8")) if labels_file.exists() else None

    def _allowed_token_ids(self):
        allowed: set[int] = set()
        for piece in [*(self.labels or []), ", ", ",", " ", "]"]:
            allowed.update(self.tokenizer.encode(piece, add_special_tokens=False))
        if self.tokenizer.eos_token_id is not None:
            allowed.add(self.tokenizer.eos_token_id)
        return sorted(allowed)

    def generate(self, prompt: str, max_new_tokens: int = 32) -> str:
        torch = self._torch
        # prime the continuation with the opening bracket
        input_ids = self.tokenizer(prompt + "[", return_tensors="pt").input_ids
        kwargs = {"max_new_tokens": max_new_tokens, "do_sample": False}
        if self.use_mask and self.labels:
            allowed = self._allowed_token_ids()

            def restrict(batch_id, _sent):
                return allowed

            kwargs["prefix_allowed_tokens_fn"] = restrict
        with torch.no_grad():
            out = self.model.generate(input_ids, **kwargs)
        completion = self.tokenizer.decode(out[0, input_ids.shape[1] :], skip_special_tokens=True)
        body = completion.split("]", 1)[0]
        return "[" + body + "]"
