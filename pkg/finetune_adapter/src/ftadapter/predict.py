"""Batched inference: prompts JSONL in, predictions JSONL out.

Output rows are {"id","output"} with output always a bracket-wrapped string,
ids exactly the prompt ids in file order — directly scoreable downstream.
"""

from __future__ import annotations

import json
import re
from pathlib import Path

from ftadapter import AdapterError
from ftadapter.dataset import read_prompts
from ftadapter.decode import load_backend

BRACKETED = re.compile(r"^\[.*\]$", re.DOTALL)


def predict(model_dir: str | Path, prompts_file: str | Path, out_path: str | Path, use_mask: bool = True, max_new_tokens: int = 32) -> int:
    """Generate one bracketed output per prompt; returns the row count."""
    backend = load_backend(model_dir, use_mask=use_mask)
    prompts = read_prompts(prompts_file)
    out_path = Path(out_path)
    with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
        for prompt_id, prompt in prompts:
            output = backend.generate(prompt, max_new_tokens=max_new_tokens)
            if not BRACKETED.match(output):
                raise AdapterError(f"backend produced unbracketed output for id {prompt_id!r}: {output[:60]!r}")
            fh.write(json.dumps({"id": prompt_id, "output": output}, ensure_ascii=False) + "\n")
    return len(prompts)
