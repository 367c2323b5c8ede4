"""Dataset-side contracts: the emitted JSONL schema and the prompts file.

These formats are the only coupling to the upstream pipeline, so they are
restated (and enforced) here rather than imported from it.
"""

from __future__ import annotations

import hashlib
import json
import re
from pathlib import Path

from ftadapter import AdapterError

RECORD_FIELDS = {"instruction", "input", "output"}
OUTPUT_PATTERN = re.compile(r"^\[[^\[\]]+(, [^\[\]]+)*\]$")


def validate_dataset(path: str | Path) -> int:
    """Check every line against the record schema; returns the record count.

    Raises AdapterError naming the first offending line.
    """
    path = Path(path)
    if not path.exists():
        raise AdapterError(f"dataset not found: {path}")
    count = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                rec = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise AdapterError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from exc
            if not isinstance(rec, dict) or set(rec) - RECORD_FIELDS or RECORD_FIELDS - set(rec):
                raise AdapterError(f"{path}:{lineno}: record fields must be exactly {sorted(RECORD_FIELDS)}")
            if not all(isinstance(rec[f], str) for f in RECORD_FIELDS):
                raise AdapterError(f"{path}:{lineno}: record fields must be strings")
            if not OUTPUT_PATTERN.match(rec["output"]):
                raise AdapterError(f"{path}:{lineno}: output {rec['output']!r} is not a bracketed label list")
            count += 1
    if count == 0:
        raise AdapterError(f"{path}: dataset is empty")
    return count


def dataset_sha256(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def dataset_labels(path: str | Path) -> list[str]:
    """Distinct labels appearing in the dataset outputs, sorted."""
    labels: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            if not raw.strip():
                continue
            rec = json.loads(raw)
            interior = rec["output"].strip()[1:-1]
            labels.update(part.strip() for part in interior.split(",") if part.strip())
    return sorted(labels)


def read_prompts(path: str | Path) -> list[tuple[str, str]]:
    """Prompts JSONL {"id","prompt"} -> [(id, prompt)], order preserved."""
    out: list[tuple[str, str]] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                rec = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise AdapterError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from exc
            if "id" not in rec or "prompt" not in rec:
                raise AdapterError(f"{path}:{lineno}: prompt rows need 'id' and 'prompt'")
            if rec["id"] in seen:
                raise AdapterError(f"{path}:{lineno}: duplicate prompt id {rec['id']!r}")
            seen.add(rec["id"])
            out.append((str(rec["id"]), str(rec["prompt"])))
    if not out:
        raise AdapterError(f"{path}: no prompts")
    return out
