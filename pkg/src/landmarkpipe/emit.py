"""Serialize fine-tuning records and mix augmentation sources.

Records use the instruction/input/output schema common to instruction-tuning
trainers. Outputs are bracketed ordered label lists; matching downstream is
case-insensitive, but emission restores the catalog's canonical casing so the
files read naturally.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from landmarkpipe.corpus import LabelCatalog
from landmarkpipe.errors import ParseError, UserError
from landmarkpipe.prompts import TRAIN_TEMPLATE

OUTPUT_PATTERN = re.compile(r"^\[[^\[\]]+(, [^\[\]]+)*\]$")

SCHEMES = ("multi_label", "hierarchical_2")


@dataclass
class FineTuneRecord:
    instruction: str
    input: str
    output: str

    def to_json(self) -> dict:
        return {"instruction": self.instruction, "input": self.input, "output": self.output}


@dataclass
class DatasetManifest:
    parts: list[tuple[str, int]]
    scheme: str
    subject: str
    seed: int | None
    output_path: str

    def to_json(self) -> dict:
        return {
            "parts": [{"source": s, "count": c} for s, c in self.parts],
            "scheme": self.scheme,
            "subject": self.subject,
            "seed": self.seed,
            "output_path": self.output_path,
        }

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh, indent=2)


def render_output(labels: list[str], catalog: LabelCatalog | None = None) -> str:
    shown = [catalog.canonical_display(lab) if catalog is not None else lab for lab in labels]
    return "[" + ", ".join(shown) + "]"


def build_train_record(
    text: str,
    labels: list[str],
    subject: str,
    scheme: str = "multi_label",
    catalog: LabelCatalog | None = None,
) -> FineTuneRecord:
    """Instruction ending at "Answer:" plus the bracketed ordered label list.

    Labels must be non-empty; with a catalog they must all belong to it (that
    is the drop_unknown training path) and come back catalog-cased. The
    hierarchical scheme expects [domain, area] order from the caller.
    """
    if not labels:
        raise UserError("cannot emit a record without labels")
    if scheme not in SCHEMES:
        raise UserError(f"unknown scheme {scheme!r}")
    if catalog is not None:
        bad = [lab for lab in labels if lab not in catalog]
        if bad:
            raise UserError(f"labels not in catalog: {bad}")
    for lab in labels:
        if "[" in lab or "]" in lab or "," in lab:
            raise UserError(f"label {lab!r} cannot be bracket-encoded")
    output = render_output(labels, catalog)
    if not OUTPUT_PATTERN.match(output):
        raise UserError(f"rendered output {output!r} violates the bracket format")
    return FineTuneRecord(instruction=build_predict_prompt(text, subject), input="", output=output)


def build_predict_prompt(text: str, subject: str) -> str:
    """Identical to the training instruction, ending after "Answer:"."""
    return TRAIN_TEMPLATE.format(subject=subject, document=text)


def emit_jsonl(
    records: list[FineTuneRecord],
    path: str | Path,
    scheme: str | None = None,
    subject: str | None = None,
) -> int:
    """One JSON object per line (UTF-8, LF). Writes a sidecar manifest with
    the count and scheme when a scheme is given; returns the count."""
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_json(), ensure_ascii=False) + "\n")
    if scheme is not None:
        sidecar = {"count": len(records), "scheme": scheme, "subject": subject}
        with open(path.with_suffix(path.suffix + ".manifest.json"), "w", encoding="utf-8") as fh:
            json.dump(sidecar, fh, indent=2)
    return len(records)


def read_jsonl_records(path: str | Path) -> list[FineTuneRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                rec = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON ({exc.msg})", lineno) from exc
            missing = {"instruction", "input", "output"} - set(rec)
            if missing:
                raise ParseError(f"record lacks fields {sorted(missing)}", lineno)
            records.append(FineTuneRecord(rec["instruction"], rec["input"], rec["output"]))
    return records


def _sidecar_scheme(path: Path) -> str | None:
    sidecar = path.with_suffix(path.suffix + ".manifest.json")
    if sidecar.exists():
        with open(sidecar, encoding="utf-8") as fh:
            return json.load(fh).get("scheme")
    return None


def combine_datasets(
    parts: list[str | Path],
    out_path: str | Path,
    seed: int = 0,
    scheme: str | None = None,
    subject: str = "",
) -> DatasetManifest:
    """Concatenate the part files, shuffle with the seed, write the result.

    Preserves the multiset of records exactly. Parts carrying sidecar
    manifests must agree on the scheme.
    """
    out_path = Path(out_path)
    part_counts: list[tuple[str, int]] = []
    combined: list[FineTuneRecord] = []
    seen_scheme = scheme
    for part in parts:
        part = Path(part)
        part_scheme = _sidecar_scheme(part)
        if part_scheme is not None:
            if seen_scheme is None:
                seen_scheme = part_scheme
            elif part_scheme != seen_scheme:
                raise UserError(f"scheme mismatch: {part} is {part_scheme}, expected {seen_scheme}")
        records = read_jsonl_records(part)
        part_counts.append((str(part), len(records)))
        combined.extend(records)

    order = np.random.default_rng(seed).permutation(len(combined))
    shuffled = [combined[i] for i in order]
    emit_jsonl(shuffled, out_path, scheme=seen_scheme, subject=subject)
    manifest = DatasetManifest(
        parts=part_counts,
        scheme=seen_scheme or "unknown",
        subject=subject,
        seed=seed,
        output_path=str(out_path),
    )
    manifest.save(out_path.with_suffix(out_path.suffix + ".parts.json"))
    return manifest
