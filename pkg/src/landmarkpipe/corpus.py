"""Corpus ingestion, train/validation/test splitting, and label catalogs.

Text is whitespace-normalized once at ingestion (newlines become spaces, space
runs collapse) so every downstream word count agrees. Gold labels on the train
split are flagged hidden rather than deleted: selection/augmentation code must
not see them, while evaluation and the random-vs-landmark ablation may unhide
via an explicit reveal flag.
"""

from __future__ import annotations

import csv
import json
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from landmarkpipe.errors import ParseError, UserError

SPLITS = ("train", "validation", "test")

_WS_RUN = re.compile(r"\s+")


def normalize_text(raw: str) -> str:
    """Replace newlines/tabs with spaces and collapse space runs."""
    return _WS_RUN.sub(" ", raw).strip()


def normalize_label(raw: str) -> str:
    """Canonical label form: lowercase, trimmed, inner whitespace collapsed.

    Idempotent; empty input stays empty (callers treat that as invalid).
    """
    return _WS_RUN.sub(" ", raw.strip()).lower()


@dataclass
class Document:
    id: str
    text: str
    gold_labels: list[str] = field(default_factory=list)
    split: str | None = None
    labels_hidden: bool = False

    def visible_labels(self, reveal_gold: bool = False) -> list[str]:
        """Gold labels unless they are hidden and the caller did not opt in."""
        if self.labels_hidden and not reveal_gold:
            return []
        return list(self.gold_labels)


@dataclass
class Corpus:
    documents: list[Document]
    name: str = "corpus"
    label_scheme: str = "multi_label"  # or "hierarchical_2"
    split_ratios: tuple[float, float, float] | None = None

    def __post_init__(self):
        self._by_id = {d.id: d for d in self.documents}
        if len(self._by_id) != len(self.documents):
            raise UserError("duplicate document ids in corpus")

    def __len__(self) -> int:
        return len(self.documents)

    def __getitem__(self, doc_id: str) -> Document:
        return self._by_id[doc_id]

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self._by_id

    def docs_in_split(self, split: str) -> list[Document]:
        return [d for d in self.documents if d.split == split]

    def split_sizes(self) -> dict[str, int]:
        sizes = {s: 0 for s in SPLITS}
        for d in self.documents:
            if d.split in sizes:
                sizes[d.split] += 1
        return sizes


class LabelCatalog:
    """Set of canonical labels, optionally organized domain -> areas.

    Lookups are by normalized form; the original casing is kept so emitted
    records can restore the human-facing spelling.
    """

    def __init__(self, labels: list[str], hierarchy: dict[str, list[str]] | None = None):
        self.display: dict[str, str] = {}
        for lab in labels:
            canon = normalize_label(lab)
            if not canon:
                raise UserError("empty label in catalog")
            self.display.setdefault(canon, lab.strip())
        self.hierarchy: dict[str, list[str]] | None = None
        if hierarchy is not None:
            self.hierarchy = {k: list(v) for k, v in hierarchy.items()}
            for dom, areas in self.hierarchy.items():
                for lab in (dom, *areas):
                    canon = normalize_label(lab)
                    if canon not in self.display:
                        self.display[canon] = lab.strip()

    @property
    def labels(self) -> set[str]:
        return set(self.display)

    def __contains__(self, label: str) -> bool:
        return normalize_label(label) in self.display

    def __len__(self) -> int:
        return len(self.display)

    def canonical_display(self, label: str) -> str:
        """Catalog-cased spelling of a (possibly sloppily cased) label."""
        return self.display[normalize_label(label)]

    def prompt_listing(self) -> str:
        """Label list as it appears inside generation prompts.

        Flat catalogs are one comma-separated line; two-level catalogs keep
        the domain/area layout so hierarchical answers stay well-formed.
        """
        if self.hierarchy:
            blocks = []
            for dom, areas in self.hierarchy.items():
                blocks.append(f"Domain: {dom}\nArea: " + ", ".join(areas))
            return "\n\n".join(blocks)
        return ", ".join(sorted(self.display.values(), key=normalize_label))

    @classmethod
    def from_file(cls, path: str | Path) -> "LabelCatalog":
        with open(path, encoding="utf-8") as fh:
            payload = json.load(fh)
        if "labels" not in payload:
            raise UserError(f"{path}: catalog file needs a 'labels' array")
        return cls(payload["labels"], payload.get("hierarchy"))


def _parse_labels_field(value) -> list[str]:
    if value is None:
        return []
    if isinstance(value, str):
        parts = value.split(";")
    else:
        parts = value
    labels = [normalize_label(str(p)) for p in parts]
    return [lab for lab in labels if lab]


def load_corpus(path: str | Path, format: str | None = None, name: str | None = None) -> Corpus:
    """Load a corpus from JSONL (canonical) or CSV.

    JSONL records: {"id","text","labels"?,"split"?}. CSV columns id,text,labels
    with ';'-separated labels. Rejects duplicate ids and empty text, reporting
    the offending line number.
    """
    path = Path(path)
    if not path.exists():
        raise UserError(f"corpus file not found: {path}")
    if format is None:
        format = "csv" if path.suffix.lower() == ".csv" else "jsonl"
    if format not in ("jsonl", "csv"):
        raise UserError(f"unsupported corpus format: {format}")

    docs: list[Document] = []
    seen: set[str] = set()

    def add(doc_id, text, labels, split, line):
        if not doc_id:
            raise ParseError("missing document id", line)
        if doc_id in seen:
            raise ParseError(f"duplicate document id {doc_id!r}", line)
        norm = normalize_text(text or "")
        if not norm:
            raise ParseError(f"document {doc_id!r} has empty text", line)
        if split is not None and split not in SPLITS:
            raise ParseError(f"unknown split {split!r}", line)
        seen.add(doc_id)
        docs.append(Document(id=str(doc_id), text=norm, gold_labels=labels, split=split))

    if format == "jsonl":
        with open(path, encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, start=1):
                if not raw.strip():
                    continue
                try:
                    rec = json.loads(raw)
                except json.JSONDecodeError as exc:
                    raise ParseError(f"invalid JSON ({exc.msg})", lineno) from exc
                if not isinstance(rec, dict) or "id" not in rec or "text" not in rec:
                    raise ParseError("record must be an object with 'id' and 'text'", lineno)
                add(rec["id"], rec["text"], _parse_labels_field(rec.get("labels")), rec.get("split"), lineno)
    else:
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or "id" not in reader.fieldnames or "text" not in reader.fieldnames:
                raise ParseError("CSV needs 'id' and 'text' columns", 1)
            for lineno, row in enumerate(reader, start=2):
                add(row.get("id"), row.get("text"), _parse_labels_field(row.get("labels")), row.get("split"), lineno)

    return Corpus(documents=docs, name=name or path.stem)


def save_corpus_jsonl(corpus: Corpus, path: str | Path) -> int:
    """Write the corpus back out; inverse of load_corpus for normalized text."""
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for d in corpus.documents:
            rec = {"id": d.id, "text": d.text}
            if d.gold_labels:
                rec["labels"] = d.gold_labels
            if d.split is not None:
                rec["split"] = d.split
            if d.labels_hidden:
                rec["labels_hidden"] = True
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")
    return len(corpus.documents)


def _load_hidden_flag(rec: dict) -> bool:
    return bool(rec.get("labels_hidden"))


def load_split_corpus(path: str | Path, name: str | None = None) -> Corpus:
    """Reload a corpus written by save_corpus_jsonl, preserving hidden flags."""
    corpus = load_corpus(path, format="jsonl", name=name)
    with open(path, encoding="utf-8") as fh:
        for doc, raw in zip(corpus.documents, (ln for ln in fh if ln.strip())):
            doc.labels_hidden = _load_hidden_flag(json.loads(raw))
    return corpus


def _apportion(n: int, ratios: tuple[float, float, float]) -> list[int]:
    """Largest-remainder split sizes: each differs from n*ratio by < 1."""
    exact = [n * r for r in ratios]
    sizes = [int(np.floor(e)) for e in exact]
    remainders = [e - s for e, s in zip(exact, sizes)]
    deficit = n - sum(sizes)
    for idx in sorted(range(len(sizes)), key=lambda i: (-remainders[i], i))[:deficit]:
        sizes[idx] += 1
    return sizes


def split_corpus(corpus: Corpus, ratios: tuple[float, float, float] = (0.5, 0.3, 0.2), seed: int = 0) -> Corpus:
    """Assign every document to exactly one of train/validation/test.

    Uniform unstratified shuffle, deterministic in the seed. Train-split gold
    labels are flagged hidden; validation/test keep theirs visible for
    evaluation. Ratios must be positive and sum to 1.
    """
    if len(corpus) < 3:
        raise UserError("corpus too small to split (need at least 3 documents)")
    if len(ratios) != 3 or any(r <= 0 for r in ratios):
        raise UserError("ratios must be three positive fractions")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise UserError(f"ratios must sum to 1 (got {sum(ratios)})")

    n = len(corpus)
    order = np.random.default_rng(seed).permutation(n)
    sizes = _apportion(n, tuple(ratios))
    split_of = np.empty(n, dtype=object)
    start = 0
    for split_name, size in zip(SPLITS, sizes):
        split_of[order[start : start + size]] = split_name
        start += size

    docs = []
    for i, d in enumerate(corpus.documents):
        split_name = split_of[i]
        docs.append(replace(d, split=split_name, labels_hidden=(split_name == "train")))
    return Corpus(documents=docs, name=corpus.name, label_scheme=corpus.label_scheme, split_ratios=tuple(ratios))
