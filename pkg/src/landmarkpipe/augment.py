"""Augmentation: synonym replacement, LLM rewrite, and retrieval-grounded
generation, plus the extraction and label filtering applied to generated text.

Synonym and rewrite variants keep the source landmark's labels untouched;
only retrieval-generated samples carry extracted (and possibly hallucinated)
labels. Every attempted generation lands in exactly one status bucket so the
pipeline's accounting identity holds: attempted = ok + regex_fail +
label_filtered + gateway_failed.
"""

from __future__ import annotations

import hashlib
import json
import logging
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from landmarkpipe.corpus import Document, LabelCatalog, normalize_label
from landmarkpipe.errors import GatewayError, ParseError, UserError
from landmarkpipe.landmark import LandmarkSet
from landmarkpipe.llmgate import ChatRequest
from landmarkpipe.prompts import RAG_GENERATE_TEMPLATE, REWRITE_TEMPLATE, format_labeled_reference

log = logging.getLogger(__name__)

STATUS_OK = "ok"
STATUS_REGEX_FAIL = "regex_fail"
STATUS_LABEL_FILTERED = "label_filtered"
STATUS_GATEWAY_FAILED = "gateway_failed"

# words replaced by the synonym pass must be "safe" content words: at least
# three characters and not on this function-word list
FUNCTION_WORDS = frozenset(
    """the and for are but not was were his her its our their they them this that
    these those with from have has had having will would should could been being
    than then when where which while who whom why how what all any both each few
    more most other some such only own same too very just also into over under
    again once here there about against between during before after above below
    does did doing done because until off per via upon may might must shall can
    cannot you your yours she him mine ours theirs itself himself herself""".split()
)


@dataclass
class SynonymDb:
    """lemma -> synonyms ordered by closeness; lookups never echo the query."""

    table: dict[str, list[str]]
    source: str = ""

    def __post_init__(self):
        if not self.table:
            raise UserError("synonym database is empty")

    def lookup(self, lemma: str, top_k: int) -> list[str]:
        syns = self.table.get(lemma.lower(), [])
        return [s for s in syns if s != lemma.lower()][:top_k]

    @classmethod
    def from_tsv(cls, path: str | Path) -> "SynonymDb":
        table: dict[str, list[str]] = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.rstrip("\n")
                if not line.strip() or line.startswith("#"):
                    continue
                if "\t" not in line:
                    raise ParseError("expected lemma<TAB>syn1,syn2,...", lineno)
                lemma, syns = line.split("\t", 1)
                table[lemma.strip().lower()] = [s.strip().lower() for s in syns.split(",") if s.strip()]
        return cls(table=table, source=str(path))


@dataclass
class AugmentedSample:
    id: str
    method: str  # wordnet | rewrite | rag
    source_id: str
    text: str
    labels: list[str] = field(default_factory=list)
    status: str = STATUS_OK
    prompt_hash: str | None = None

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "method": self.method,
            "source_id": self.source_id,
            "text": self.text,
            "labels": self.labels,
            "status": self.status,
            "prompt_hash": self.prompt_hash,
        }


def save_samples(samples: list[AugmentedSample], path: str | Path) -> int:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for s in samples:
            fh.write(json.dumps(s.to_json(), ensure_ascii=False) + "\n")
    return len(samples)


def load_samples(path: str | Path) -> list[AugmentedSample]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            if not raw.strip():
                continue
            rec = json.loads(raw)
            out.append(
                AugmentedSample(
                    id=rec["id"],
                    method=rec["method"],
                    source_id=rec["source_id"],
                    text=rec["text"],
                    labels=list(rec.get("labels", [])),
                    status=rec.get("status", STATUS_OK),
                    prompt_hash=rec.get("prompt_hash"),
                )
            )
    return out


@dataclass
class AugmentStats:
    attempted: int = 0
    ok: int = 0
    regex_fail: int = 0
    label_filtered: int = 0
    gateway_failed: int = 0

    @classmethod
    def from_samples(cls, samples: list[AugmentedSample]) -> "AugmentStats":
        stats = cls(attempted=len(samples))
        for s in samples:
            setattr(stats, s.status, getattr(stats, s.status) + 1)
        return stats

    def balanced(self) -> bool:
        return self.attempted == self.ok + self.regex_fail + self.label_filtered + self.gateway_failed

    def to_json(self) -> dict:
        return {
            "attempted": self.attempted,
            "ok": self.ok,
            "regex_fail": self.regex_fail,
            "label_filtered": self.label_filtered,
            "gateway_failed": self.gateway_failed,
        }


_EDGE = re.compile(r"^(\W*)(.*?)(\W*)$", re.DOTALL)


def wordnet_replace(
    doc: Document,
    db: SynonymDb,
    labels: list[str],
    replace_prob: float = 0.15,
    top_k: int = 3,
    seed: int = 0,
    n_variants: int = 10,
) -> list[AugmentedSample]:
    """Synonym-substitution variants; labels are copied through untouched.

    Each content word is independently replaced with probability replace_prob
    by a uniform pick among its top_k closest synonyms. Deterministic per
    (seed, variant index).
    """
    if not 0.0 <= replace_prob <= 1.0:
        raise UserError("replace_prob must be in [0, 1]")
    if top_k < 1:
        raise UserError("top_k must be at least 1")
    tokens = doc.text.split(" ")
    samples = []
    for vi in range(n_variants):
        rng = np.random.default_rng([seed, vi])
        out = []
        for token in tokens:
            prefix, core, suffix = _EDGE.match(token).groups()
            lower = core.lower()
            if len(lower) >= 3 and lower not in FUNCTION_WORDS and replace_prob > 0.0:
                syns = db.lookup(lower, top_k)
                if syns and rng.random() < replace_prob:
                    core = syns[int(rng.integers(len(syns)))]
            out.append(prefix + core + suffix)
        samples.append(
            AugmentedSample(
                id=f"{doc.id}:wordnet:{vi}",
                method="wordnet",
                source_id=doc.id,
                text=" ".join(out),
                labels=list(labels),
            )
        )
    return samples


def llm_rewrite(
    doc: Document,
    gateway,
    labels: list[str],
    n_variants: int = 10,
    temperature: float = 0.3,
) -> list[AugmentedSample]:
    """Rewrite variants via the gateway; labels are copied through untouched.

    A gateway failure marks that variant gateway_failed and the run continues.
    """
    prompt = REWRITE_TEMPLATE.format(document=doc.text)
    req = ChatRequest.user(gateway.config.chat_model, prompt, temperature=temperature)
    digest = hashlib.sha256(prompt.encode("utf-8")).hexdigest()
    samples = []
    for vi in range(n_variants):
        sample = AugmentedSample(
            id=f"{doc.id}:rewrite:{vi}",
            method="rewrite",
            source_id=doc.id,
            text="",
            labels=list(labels),
            prompt_hash=digest,
        )
        try:
            sample.text = gateway.chat(req).strip()
        except GatewayError as exc:
            log.warning("rewrite %s variant %d failed: %s", doc.id, vi, exc)
            sample.status = STATUS_GATEWAY_FAILED
        samples.append(sample)
    return samples


def extract_content_label(generated: str) -> tuple[str, list[str]] | None:
    """Pull (content, labels) out of a generated document, or None on failure.

    Content sits between the first "Content:" marker and the last "Label:"
    marker; the label segment is the first [...] group after that marker (or
    the remainder of its line), comma-split with brackets stripped and each
    label normalized.
    """
    start = generated.find("Content:")
    if start < 0:
        return None
    rest = generated[start + len("Content:") :]
    label_pos = rest.rfind("Label:")
    if label_pos < 0:
        return None
    content = rest[:label_pos].strip()
    if not content:
        return None
    segment = rest[label_pos + len("Label:") :].strip()
    open_b = segment.find("[")
    close_b = segment.find("]", open_b + 1) if open_b >= 0 else -1
    if open_b >= 0 and close_b > open_b:
        segment = segment[open_b + 1 : close_b]
    else:
        segment = segment.split("\n", 1)[0]
    labels = []
    for part in segment.split(","):
        cleaned = normalize_label(part.replace("[", " ").replace("]", " "))
        if cleaned:
            labels.append(cleaned)
    if not labels:
        return None
    return content, labels


def format_generated(content: str, labels: list[str]) -> str:
    """The well-formed generated-document shape; inverse of the extractor."""
    return f"Content: {content}\nLabel: [{', '.join(labels)}]"


def build_rag_prompt(
    doc: Document,
    labeled_refs: list[tuple[str, list[str]]],
    unlabeled_texts: list[str],
    catalog: LabelCatalog,
) -> str:
    labeled_block = "\n\n".join(
        format_labeled_reference(text, [catalog.canonical_display(lab) for lab in labels])
        for text, labels in labeled_refs
    )
    unlabeled_block = "\n\n".join(unlabeled_texts)
    return RAG_GENERATE_TEMPLATE.format(
        labels=catalog.prompt_listing(),
        labeled=labeled_block,
        unlabeled=unlabeled_block,
        document=doc.text,
    )


def rag_generate(
    doc_index: int,
    corpus_docs: list[Document],
    model,
    landmarks: LandmarkSet,
    catalog: LabelCatalog,
    gateway,
    seed: int = 0,
    n_variants: int = 3,
    docs_by_id: dict[str, Document] | None = None,
) -> list[AugmentedSample]:
    """Generate labeled documents grounded in nearby landmarks.

    Per variant: landmarks of the doc's five most likely clusters (missing
    annotations are skipped with a warning), three fresh unlabeled picks from
    the doc's own cluster (fewer when the cluster is small), and the primary
    document itself. Labels come from extraction, not from the source.
    Callers looping over a corpus should pass docs_by_id once.
    """
    from landmarkpipe.clustering.model import top_clusters

    doc = corpus_docs[doc_index]
    width = min(5, model.k, model.affinity_width)
    nearest = top_clusters(model, doc_index, width)
    labeled_map = landmarks.labeled()
    missing = [c for c in nearest if c not in labeled_map]
    if missing:
        log.warning("doc %s: clusters %s lack labeled landmarks; skipped in prompt", doc.id, missing)
    if docs_by_id is None:
        docs_by_id = {d.id: d for d in corpus_docs}
    labeled_refs = []
    for c in nearest:
        if c in labeled_map:
            entry = labeled_map[c]
            labeled_refs.append((docs_by_id[entry.doc_id].text, entry.labels))

    own = int(model.assignments[doc_index])
    landmark_ids = {e.doc_id for e in labeled_map.values()}
    candidates = [m for m in model.members(own) if m != doc_index and corpus_docs[m].id not in landmark_ids]

    samples = []
    for vi in range(n_variants):
        rng = np.random.default_rng([seed, doc_index, vi])
        n_pick = min(3, len(candidates))
        picks = sorted(rng.choice(len(candidates), size=n_pick, replace=False).tolist()) if n_pick else []
        unlabeled_texts = [corpus_docs[candidates[p]].text for p in picks]
        prompt = build_rag_prompt(doc, labeled_refs, unlabeled_texts, catalog)
        digest = hashlib.sha256(prompt.encode("utf-8")).hexdigest()
        sample = AugmentedSample(
            id=f"{doc.id}:rag:{vi}",
            method="rag",
            source_id=doc.id,
            text="",
            labels=[],
            prompt_hash=digest,
        )
        try:
            response = gateway.chat(
                ChatRequest.user(gateway.config.chat_model, prompt, temperature=gateway_rag_temperature(gateway))
            )
        except GatewayError as exc:
            log.warning("rag %s variant %d failed: %s", doc.id, vi, exc)
            sample.status = STATUS_GATEWAY_FAILED
            samples.append(sample)
            continue
        extracted = extract_content_label(response)
        if extracted is None:
            sample.status = STATUS_REGEX_FAIL
            sample.text = response
        else:
            sample.text, sample.labels = extracted
        samples.append(sample)
    return samples


def gateway_rag_temperature(gateway) -> float:
    return getattr(gateway.config, "rag_temperature", 0.7)


def filter_labels(sample: AugmentedSample, catalog: LabelCatalog, policy: str = "drop_unknown") -> AugmentedSample:
    """Apply the label policy to an extracted sample.

    drop_unknown removes labels outside the catalog and downgrades the sample
    to label_filtered when nothing survives; keep_all passes everything (for
    distribution reporting).
    """
    if policy == "keep_all":
        return sample
    if policy != "drop_unknown":
        raise UserError(f"unknown label policy {policy!r}")
    if sample.status != STATUS_OK:
        return sample
    kept = [lab for lab in sample.labels if lab in catalog]
    if kept == sample.labels:
        return sample
    if not kept:
        return replace(sample, labels=[], status=STATUS_LABEL_FILTERED)
    return replace(sample, labels=kept)
