"""Score model predictions with the match-metric ladder, and run the
no-fine-tune chain-of-thought labeling baseline.

Multi-label runs report part/all/in-right-order match; two-level hierarchical
runs report domain/area match. Parse failures and missing predictions count
as misses against the full test-split size, never as exclusions.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

from landmarkpipe.corpus import Corpus, LabelCatalog, normalize_label
from landmarkpipe.errors import ParseError, UserError
from landmarkpipe.landmark import LandmarkSet
from landmarkpipe.llmgate import ChatRequest
from landmarkpipe.prompts import COT_LABEL_TEMPLATE, format_labeled_reference

log = logging.getLogger(__name__)


@dataclass
class Prediction:
    doc_id: str | None
    raw: str
    labels: list[str] = field(default_factory=list)
    parse_ok: bool = False


def parse_prediction(raw: str, doc_id: str | None = None) -> Prediction:
    """Labels from the first [...] pair: comma-split and normalized.

    parse_ok is False when there is no bracket pair or it is empty; labels
    are then empty and every match metric treats the row as a miss.
    """
    open_b = raw.find("[")
    close_b = raw.find("]", open_b + 1) if open_b >= 0 else -1
    if open_b < 0 or close_b < 0:
        return Prediction(doc_id=doc_id, raw=raw)
    labels = [normalize_label(part) for part in raw[open_b + 1 : close_b].split(",")]
    labels = [lab for lab in labels if lab]
    if not labels:
        return Prediction(doc_id=doc_id, raw=raw)
    return Prediction(doc_id=doc_id, raw=raw, labels=labels, parse_ok=True)


def _norm(labels) -> list[str]:
    return [normalize_label(lab) for lab in labels]


def part_match(pred_labels, true_labels) -> bool:
    """At least one predicted tag appears among the true tags."""
    return bool(set(_norm(pred_labels)) & set(_norm(true_labels)))


def all_match(pred_labels, true_labels) -> bool:
    """Predicted and true tags agree as sets (order is the next metric's job)."""
    pred = set(_norm(pred_labels))
    return bool(pred) and pred == set(_norm(true_labels))


def in_right_order(pred_labels, true_labels) -> bool:
    """Exact sequence agreement, importance order included."""
    pred = _norm(pred_labels)
    return bool(pred) and pred == _norm(true_labels)


def domain_area_match(pred_labels, true_labels) -> tuple[bool, bool]:
    """(domain hit, domain-and-area hit) for two-level hierarchical labels."""
    pred = _norm(pred_labels)
    true = _norm(true_labels)
    domain = bool(pred) and bool(true) and pred[0] == true[0]
    area = domain and len(pred) >= 2 and len(true) >= 2 and pred[1] == true[1]
    return domain, area


@dataclass
class MetricsReport:
    scheme: str
    n: int
    scores: dict[str, float]

    def to_json(self) -> dict:
        return {"scheme": self.scheme, "n": self.n, **self.scores}

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh, indent=2)

    def to_markdown(self) -> str:
        header = " | ".join(self.scores)
        sep = " | ".join("---" for _ in self.scores)
        values = " | ".join(f"{v:.4f}" for v in self.scores.values())
        return f"| n | {header} |\n| --- | {sep} |\n| {self.n} | {values} |\n"


def load_predictions(path: str | Path) -> list[Prediction]:
    """Predictions JSONL {"id","output"}; duplicates are an error."""
    predictions = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                rec = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON ({exc.msg})", lineno) from exc
            if "id" not in rec or "output" not in rec:
                raise ParseError("prediction rows need 'id' and 'output'", lineno)
            doc_id = str(rec["id"])
            if doc_id in seen:
                raise ParseError(f"duplicate prediction for id {doc_id!r}", lineno)
            seen.add(doc_id)
            predictions.append(parse_prediction(str(rec["output"]), doc_id=doc_id))
    return predictions


def score_run(predictions: list[Prediction] | str | Path, corpus: Corpus, scheme: str, split: str = "test") -> MetricsReport:
    """Fractions over the full split; prediction ids must exist in the split."""
    if not isinstance(predictions, list):
        predictions = load_predictions(predictions)
    gold_docs = corpus.docs_in_split(split)
    if not gold_docs:
        raise UserError(f"no documents in split {split!r}")
    gold = {d.id: d.visible_labels(reveal_gold=True) for d in gold_docs}
    unknown = [p.doc_id for p in predictions if p.doc_id not in gold]
    if unknown:
        raise UserError(f"predictions for unknown doc ids: {unknown[:5]}{'...' if len(unknown) > 5 else ''}")

    by_id = {p.doc_id: p for p in predictions}
    n = len(gold_docs)
    if scheme == "multi_label":
        counters = {"part_match": 0, "all_match": 0, "in_right_order": 0}
        for doc_id, true in gold.items():
            pred = by_id.get(doc_id)
            labels = pred.labels if pred is not None and pred.parse_ok else []
            counters["part_match"] += part_match(labels, true)
            counters["all_match"] += all_match(labels, true)
            counters["in_right_order"] += in_right_order(labels, true)
    elif scheme == "hierarchical_2":
        counters = {"domain_match": 0, "area_match": 0}
        for doc_id, true in gold.items():
            pred = by_id.get(doc_id)
            labels = pred.labels if pred is not None and pred.parse_ok else []
            domain, area = domain_area_match(labels, true)
            counters["domain_match"] += domain
            counters["area_match"] += area
    else:
        raise UserError(f"unknown scheme {scheme!r}")

    return MetricsReport(scheme=scheme, n=n, scores={key: count / n for key, count in counters.items()})


def extract_cot_label(response: str) -> Prediction:
    """Bracketed segment after the last "Label:" marker."""
    pos = response.rfind("Label:")
    if pos < 0:
        return Prediction(doc_id=None, raw=response)
    return parse_prediction(response[pos + len("Label:") :])


def nearest_clusters_for_vector(model, vector, m: int) -> list[int]:
    """Cluster ranking for a document the model never saw, by center distance.

    Lets the labeling baseline retrieve landmarks for test-split docs, which
    are excluded from clustering by design.
    """
    import numpy as np

    dists = np.linalg.norm(model.centers - np.asarray(vector, dtype=np.float64)[None, :], axis=1)
    return [int(c) for c in np.argsort(dists, kind="stable")[:m]]


def cot_rag_label(
    doc,
    vector,
    docs_by_id: dict,
    model,
    landmarks: LandmarkSet,
    catalog: LabelCatalog,
    gateway,
    temperature: float = 0.0,
) -> Prediction:
    """Zero-fine-tune baseline: reason over nearby labeled landmarks, then tag."""
    width = min(5, model.k)
    nearest = nearest_clusters_for_vector(model, vector, width)
    labeled_map = landmarks.labeled()
    blocks = []
    for c in nearest:
        if c in labeled_map:
            entry = labeled_map[c]
            blocks.append(
                format_labeled_reference(
                    docs_by_id[entry.doc_id].text,
                    [catalog.canonical_display(lab) for lab in entry.labels],
                )
            )
    prompt = COT_LABEL_TEMPLATE.format(
        labels=catalog.prompt_listing(),
        labeled="\n\n".join(blocks),
        document=doc.text,
    )
    response = gateway.chat(ChatRequest.user(gateway.config.chat_model, prompt, temperature=temperature))
    prediction = extract_cot_label(response)
    prediction.doc_id = doc.id
    return prediction
