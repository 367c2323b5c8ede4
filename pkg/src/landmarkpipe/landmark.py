"""Pick one representative document per cluster and collect its human labels.

Selection strategies: nearest-to-center, LLM choice over the cluster's
documents, or (for the ablation control) a uniform random draw from the train
split. Annotation runs interactively, from an import file, or in simulation
mode that copies hidden gold labels so offline runs need no human.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from landmarkpipe.corpus import Corpus, Document, LabelCatalog, normalize_label
from landmarkpipe.errors import ParseError, UserError
from landmarkpipe.llmgate import ChatRequest
from landmarkpipe.prompts import PICK_REPRESENTATIVE_TEMPLATE, numbered_documents, truncate_words

log = logging.getLogger(__name__)

_INDEX_PATTERN = re.compile(r"\[(\d+)\]")

DOC_WORD_CAP = 400
PROMPT_WORD_BUDGET = 6000


@dataclass
class SelectionStrategy:
    kind: str  # centroid | llm_choice | random
    seed: int | None = None

    def __post_init__(self):
        if self.kind not in ("centroid", "llm_choice", "random"):
            raise UserError(f"unknown selection strategy {self.kind!r}")


@dataclass
class LandmarkEntry:
    cluster: int
    doc_id: str
    labels: list[str] = field(default_factory=list)
    annotator: str = ""
    status: str = "pending"  # pending | labeled


class LandmarkSet:
    """At most one entry per cluster key; labels stay catalog-canonical."""

    def __init__(self):
        self.entries: dict[int, LandmarkEntry] = {}

    def add(self, entry: LandmarkEntry) -> None:
        if entry.cluster in self.entries:
            raise UserError(f"cluster {entry.cluster} already has a landmark")
        self.entries[entry.cluster] = entry

    def labeled(self) -> dict[int, LandmarkEntry]:
        return {c: e for c, e in self.entries.items() if e.status == "labeled"}

    def pending(self) -> list[LandmarkEntry]:
        return [e for c, e in sorted(self.entries.items()) if e.status == "pending"]

    def __len__(self) -> int:
        return len(self.entries)

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for cluster in sorted(self.entries):
                e = self.entries[cluster]
                rec = {"cluster": e.cluster, "doc_id": e.doc_id, "labels": e.labels}
                if e.annotator:
                    rec["annotator"] = e.annotator
                if e.status != "labeled":
                    rec["status"] = e.status
                fh.write(json.dumps(rec, ensure_ascii=False) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "LandmarkSet":
        out = cls()
        with open(path, encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, start=1):
                if not raw.strip():
                    continue
                try:
                    rec = json.loads(raw)
                except json.JSONDecodeError as exc:
                    raise ParseError(f"invalid JSON ({exc.msg})", lineno) from exc
                labels = [normalize_label(str(lab)) for lab in rec.get("labels", [])]
                labels = [lab for lab in labels if lab]
                status = rec.get("status", "labeled" if labels else "pending")
                out.add(LandmarkEntry(int(rec["cluster"]), str(rec["doc_id"]), labels, rec.get("annotator", ""), status))
        return out


def select_by_centroid(model, features, cluster_id: int) -> str:
    """Doc id of the member nearest the cluster center; ties take the lowest
    document index."""
    members = model.members(cluster_id)
    if members.size == 0:
        raise UserError(f"cluster {cluster_id} is empty")
    X = features.dense() if hasattr(features, "dense") else np.asarray(features, dtype=np.float64)
    center = model.centers[cluster_id]
    dists = np.linalg.norm(X[members] - center[None, :], axis=1)
    chosen = members[int(np.argmin(dists))]
    return features.doc_ids[chosen] if hasattr(features, "doc_ids") else str(chosen)


def parse_index_response(response: str, n_docs: int) -> int | None:
    """Last [int] in the response mapped to a 0-based doc position, or None.

    The prompt numbers documents from 1; out-of-range answers (including the
    occasional [0]) are rejected so the caller can fall back to the centroid.
    """
    matches = _INDEX_PATTERN.findall(response)
    if not matches:
        return None
    idx = int(matches[-1])
    if 1 <= idx <= n_docs:
        return idx - 1
    return None


def build_pick_prompt(texts: list[str]) -> str:
    total_words = sum(len(t.split(" ")) for t in texts)
    if total_words > PROMPT_WORD_BUDGET:
        texts = [truncate_words(t, DOC_WORD_CAP) for t in texts]
    return PICK_REPRESENTATIVE_TEMPLATE.format(documents=numbered_documents(texts))


def select_by_llm(cluster_docs: list[Document], gateway, fallback_doc_id: str | None = None) -> str:
    """Ask the gateway which document best represents the cluster.

    Single-document clusters skip the call. Unparseable or out-of-range
    answers fall back to the supplied centroid choice (or raise without one).
    """
    if not cluster_docs:
        raise UserError("cannot select from an empty cluster")
    if len(cluster_docs) == 1:
        return cluster_docs[0].id
    prompt = build_pick_prompt([d.text for d in cluster_docs])
    response = gateway.chat(ChatRequest.user(gateway.config.chat_model, prompt))
    position = parse_index_response(response, len(cluster_docs))
    if position is None:
        if fallback_doc_id is None:
            raise UserError(f"unusable selection response {response[:80]!r} and no fallback")
        log.warning("selection response %r unusable; falling back to centroid pick", response[:80])
        return fallback_doc_id
    return cluster_docs[position].id


def select_landmarks(
    corpus: Corpus,
    strategy: SelectionStrategy,
    model=None,
    features=None,
    gateway=None,
    split: str = "train",
    n_random: int | None = None,
) -> LandmarkSet:
    """Build the landmark set for every cluster (or n random train docs)."""
    landmarks = LandmarkSet()
    if strategy.kind == "random":
        docs = corpus.docs_in_split(split)
        count = n_random if n_random is not None else (model.k if model is not None else None)
        if count is None:
            raise UserError("random strategy needs n_random or a fitted model for the budget")
        if count > len(docs):
            raise UserError(f"cannot draw {count} landmarks from {len(docs)} documents")
        rng = np.random.default_rng(strategy.seed or 0)
        picks = rng.choice(len(docs), size=count, replace=False)
        # negative keys: random picks carry no cluster identity, so they must
        # never collide with real cluster ids during retrieval lookups
        for key, pos in enumerate(picks):
            landmarks.add(LandmarkEntry(cluster=-(key + 1), doc_id=docs[int(pos)].id))
        return landmarks

    if model is None or features is None:
        raise UserError(f"{strategy.kind} strategy needs a fitted model and features")
    index_of = {doc_id: i for i, doc_id in enumerate(features.doc_ids)}
    for cluster_id in range(model.k):
        centroid_id = select_by_centroid(model, features, cluster_id)
        if strategy.kind == "centroid":
            chosen = centroid_id
        else:
            if gateway is None:
                raise UserError("llm_choice strategy needs a gateway")
            member_docs = [corpus[features.doc_ids[i]] for i in model.members(cluster_id)]
            chosen = select_by_llm(member_docs, gateway, fallback_doc_id=centroid_id)
        if model.assignments[index_of[chosen]] != cluster_id:
            raise UserError(f"selected doc {chosen} is not in cluster {cluster_id}")
        landmarks.add(LandmarkEntry(cluster=cluster_id, doc_id=chosen))
    return landmarks


def annotate(
    landmarks: LandmarkSet,
    corpus: Corpus,
    catalog: LabelCatalog,
    mode: str = "import",
    labels_file: str | Path | None = None,
    reveal_gold: bool = False,
    state_path: str | Path | None = None,
    input_fn=input,
    output_fn=print,
) -> LandmarkSet:
    """Attach labels to landmarks.

    import mode reads the labels file and rejects rows with labels outside the
    catalog; interactive mode prompts per pending entry (empty/skip to skip,
    quit to stop; state persists after every entry so sessions resume); with
    reveal_gold the hidden gold labels are copied (ablation/simulation path).
    """
    if reveal_gold:
        for entry in landmarks.entries.values():
            gold = corpus[entry.doc_id].visible_labels(reveal_gold=True)
            valid = [normalize_label(lab) for lab in gold if lab in catalog]
            if valid:
                entry.labels = valid
                entry.annotator = "gold"
                entry.status = "labeled"
        if state_path:
            landmarks.save(state_path)
        return landmarks

    if mode == "import":
        if labels_file is None:
            raise UserError("import mode needs a labels file")
        imported = LandmarkSet.load(labels_file)
        rejected = 0
        for cluster, incoming in imported.entries.items():
            if cluster not in landmarks.entries:
                rejected += 1
                log.warning("labels row for unknown cluster %s rejected", cluster)
                continue
            entry = landmarks.entries[cluster]
            if incoming.doc_id and incoming.doc_id != entry.doc_id:
                # stale import from an older selection would mislabel silently
                rejected += 1
                log.warning("cluster %s rejected: labels are for doc %s, landmark is %s", cluster, incoming.doc_id, entry.doc_id)
                continue
            bad = [lab for lab in incoming.labels if lab not in catalog]
            if bad or not incoming.labels:
                rejected += 1
                log.warning("cluster %s rejected: labels %s not in catalog", cluster, bad or "(empty)")
                continue
            entry.labels = [normalize_label(lab) for lab in incoming.labels]
            entry.annotator = incoming.annotator or "import"
            entry.status = "labeled"
        if rejected:
            log.warning("%d import rows rejected", rejected)
        if state_path:
            landmarks.save(state_path)
        return landmarks

    if mode != "interactive":
        raise UserError(f"unknown annotation mode {mode!r}")

    catalog_preview = ", ".join(sorted(catalog.display.values(), key=normalize_label))
    for entry in landmarks.pending():
        doc = corpus[entry.doc_id]
        output_fn(f"\n=== cluster {entry.cluster} | doc {doc.id} ===")
        output_fn(doc.text)
        output_fn(f"[catalog] {catalog_preview}")
        while True:
            raw = input_fn("labels (comma-separated, empty/skip to skip, quit to stop): ").strip()
            if raw.lower() == "quit":
                if state_path:
                    landmarks.save(state_path)
                return landmarks
            if not raw or raw.lower() == "skip":
                break
            labels = [normalize_label(part) for part in raw.split(",") if part.strip()]
            bad = [lab for lab in labels if lab not in catalog]
            if bad:
                output_fn(f"not in catalog: {', '.join(bad)} — try again")
                continue
            entry.labels = labels
            entry.annotator = "interactive"
            entry.status = "labeled"
            break
        if state_path:
            landmarks.save(state_path)
    return landmarks
