"""Document feature vectors: native TF-IDF or gateway embeddings.

TF-IDF uses raw term counts, smoothed idf ln((1+N)/(1+df)) + 1, and
L2-normalized rows. The vocabulary keeps the max_features terms with the
highest total corpus frequency, ties broken lexicographically so fits are
reproducible.
"""

from __future__ import annotations

import json
import re
import urllib.parse
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from landmarkpipe.corpus import Corpus
from landmarkpipe.errors import UserError

_TOKEN_SPLIT = re.compile(r"[^0-9a-z]+")


def tokenize(text: str) -> list[str]:
    """Lowercase, split on non-alphanumeric, drop single-character tokens."""
    return [t for t in _TOKEN_SPLIT.split(text.lower()) if len(t) > 1]


@dataclass
class TfidfModel:
    vocabulary: dict[str, int]
    idf: np.ndarray
    max_features: int

    def to_json(self) -> dict:
        return {"vocabulary": self.vocabulary, "idf": self.idf.tolist(), "max_features": self.max_features}

    @classmethod
    def from_json(cls, payload: dict) -> "TfidfModel":
        return cls(payload["vocabulary"], np.asarray(payload["idf"], dtype=np.float64), payload["max_features"])


@dataclass
class FeatureMatrix:
    rows: "np.ndarray | sp.csr_matrix"
    doc_ids: list[str]
    kind: str  # tfidf | embedding

    def __post_init__(self):
        if self.rows.shape[0] != len(self.doc_ids):
            raise UserError(f"{self.rows.shape[0]} rows for {len(self.doc_ids)} doc ids")
        data = self.rows.data if sp.issparse(self.rows) else self.rows
        if data.size and not np.all(np.isfinite(data)):
            raise UserError("feature matrix contains NaN or Inf")

    @property
    def n_docs(self) -> int:
        return self.rows.shape[0]

    @property
    def dim(self) -> int:
        return self.rows.shape[1]

    def dense(self) -> np.ndarray:
        return self.rows.toarray() if sp.issparse(self.rows) else self.rows

    def subset(self, indices) -> "FeatureMatrix":
        idx = np.asarray(indices)
        return FeatureMatrix(self.rows[idx], [self.doc_ids[i] for i in idx], self.kind)


def tfidf_fit_transform(corpus: Corpus, max_features: int) -> tuple[TfidfModel, FeatureMatrix]:
    """Fit a TF-IDF vocabulary on the corpus and vectorize it.

    tf is the raw in-document term count; rows come back L2-normalized in a
    sparse matrix. Raises when every document tokenizes to nothing.
    """
    if max_features < 16:
        raise UserError("max_features must be at least 16")
    if len(corpus) == 0:
        raise UserError("cannot fit TF-IDF on an empty corpus")

    doc_tokens = [tokenize(d.text) for d in corpus.documents]
    corpus_freq: Counter[str] = Counter()
    doc_freq: Counter[str] = Counter()
    for tokens in doc_tokens:
        corpus_freq.update(tokens)
        doc_freq.update(set(tokens))
    if not corpus_freq:
        raise UserError("empty vocabulary: no document produced any token")

    kept = sorted(corpus_freq, key=lambda t: (-corpus_freq[t], t))[:max_features]
    vocabulary = {term: i for i, term in enumerate(sorted(kept))}
    n_docs = len(corpus)
    idf = np.empty(len(vocabulary), dtype=np.float64)
    for term, col in vocabulary.items():
        idf[col] = np.log((1.0 + n_docs) / (1.0 + doc_freq[term])) + 1.0

    indptr = [0]
    indices: list[int] = []
    data: list[float] = []
    for tokens in doc_tokens:
        counts = Counter(t for t in tokens if t in vocabulary)
        cols = sorted(vocabulary[t] for t in counts)
        row = np.array([counts[term] for term in sorted(counts, key=vocabulary.get)], dtype=np.float64)
        row *= idf[cols]
        norm = np.linalg.norm(row)
        if norm > 0:
            row /= norm
        indices.extend(cols)
        data.extend(row)
        indptr.append(len(indices))

    matrix = sp.csr_matrix(
        (np.asarray(data), np.asarray(indices, dtype=np.int32), np.asarray(indptr, dtype=np.int32)),
        shape=(n_docs, len(vocabulary)),
    )
    model = TfidfModel(vocabulary=vocabulary, idf=idf, max_features=max_features)
    return model, FeatureMatrix(matrix, [d.id for d in corpus.documents], "tfidf")


def _cache_path(cache_dir: Path, model: str, doc_id: str) -> Path:
    safe_model = urllib.parse.quote(model, safe="")
    safe_id = urllib.parse.quote(doc_id, safe="")
    return cache_dir / safe_model / f"{safe_id}.json"


def embed_corpus(corpus: Corpus, gateway, cache_dir: str | Path | None = None) -> FeatureMatrix:
    """Embed all documents through the gateway, rows in corpus order.

    Vectors are cached per (model, doc id) when a cache directory is given so
    repeated runs do not re-bill the endpoint.
    """
    model_name = gateway.config.embed_model
    cache = Path(cache_dir) if cache_dir is not None else None
    vectors: list[np.ndarray | None] = [None] * len(corpus)
    missing: list[int] = []
    for i, doc in enumerate(corpus.documents):
        if cache is not None:
            path = _cache_path(cache, model_name, doc.id)
            if path.exists():
                with open(path, encoding="utf-8") as fh:
                    vectors[i] = np.asarray(json.load(fh), dtype=np.float64)
                continue
        missing.append(i)

    cap = gateway.config.embed_batch_cap
    for start in range(0, len(missing), cap):
        batch = missing[start : start + cap]
        texts = [corpus.documents[i].text for i in batch]
        matrix = gateway.embed(texts)
        for row, i in enumerate(batch):
            vectors[i] = matrix[row]
            if cache is not None:
                path = _cache_path(cache, model_name, corpus.documents[i].id)
                path.parent.mkdir(parents=True, exist_ok=True)
                with open(path, "w", encoding="utf-8") as fh:
                    json.dump(matrix[row].tolist(), fh)

    if not vectors:
        return FeatureMatrix(np.zeros((0, 0), dtype=np.float64), [], "embedding")
    dims = {v.shape[0] for v in vectors}
    if len(dims) != 1:
        raise UserError(f"inconsistent embedding dimensions across documents: {sorted(dims)}")
    stacked = np.vstack(vectors)
    return FeatureMatrix(stacked, [d.id for d in corpus.documents], "embedding")


def cosine_similarity(a, b) -> float:
    """dot(a, b) / (|a| |b|); rejects zero vectors and mismatched shapes."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise UserError(f"vector dimensions differ: {a.shape[0]} vs {b.shape[0]}")
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise UserError("cosine similarity is undefined for zero vectors")
    return float(np.dot(a, b) / (na * nb))
