"""Fitted-clustering container shared by every algorithm.

Besides hard assignments, models carry a ranked per-point affinity list
(top-5 by default) used downstream to find a document's nearest clusters for
retrieval. assignments[i] always equals the head of point i's affinity list.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from landmarkpipe.errors import ClusterError, UserError

AFFINITY_WIDTH = 5


@dataclass
class ClusterModel:
    algorithm: str
    k: int
    seed: int | None
    assignments: np.ndarray
    centers: np.ndarray
    affinity_ids: np.ndarray
    affinity_scores: np.ndarray
    doc_ids: list[str] | None = None
    converged: bool = True
    reseeds: int = 0
    ll_trace: np.ndarray | None = None

    def __post_init__(self):
        self.assignments = np.asarray(self.assignments, dtype=np.int64)
        n = self.assignments.shape[0]
        if n and (self.assignments.min() < 0 or self.assignments.max() >= self.k):
            raise ClusterError("assignments outside [0, k)")
        if self.centers.shape[0] != self.k:
            raise ClusterError(f"{self.centers.shape[0]} centers for k={self.k}")
        if self.affinity_ids.shape != self.affinity_scores.shape or self.affinity_ids.shape[0] != n:
            raise ClusterError("affinity arrays misshaped")
        if n and not np.array_equal(self.affinity_ids[:, 0], self.assignments):
            raise ClusterError("affinity head disagrees with assignments")

    @property
    def n_points(self) -> int:
        return self.assignments.shape[0]

    @property
    def affinity_width(self) -> int:
        return self.affinity_ids.shape[1]

    def members(self, cluster_id: int) -> np.ndarray:
        return np.flatnonzero(self.assignments == cluster_id)

    def to_json(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "k": self.k,
            "seed": self.seed,
            "assignments": self.assignments.tolist(),
            "centers": self.centers.tolist(),
            "affinity_ids": self.affinity_ids.tolist(),
            "affinity_scores": self.affinity_scores.tolist(),
            "doc_ids": self.doc_ids,
            "converged": self.converged,
            "reseeds": self.reseeds,
        }

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh)

    @classmethod
    def load(cls, path: str | Path) -> "ClusterModel":
        with open(path, encoding="utf-8") as fh:
            payload = json.load(fh)
        return cls(
            algorithm=payload["algorithm"],
            k=payload["k"],
            seed=payload["seed"],
            assignments=np.asarray(payload["assignments"], dtype=np.int64),
            centers=np.asarray(payload["centers"], dtype=np.float64),
            affinity_ids=np.asarray(payload["affinity_ids"], dtype=np.int64),
            affinity_scores=np.asarray(payload["affinity_scores"], dtype=np.float64),
            doc_ids=payload.get("doc_ids"),
            converged=payload.get("converged", True),
            reseeds=payload.get("reseeds", 0),
        )


def top_clusters(model: ClusterModel, doc_index: int, m: int) -> list[int]:
    """The m most likely clusters for a point, best first."""
    if m > model.k:
        raise UserError(f"asked for top {m} of only {model.k} clusters")
    if m > model.affinity_width:
        raise UserError(f"model stores only the top {model.affinity_width} affinities")
    return [int(c) for c in model.affinity_ids[doc_index, :m]]


def ranked_affinity(scores: np.ndarray, width: int = AFFINITY_WIDTH) -> tuple[np.ndarray, np.ndarray]:
    """Rank an (n, k) score matrix into (ids, scores) top-`width` lists.

    Descending score, ties broken by the lower cluster id (stable sort on the
    negated scores).
    """
    k = scores.shape[1]
    width = min(width, k)
    order = np.argsort(-scores, axis=1, kind="stable")[:, :width]
    ranked = np.take_along_axis(scores, order, axis=1)
    return order.astype(np.int64), ranked.astype(np.float64)


def centers_from_assignments(X: np.ndarray, labels: np.ndarray, k: int) -> np.ndarray:
    centers = np.zeros((k, X.shape[1]), dtype=np.float64)
    counts = np.bincount(labels, minlength=k).astype(np.float64)
    np.add.at(centers, labels, X)
    nonzero = counts > 0
    centers[nonzero] /= counts[nonzero, None]
    return centers


def distances_to_centers(X: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """Euclidean (n, k) distance matrix, clipped against negative round-off."""
    sq_x = np.einsum("ij,ij->i", X, X)[:, None]
    sq_c = np.einsum("ij,ij->i", centers, centers)[None, :]
    d2 = sq_x + sq_c - 2.0 * (X @ centers.T)
    np.maximum(d2, 0.0, out=d2)
    return np.sqrt(d2)


def relabel_first_occurrence(labels: np.ndarray, k: int) -> np.ndarray:
    """Renumber cluster ids in order of first appearance (stable across runs)."""
    mapping: dict[int, int] = {}
    out = np.empty_like(labels)
    for i, lab in enumerate(labels):
        if lab not in mapping:
            mapping[int(lab)] = len(mapping)
        out[i] = mapping[int(lab)]
    if len(mapping) != k:
        raise ClusterError(f"expected {k} clusters, produced {len(mapping)}")
    return out
