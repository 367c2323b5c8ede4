"""Bisecting k-means: repeatedly 2-means-split the cluster with largest SSE."""

from __future__ import annotations

import numpy as np

from landmarkpipe.clustering.hierarchy import _force_head
from landmarkpipe.clustering.kmeans import kmeans_plus_plus, lloyd
from landmarkpipe.clustering.model import (
    ClusterModel,
    centers_from_assignments,
    distances_to_centers,
    ranked_affinity,
    relabel_first_occurrence,
)
from landmarkpipe.errors import ClusterError

MAX_SPLIT_RETRIES = 5


def split_rng(seed: int, split_index: int, attempt: int) -> np.random.Generator:
    """Per-split generator; exposed so a plain 2-means run can reproduce it."""
    return np.random.default_rng([seed, split_index, attempt])


def two_means(X: np.ndarray, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray, float]:
    centers = kmeans_plus_plus(X, 2, rng)
    return lloyd(X, centers)


def fit_bisecting_kmeans(features, k: int, seed: int = 0) -> ClusterModel:
    """Split until k clusters; each split retries up to 5 fresh seeds if one
    half comes back empty (identical points cannot be bisected)."""
    if k < 2:
        raise ClusterError("bisecting k-means needs k >= 2")
    X = features.dense() if hasattr(features, "dense") else np.asarray(features, dtype=np.float64)
    X = np.ascontiguousarray(X, dtype=np.float64)
    n = X.shape[0]
    if n < k:
        raise ClusterError(f"k={k} infeasible for {n} points")

    clusters: list[np.ndarray] = [np.arange(n, dtype=np.int64)]
    sses: list[float] = [_sse(X, clusters[0])]

    for split_index in range(k - 1):
        target = int(np.argmax(sses))
        member_idx = clusters[target]
        halves = None
        for attempt in range(MAX_SPLIT_RETRIES):
            labels01, _, _ = two_means(X[member_idx], split_rng(seed, split_index, attempt))
            left = member_idx[labels01 == 0]
            right = member_idx[labels01 == 1]
            if left.size and right.size:
                halves = (left, right)
                break
        if halves is None:
            raise ClusterError(
                f"cluster of {member_idx.size} points would not split after {MAX_SPLIT_RETRIES} attempts "
                "(identical points?); reduce k"
            )
        clusters[target : target + 1] = [halves[0], halves[1]]
        sses[target : target + 1] = [_sse(X, halves[0]), _sse(X, halves[1])]

    labels = np.empty(n, dtype=np.int64)
    for cid, members in enumerate(clusters):
        labels[members] = cid
    labels = relabel_first_occurrence(labels, k)

    centers = centers_from_assignments(X, labels, k)
    scores = -distances_to_centers(X, centers)
    affinity_ids, affinity_scores = ranked_affinity(scores)
    if not np.array_equal(affinity_ids[:, 0], labels):
        affinity_ids, affinity_scores = _force_head(affinity_ids, affinity_scores, labels, scores)
    return ClusterModel(
        algorithm="bisecting_kmeans",
        k=k,
        seed=seed,
        assignments=labels,
        centers=centers,
        affinity_ids=affinity_ids,
        affinity_scores=affinity_scores,
    )


def total_sse(X: np.ndarray, labels: np.ndarray, k: int) -> float:
    centers = centers_from_assignments(np.ascontiguousarray(X, dtype=np.float64), labels, k)
    diffs = X - centers[labels]
    return float(np.einsum("ij,ij->", diffs, diffs))


def _sse(X: np.ndarray, members: np.ndarray) -> float:
    block = X[members]
    center = block.mean(axis=0)
    diffs = block - center
    return float(np.einsum("ij,ij->", diffs, diffs))
