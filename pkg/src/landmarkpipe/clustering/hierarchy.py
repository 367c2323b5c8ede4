"""Agglomerative Ward clustering on Euclidean distance.

The merge sequence comes from the nearest-neighbor-chain kernel; cutting the
monotone dendrogram at k clusters applies the n-k cheapest merges in height
order. Ward yields no probabilities, so the ranked affinity list scores each
cluster by the negated distance to its center.
"""

from __future__ import annotations

import numpy as np

from landmarkpipe import kernels
from landmarkpipe.clustering.model import (
    ClusterModel,
    centers_from_assignments,
    distances_to_centers,
    ranked_affinity,
    relabel_first_occurrence,
)
from landmarkpipe.errors import ClusterError


def cut_merges(merge_a: np.ndarray, merge_b: np.ndarray, heights: np.ndarray, n: int, k: int) -> np.ndarray:
    """Labels after undoing the k-1 most expensive merges.

    Stable sort on heights keeps discovery order for ties, so children always
    land before their parent (Ward is monotone).
    """
    order = np.argsort(heights, kind="stable")
    parent = np.arange(2 * n - 1, dtype=np.int64)

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for t in order[: n - k]:
        new_node = n + int(t)
        parent[find(int(merge_a[t]))] = new_node
        parent[find(int(merge_b[t]))] = new_node

    labels = np.fromiter((find(i) for i in range(n)), dtype=np.int64, count=n)
    return relabel_first_occurrence(labels, k)


def fit_hierarchical(features, k: int) -> ClusterModel:
    X = features.dense() if hasattr(features, "dense") else np.asarray(features, dtype=np.float64)
    X = np.ascontiguousarray(X, dtype=np.float64)
    n = X.shape[0]
    if k < 1 or k > n:
        raise ClusterError(f"k={k} infeasible for {n} points")

    merge_a, merge_b, heights = kernels.ward_linkage(X)
    labels = cut_merges(merge_a, merge_b, heights, n, k) if n > 1 else np.zeros(1, dtype=np.int64)
    centers = centers_from_assignments(X, labels, k)
    affinity_ids, affinity_scores = ranked_affinity(-distances_to_centers(X, centers))
    if not np.array_equal(affinity_ids[:, 0], labels):
        # a point can sit nearer a foreign center than its own (Ward optimizes
        # variance, not center distance); the hard assignment wins the head slot
        affinity_ids, affinity_scores = _force_head(affinity_ids, affinity_scores, labels, -distances_to_centers(X, centers))
    return ClusterModel(
        algorithm="hierarchical",
        k=k,
        seed=None,
        assignments=labels,
        centers=centers,
        affinity_ids=affinity_ids,
        affinity_scores=affinity_scores,
    )


def _force_head(affinity_ids, affinity_scores, labels, scores):
    """Put each point's own cluster first, then the best-scoring others."""
    n, k = scores.shape
    width = affinity_ids.shape[1]
    out_ids = np.empty_like(affinity_ids)
    out_scores = np.empty_like(affinity_scores)
    order = np.argsort(-scores, axis=1, kind="stable")
    for i in range(n):
        own = labels[i]
        rest = [c for c in order[i] if c != own][: width - 1]
        ids = [own, *rest]
        out_ids[i] = ids
        out_scores[i] = scores[i, ids]
    return out_ids, out_scores
