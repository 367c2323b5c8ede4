"""Random-membership control used by the sweep reports and ablations."""

from __future__ import annotations

import numpy as np

from landmarkpipe.clustering.model import AFFINITY_WIDTH, ClusterModel, centers_from_assignments
from landmarkpipe.errors import ClusterError


def random_assignment(n: int, k: int, seed: int = 0, features=None) -> ClusterModel:
    """Seeded balanced random partition: shuffle, then deal round-robin.

    Every cluster gets floor(n/k) or ceil(n/k) points, so n == k forces
    singletons. Centers are the means of the assigned points when features
    are supplied, zero-width otherwise.
    """
    if k > n:
        raise ClusterError(f"k={k} exceeds n={n}")
    if k < 1:
        raise ClusterError("k must be positive")
    order = np.random.default_rng(seed).permutation(n)
    labels = np.empty(n, dtype=np.int64)
    labels[order] = np.arange(n) % k

    if features is not None:
        X = features.dense() if hasattr(features, "dense") else np.asarray(features, dtype=np.float64)
        centers = centers_from_assignments(np.ascontiguousarray(X, dtype=np.float64), labels, k)
    else:
        centers = np.zeros((k, 0), dtype=np.float64)

    width = min(AFFINITY_WIDTH, k)
    affinity_ids = np.empty((n, width), dtype=np.int64)
    affinity_scores = np.zeros((n, width), dtype=np.float64)
    affinity_scores[:, 0] = 1.0
    others = np.arange(k, dtype=np.int64)
    for i in range(n):
        own = labels[i]
        affinity_ids[i, 0] = own
        if width > 1:
            rest = others[others != own][: width - 1]
            affinity_ids[i, 1:] = rest

    return ClusterModel(
        algorithm="random",
        k=k,
        seed=seed,
        assignments=labels,
        centers=centers,
        affinity_ids=affinity_ids,
        affinity_scores=affinity_scores,
    )
