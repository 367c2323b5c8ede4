"""k-means++ seeding and Lloyd iterations, shared by GMM init and bisecting."""

from __future__ import annotations

import numpy as np

from landmarkpipe.clustering.model import distances_to_centers


def kmeans_plus_plus(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Classic D^2-weighted seeding; returns k rows of X as initial centers."""
    n = X.shape[0]
    centers = np.empty((k, X.shape[1]), dtype=np.float64)
    first = int(rng.integers(n))
    centers[0] = X[first]
    closest = np.einsum("ij,ij->i", X - centers[0], X - centers[0])
    for j in range(1, k):
        total = closest.sum()
        if total <= 0.0:
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=closest / total))
        centers[j] = X[idx]
        d2 = np.einsum("ij,ij->i", X - centers[j], X - centers[j])
        np.minimum(closest, d2, out=closest)
    return centers


def assign_nearest(X: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """Nearest-center labels; argmin favors the lower cluster id on ties."""
    return np.argmin(distances_to_centers(X, centers), axis=1).astype(np.int64)


def lloyd(
    X: np.ndarray,
    centers: np.ndarray,
    max_iter: int = 100,
    tol: float = 1e-8,
) -> tuple[np.ndarray, np.ndarray, float]:
    """Standard Lloyd loop. Empty clusters are reseeded at the point farthest
    from its current center, keeping the run deterministic.

    Returns (labels, centers, sse).
    """
    centers = centers.copy()
    k = centers.shape[0]
    labels = assign_nearest(X, centers)
    for _ in range(max_iter):
        new_centers = centers.copy()
        counts = np.bincount(labels, minlength=k)
        sums = np.zeros_like(centers)
        np.add.at(sums, labels, X)
        nonzero = counts > 0
        new_centers[nonzero] = sums[nonzero] / counts[nonzero, None]
        for c in np.flatnonzero(~nonzero):
            per_point = np.linalg.norm(X - new_centers[labels], axis=1)
            far = int(np.argmax(per_point))
            new_centers[c] = X[far]
        shift = float(np.max(np.linalg.norm(new_centers - centers, axis=1))) if k else 0.0
        centers = new_centers
        labels = assign_nearest(X, centers)
        if shift <= tol:
            break
    diffs = X - centers[labels]
    sse = float(np.einsum("ij,ij->", diffs, diffs))
    return labels, centers, sse
