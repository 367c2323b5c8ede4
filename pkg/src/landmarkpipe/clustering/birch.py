"""BIRCH: single-pass CF-tree build, then Ward over the leaf centroids.

Each clustering-feature entry keeps (count, linear sum, squared norm sum) plus
the indices it absorbed, so points inherit the final cluster of their entry.
Insertion order is the data order, making fits deterministic.
"""

from __future__ import annotations

import numpy as np

from landmarkpipe import kernels
from landmarkpipe.clustering.hierarchy import cut_merges
from landmarkpipe.clustering.model import (
    ClusterModel,
    centers_from_assignments,
    distances_to_centers,
    ranked_affinity,
    relabel_first_occurrence,
)
from landmarkpipe.errors import ClusterError


class _Entry:
    __slots__ = ("n", "ls", "ss", "child", "points")

    def __init__(self, x: np.ndarray | None = None, index: int | None = None, child: "_Node | None" = None):
        if child is not None:
            self.child = child
            self.n, self.ls, self.ss = child.summary()
            self.points = None
        else:
            self.child = None
            self.n = 1
            self.ls = x.copy()
            self.ss = float(x @ x)
            self.points = [index]

    def centroid(self) -> np.ndarray:
        return self.ls / self.n

    def radius_with(self, x: np.ndarray) -> float:
        n = self.n + 1
        ls = self.ls + x
        ss = self.ss + float(x @ x)
        r2 = ss / n - float(ls @ ls) / (n * n)
        return float(np.sqrt(max(r2, 0.0)))

    def absorb(self, x: np.ndarray, index: int) -> None:
        self.n += 1
        self.ls += x
        self.ss += float(x @ x)
        self.points.append(index)

    def refresh(self) -> None:
        self.n, self.ls, self.ss = self.child.summary()


class _Node:
    __slots__ = ("is_leaf", "entries")

    def __init__(self, is_leaf: bool):
        self.is_leaf = is_leaf
        self.entries: list[_Entry] = []

    def summary(self) -> tuple[int, np.ndarray, float]:
        n = sum(e.n for e in self.entries)
        ls = np.sum([e.ls for e in self.entries], axis=0)
        ss = float(sum(e.ss for e in self.entries))
        return n, ls, ss

    def nearest_entry(self, x: np.ndarray) -> int:
        cents = np.stack([e.centroid() for e in self.entries])
        d2 = np.einsum("ij,ij->i", cents - x, cents - x)
        return int(np.argmin(d2))


def _split(node: _Node) -> tuple[_Node, _Node]:
    """Farthest-pair seeding; each remaining entry joins the nearer half."""
    cents = np.stack([e.centroid() for e in node.entries])
    sq = np.einsum("ij,ij->i", cents, cents)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (cents @ cents.T)
    i, j = np.unravel_index(int(np.argmax(d2)), d2.shape)
    left, right = _Node(node.is_leaf), _Node(node.is_leaf)
    for idx, entry in enumerate(node.entries):
        to_left = d2[idx, i] <= d2[idx, j]
        (left if to_left else right).entries.append(entry)
    # coincident centroids collapse onto one seed; rebalance so neither half
    # comes back empty (an empty CF node has no summary)
    if not right.entries:
        right.entries.append(left.entries.pop())
    elif not left.entries:
        left.entries.append(right.entries.pop())
    return left, right


def _insert(node: _Node, x: np.ndarray, index: int, threshold: float, branching: int):
    """Returns None, or the (left, right) halves when this node split."""
    if node.is_leaf:
        if node.entries:
            best = node.nearest_entry(x)
            if node.entries[best].radius_with(x) <= threshold:
                node.entries[best].absorb(x, index)
                return None
        node.entries.append(_Entry(x=x, index=index))
    else:
        best = node.nearest_entry(x)
        result = _insert(node.entries[best].child, x, index, threshold, branching)
        if result is None:
            node.entries[best].refresh()
            return None
        left, right = result
        node.entries[best : best + 1] = [_Entry(child=left), _Entry(child=right)]
    if len(node.entries) > branching:
        return _split(node)
    return None


def _leaf_entries(node: _Node) -> list[_Entry]:
    if node.is_leaf:
        return list(node.entries)
    out = []
    for entry in node.entries:
        out.extend(_leaf_entries(entry.child))
    return out


def fit_birch(features, k: int, branching: int = 50, threshold: float = 0.5) -> ClusterModel:
    """CF-tree pass over the data, then agglomerative merge of leaf centroids."""
    if threshold <= 0:
        raise ClusterError("threshold must be positive")
    if branching < 2:
        raise ClusterError("branching factor must be at least 2")
    X = features.dense() if hasattr(features, "dense") else np.asarray(features, dtype=np.float64)
    X = np.ascontiguousarray(X, dtype=np.float64)
    n = X.shape[0]
    if k > n:
        raise ClusterError(f"k={k} infeasible for {n} points")

    root = _Node(is_leaf=True)
    for i in range(n):
        result = _insert(root, X[i], i, threshold, branching)
        if result is not None:
            new_root = _Node(is_leaf=False)
            new_root.entries = [_Entry(child=result[0]), _Entry(child=result[1])]
            root = new_root

    entries = _leaf_entries(root)
    if len(entries) < k:
        raise ClusterError(
            f"CF-tree collapsed to {len(entries)} entries (< k={k}); lower the threshold (now {threshold})"
        )

    centroids = np.stack([e.centroid() for e in entries])
    merge_a, merge_b, heights = kernels.ward_linkage(centroids)
    entry_labels = cut_merges(merge_a, merge_b, heights, len(entries), k)

    labels = np.empty(n, dtype=np.int64)
    for entry, lab in zip(entries, entry_labels):
        labels[entry.points] = lab
    labels = relabel_first_occurrence(labels, k)

    centers = centers_from_assignments(X, labels, k)
    scores = -distances_to_centers(X, centers)
    affinity_ids, affinity_scores = ranked_affinity(scores)
    if not np.array_equal(affinity_ids[:, 0], labels):
        from landmarkpipe.clustering.hierarchy import _force_head

        affinity_ids, affinity_scores = _force_head(affinity_ids, affinity_scores, labels, scores)
    return ClusterModel(
        algorithm="birch",
        k=k,
        seed=None,
        assignments=labels,
        centers=centers,
        affinity_ids=affinity_ids,
        affinity_scores=affinity_scores,
    )
