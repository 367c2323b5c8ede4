"""Cluster-quality metrics (homogeneity, NMI, silhouette) and sweep reports.

All entropies use natural logs; the base cancels in both normalized ratios.
Edge conventions: zero true-label entropy scores homogeneity 1.0, zero mutual
information scores NMI 0.0, and a singleton cluster contributes silhouette 0.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from landmarkpipe import kernels
from landmarkpipe.errors import UserError


def _as_codes(labels) -> np.ndarray:
    """Map arbitrary hashable labels to dense integer codes, first-seen order."""
    mapping: dict = {}
    out = np.empty(len(labels), dtype=np.int64)
    for i, lab in enumerate(labels):
        if lab not in mapping:
            mapping[lab] = len(mapping)
        out[i] = mapping[lab]
    return out


def _entropy_from_counts(counts: np.ndarray) -> float:
    total = counts.sum()
    if total == 0:
        return 0.0
    p = counts[counts > 0] / total
    return float(-(p * np.log(p)).sum())


def _contingency(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    table = np.zeros((u.max() + 1, v.max() + 1), dtype=np.int64)
    np.add.at(table, (u, v), 1)
    return table


def homogeneity(true_labels, pred_clusters) -> float:
    """1 - H(true|pred) / H(true); 1.0 when the true labeling is constant."""
    if len(true_labels) != len(pred_clusters):
        raise UserError(f"label lengths differ: {len(true_labels)} vs {len(pred_clusters)}")
    if len(true_labels) == 0:
        raise UserError("need at least one labeled point")
    u = _as_codes(true_labels)
    v = _as_codes(pred_clusters)
    h_true = _entropy_from_counts(np.bincount(u))
    if h_true == 0.0:
        return 1.0
    table = _contingency(v, u)  # rows: predicted cluster, cols: true class
    n = len(u)
    h_cond = 0.0
    for row in table:
        weight = row.sum() / n
        if weight > 0:
            h_cond += weight * _entropy_from_counts(row)
    return 1.0 - h_cond / h_true


def nmi(labels_u, labels_v) -> float:
    """Mutual information over the average entropy of the two labelings."""
    if len(labels_u) != len(labels_v):
        raise UserError(f"label lengths differ: {len(labels_u)} vs {len(labels_v)}")
    if len(labels_u) == 0:
        raise UserError("need at least one labeled point")
    u = _as_codes(labels_u)
    v = _as_codes(labels_v)
    n = len(u)
    table = _contingency(u, v)
    row_sums = table.sum(axis=1)
    col_sums = table.sum(axis=0)
    mi = 0.0
    for i, j in zip(*np.nonzero(table)):
        nij = table[i, j]
        mi += (nij / n) * np.log(n * nij / (row_sums[i] * col_sums[j]))
    if mi <= 0.0:
        return 0.0
    avg_h = 0.5 * (_entropy_from_counts(row_sums) + _entropy_from_counts(col_sums))
    return float(mi / avg_h)


def silhouette_values(features, assignments, sample_idx=None) -> np.ndarray:
    """Per-point silhouette s(i) = (b - a) / max(a, b) on Euclidean distance.

    a/b always use distances against the full data even when only a sample of
    points is scored. Singleton-cluster points score 0 by convention, as do
    coincident clusters (a = b = 0).
    """
    X = features.dense() if hasattr(features, "dense") else np.asarray(features, dtype=np.float64)
    X = np.ascontiguousarray(X, dtype=np.float64)
    labels = _as_codes(list(assignments))
    n = X.shape[0]
    if labels.shape[0] != n:
        raise UserError("assignments length does not match features")
    k = int(labels.max()) + 1
    if k < 2:
        raise UserError("silhouette needs at least 2 clusters")
    if sample_idx is None:
        sample_idx = np.arange(n, dtype=np.int64)
    sample_idx = np.asarray(sample_idx, dtype=np.int64)

    sums, counts = kernels.cluster_distance_sums(X, labels, k, sample_idx)
    scores = np.zeros(len(sample_idx), dtype=np.float64)
    for pos, i in enumerate(sample_idx):
        own = labels[i]
        if counts[own] <= 1:
            continue  # singleton convention: s = 0
        a = sums[pos, own] / (counts[own] - 1)
        b = np.inf
        for c in range(k):
            if c != own and counts[c] > 0:
                b = min(b, sums[pos, c] / counts[c])
        denom = max(a, b)
        scores[pos] = (b - a) / denom if denom > 0 else 0.0
    return scores


def silhouette(features, assignments, sample_size: int | None = None, seed: int = 0) -> float:
    """Mean per-point silhouette.

    With sample_size set (default: 2000 once n exceeds 10000), the mean runs
    over a seeded uniform point sample while a/b still use distances to the
    full data, so sample_size = n reproduces the exact value.
    """
    n = features.n_docs if hasattr(features, "n_docs") else np.asarray(features).shape[0]
    if sample_size is None and n > 10_000:
        sample_size = 2_000
    if sample_size is None or sample_size >= n:
        sample_idx = np.arange(n, dtype=np.int64)
    else:
        sample_idx = np.sort(np.random.default_rng(seed).choice(n, size=sample_size, replace=False)).astype(np.int64)
    return float(silhouette_values(features, assignments, sample_idx).mean())


@dataclass
class ClusterQualityReport:
    algorithm: str
    k: int
    feature_kind: str
    seed: int | None
    homogeneity: float
    nmi: float
    silhouette: float

    def row(self) -> list:
        return [self.algorithm, self.k, self.feature_kind, self.seed, self.homogeneity, self.nmi, self.silhouette]


def score_model(model, features, class_labels) -> ClusterQualityReport:
    """Metrics for one fitted model against per-doc class labels (None entries
    are excluded from homogeneity/NMI; silhouette never needs labels)."""
    mask = [lab is not None for lab in class_labels]
    true = [lab for lab in class_labels if lab is not None]
    pred = [int(c) for c, keep in zip(model.assignments, mask) if keep]
    return ClusterQualityReport(
        algorithm=model.algorithm,
        k=model.k,
        feature_kind=getattr(features, "kind", "dense"),
        seed=model.seed,
        homogeneity=homogeneity(true, pred) if true else float("nan"),
        nmi=nmi(true, pred) if true else float("nan"),
        silhouette=silhouette(features, model.assignments),
    )


def sweep(features, class_labels, algorithms: list[str], k_list: list[int], seeds: list[int], include_random: bool = True):
    """One report per (algorithm, k, seed) plus a random baseline row per
    configuration. Deterministic algorithms run once per k."""
    from landmarkpipe.clustering import fit_birch, fit_bisecting_kmeans, fit_gmm, fit_hierarchical, random_assignment

    known = {"gmm", "hierarchical", "birch", "bisecting_kmeans", "random"}
    unknown = set(algorithms) - known
    if unknown:
        raise UserError(f"unknown algorithms in sweep: {sorted(unknown)}")

    algos = list(algorithms)
    if include_random and "random" not in algos:
        algos.append("random")

    reports = []
    n = features.n_docs if hasattr(features, "n_docs") else features.shape[0]
    for k in k_list:
        for algo in algos:
            if algo == "hierarchical":
                reports.append(score_model(fit_hierarchical(features, k), features, class_labels))
            elif algo == "birch":
                reports.append(score_model(fit_birch(features, k), features, class_labels))
            elif algo == "gmm":
                for seed in seeds:
                    reports.append(score_model(fit_gmm(features, k, seed=seed), features, class_labels))
            elif algo == "bisecting_kmeans":
                for seed in seeds:
                    reports.append(score_model(fit_bisecting_kmeans(features, k, seed=seed), features, class_labels))
            else:
                for seed in seeds:
                    reports.append(score_model(random_assignment(n, k, seed=seed, features=features), features, class_labels))
    reports.sort(key=lambda r: (r.algorithm, r.k, r.seed if r.seed is not None else -1))
    return reports


SWEEP_COLUMNS = ["algorithm", "k", "feature_kind", "seed", "homogeneity", "nmi", "silhouette"]


def sweep_to_csv(reports, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SWEEP_COLUMNS)
        for report in reports:
            writer.writerow(report.row())


def sweep_to_markdown(reports) -> str:
    lines = [
        "| algorithm | k | homogeneity | NMI | silhouette |",
        "| --- | --- | --- | --- | --- |",
    ]
    for r in reports:
        lines.append(f"| {r.algorithm} | {r.k} | {r.homogeneity:.4f} | {r.nmi:.4f} | {r.silhouette:.4f} |")
    return "\n".join(lines) + "\n"


def first_class_labels(corpus, split: str | None = None, reveal_gold: bool = False) -> list:
    """Primary class per document (first gold label), None when unlabeled.

    Multi-label corpora are scored against their most-important label, which
    is what a single-membership clustering can be pure with respect to.
    """
    docs = corpus.docs_in_split(split) if split else corpus.documents
    out = []
    for d in docs:
        labels = d.visible_labels(reveal_gold)
        out.append(labels[0] if labels else None)
    return out
