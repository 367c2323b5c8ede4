from __future__ import annotations

import numpy as np
import pytest

from landmarkpipe.clustering import (
    ClusterModel,
    fit_birch,
    fit_bisecting_kmeans,
    fit_gmm,
    fit_hierarchical,
    random_assignment,
    top_clusters,
)
from landmarkpipe.clustering.bisect import split_rng, total_sse, two_means
from landmarkpipe.clustering.model import ranked_affinity
from landmarkpipe.errors import ClusterError, UserError
from landmarkpipe.metrics import homogeneity

from .conftest import make_blobs

ALL_FITS = {
    "gmm": lambda X, k: fit_gmm(X, k, seed=42),
    "hierarchical": lambda X, k: fit_hierarchical(X, k),
    "birch": lambda X, k: fit_birch(X, k),
    "bisecting_kmeans": lambda X, k: fit_bisecting_kmeans(X, k, seed=42),
}


def two_blobs(n=40, d=2, distance=10.0, std=0.1, seed=0):
    return make_blobs(n=n, d=d, k=2, seed=seed, scale=distance / 2, std=std)


# -- shared invariants ---------------------------------------------------------


@pytest.mark.parametrize("name", list(ALL_FITS))
def test_assignment_equals_affinity_head(name, blobs6):
    X, _ = blobs6
    model = ALL_FITS[name](X, 6)
    for i in range(0, model.n_points, 37):
        assert top_clusters(model, i, 1)[0] == model.assignments[i]


@pytest.mark.parametrize("name", list(ALL_FITS))
def test_determinism(name, blobs6):
    X, _ = blobs6
    a = ALL_FITS[name](X, 6)
    b = ALL_FITS[name](X, 6)
    assert np.array_equal(a.assignments, b.assignments)
    assert np.array_equal(a.affinity_ids, b.affinity_ids)


@pytest.mark.parametrize("name", list(ALL_FITS))
def test_beats_random_by_half(name, blobs6):
    X, y = blobs6
    model = ALL_FITS[name](X, 6)
    rand = random_assignment(X.shape[0], 6, seed=0, features=X)
    assert homogeneity(y, model.assignments) - homogeneity(y, rand.assignments) >= 0.5


def test_affinity_scores_sorted(blobs6):
    X, _ = blobs6
    for name in ALL_FITS:
        model = ALL_FITS[name](X, 6)
        tail = model.affinity_scores[:, 1:]
        assert np.all(model.affinity_scores[:, 1:-1] >= tail[:, 1:])


# -- GMM ------------------------------------------------------------------------


def test_gmm_separable_two_blobs():
    X, y = two_blobs()
    model = fit_gmm(X, 2, seed=1)
    assert homogeneity(y, model.assignments) == pytest.approx(1.0)


def test_gmm_posteriors_sum_to_one(blobs6):
    X, _ = blobs6
    model = fit_gmm(X, 5, seed=3)  # k=5 means the stored affinity covers all clusters
    sums = model.affinity_scores.sum(axis=1)
    assert np.allclose(sums, 1.0, atol=1e-9)


def test_gmm_six_blobs_recovery(blobs6):
    X, y = blobs6
    model = fit_gmm(X, 6, seed=42)
    assert homogeneity(y, model.assignments) >= 0.95
    assert model.converged
    assert model.reseeds == 0


def test_gmm_ll_trace_monotone(blobs6):
    X, _ = blobs6
    model = fit_gmm(X, 6, seed=42)
    assert model.ll_trace is not None and len(model.ll_trace) >= 2
    assert np.all(np.diff(model.ll_trace) >= -1e-8)


def test_gmm_preconditions():
    X = np.random.default_rng(0).normal(size=(5, 2))
    with pytest.raises(ClusterError):
        fit_gmm(X, 1)
    with pytest.raises(ClusterError):
        fit_gmm(X, 6)


# -- hierarchical ---------------------------------------------------------------


def test_hierarchical_chain_example():
    X = np.array([[0.0], [1.0], [10.0], [11.0]])
    model = fit_hierarchical(X, 2)
    assert list(model.assignments) == [0, 0, 1, 1]


def test_hierarchical_singletons_at_n_equals_k():
    X = np.array([[0.0], [5.0], [9.0]])
    model = fit_hierarchical(X, 3)
    assert sorted(model.assignments) == [0, 1, 2]
    assert len(set(model.assignments.tolist())) == 3


def test_hierarchical_six_blobs(blobs6):
    X, y = blobs6
    model = fit_hierarchical(X, 6)
    assert homogeneity(y, model.assignments) >= 0.95


def test_hierarchical_k_too_large():
    with pytest.raises(ClusterError):
        fit_hierarchical(np.zeros((3, 2)), 4)


# -- birch -----------------------------------------------------------------------


def test_birch_two_distant_blobs():
    X, y = two_blobs()
    model = fit_birch(X, 2)
    assert homogeneity(y, model.assignments) == pytest.approx(1.0)


def test_birch_insertion_order_robustness(blobs6):
    X, y = blobs6
    base = homogeneity(y, fit_birch(X, 6).assignments)
    perm = np.random.default_rng(5).permutation(X.shape[0])
    permuted = homogeneity(y[perm], fit_birch(X[perm], 6).assignments)
    assert abs(base - permuted) <= 0.05


def test_birch_split_survives_coincident_centroids():
    from landmarkpipe.clustering.birch import _Entry, _Node, _split

    node = _Node(is_leaf=True)
    for i in range(4):
        node.entries.append(_Entry(x=np.array([1.0, 1.0]), index=i))
    left, right = _split(node)
    assert left.entries and right.entries


def test_birch_leaf_feasibility():
    X = np.random.default_rng(0).normal(size=(30, 3))
    with pytest.raises(ClusterError, match="threshold"):
        fit_birch(X, 10, threshold=1e6)  # everything collapses into one entry
    with pytest.raises(ClusterError):
        fit_birch(X, 2, threshold=0.0)


# -- bisecting k-means -------------------------------------------------------------


def test_bisecting_k2_equals_plain_two_means():
    X, _ = two_blobs(n=60, d=3)
    model = fit_bisecting_kmeans(X, 2, seed=9)
    labels01, _, _ = two_means(X, split_rng(9, 0, 0))
    # identical partition up to the first-occurrence relabeling
    from landmarkpipe.clustering.model import relabel_first_occurrence

    assert np.array_equal(model.assignments, relabel_first_occurrence(labels01, 2))


def test_bisecting_sse_non_increasing(blobs6):
    X, _ = blobs6
    sses = []
    for k in (2, 3, 4, 6, 8):
        model = fit_bisecting_kmeans(X, k, seed=4)
        sses.append(total_sse(X, model.assignments, k))
    assert all(a >= b - 1e-6 for a, b in zip(sses, sses[1:]))


def test_bisecting_six_blobs(blobs6):
    X, y = blobs6
    model = fit_bisecting_kmeans(X, 6, seed=42)
    assert homogeneity(y, model.assignments) >= 0.90


def test_bisecting_identical_points_cannot_split():
    X = np.ones((8, 2))
    with pytest.raises(ClusterError, match="split"):
        fit_bisecting_kmeans(X, 2, seed=0)


# -- random baseline ---------------------------------------------------------------


def test_random_balanced_partition():
    model = random_assignment(100, 7, seed=3)
    counts = np.bincount(model.assignments, minlength=7)
    assert counts.min() >= 100 // 7
    assert counts.max() <= 100 // 7 + 1


def test_random_singletons_when_n_equals_k():
    model = random_assignment(12, 12, seed=1)
    assert sorted(model.assignments) == list(range(12))
    assert homogeneity(list(range(12)), model.assignments) == pytest.approx(1.0)


def test_random_determinism_and_low_purity(blobs6):
    X, y = blobs6
    a = random_assignment(600, 6, seed=5, features=X)
    b = random_assignment(600, 6, seed=5, features=X)
    assert np.array_equal(a.assignments, b.assignments)
    assert homogeneity(y, a.assignments) < 0.2


def test_random_preconditions():
    with pytest.raises(ClusterError):
        random_assignment(3, 4, seed=0)


# -- model plumbing ------------------------------------------------------------------


def test_top_clusters_ordering():
    scores = np.array([[0.2, 0.7, 0.1]])
    ids, ranked = ranked_affinity(scores)
    assert list(ids[0]) == [1, 0, 2]
    assert list(ranked[0]) == [0.7, 0.2, 0.1]


def test_top_clusters_bounds(blobs6):
    X, _ = blobs6
    model = fit_gmm(X, 6, seed=0)
    with pytest.raises(UserError):
        top_clusters(model, 0, 7)
    with pytest.raises(UserError):
        top_clusters(model, 0, 6)  # only top-5 stored


def test_ranked_affinity_tie_breaks_low_id():
    ids, _ = ranked_affinity(np.array([[0.5, 0.5, 0.1]]))
    assert list(ids[0]) == [0, 1, 2]


def test_model_persistence_roundtrip(tmp_path, blobs6):
    X, _ = blobs6
    model = fit_gmm(X, 6, seed=42)
    model.doc_ids = [f"d{i}" for i in range(X.shape[0])]
    model.save(tmp_path / "m.json")
    back = ClusterModel.load(tmp_path / "m.json")
    assert back.algorithm == "gmm" and back.k == 6 and back.seed == 42
    assert np.array_equal(back.assignments, model.assignments)
    assert np.array_equal(back.affinity_ids, model.affinity_ids)
    assert np.allclose(back.centers, model.centers)
    assert back.doc_ids == model.doc_ids
