"""Diagonal-covariance Gaussian mixture fitted by EM.

The variance floor clamps (sigma^2 = max(var, reg_covar)) instead of adding
the floor, which keeps every M-step an exact constrained maximizer and hence
the log-likelihood trace non-decreasing up to float round-off. The trace is
kept on the returned model so callers can audit convergence.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from landmarkpipe.clustering.kmeans import kmeans_plus_plus, lloyd
from landmarkpipe.clustering.model import ClusterModel, ranked_affinity
from landmarkpipe.errors import ClusterError

_LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass
class GmmConfig:
    covariance: str = "diagonal"
    reg_covar: float = 1e-6
    max_iter: int = 200
    tol: float = 1e-4
    init: str = "kmeans_plus_plus"
    n_init: int = 10

    def __post_init__(self):
        if self.covariance != "diagonal":
            raise ClusterError("only diagonal covariance is supported")
        if self.init != "kmeans_plus_plus":
            raise ClusterError("only kmeans_plus_plus initialization is supported")
        if self.reg_covar < 1e-10:
            raise ClusterError("reg_covar must be >= 1e-10")
        if self.n_init < 1:
            raise ClusterError("n_init must be at least 1")


def _log_prob(X, means, variances, log_weights):
    """(n, k) joint log density log w_j + log N(x | mu_j, diag var_j)."""
    precision = 1.0 / variances
    quad = (X**2) @ precision.T - 2.0 * (X @ (means * precision).T) + np.einsum("jd,jd->j", means**2, precision)[None, :]
    log_det = np.log(variances).sum(axis=1)
    return log_weights[None, :] - 0.5 * (X.shape[1] * _LOG_2PI + log_det[None, :] + quad)


def _e_step(X, means, variances, weights):
    joint = _log_prob(X, means, variances, np.log(weights))
    row_max = joint.max(axis=1, keepdims=True)
    log_norm = row_max + np.log(np.exp(joint - row_max).sum(axis=1, keepdims=True))
    resp = np.exp(joint - log_norm)
    return resp, float(log_norm.sum())


def fit_gmm(features, k: int, cfg: GmmConfig | None = None, seed: int = 0) -> ClusterModel:
    """EM fit; affinity scores are the posterior responsibilities.

    Components that lose all responsibility are reseeded at the point farthest
    from every current mean (counted on the model's `reseeds`). Returns the
    best-so-far state with converged=False if max_iter runs out.
    """
    cfg = cfg or GmmConfig()
    X = features.dense() if hasattr(features, "dense") else np.asarray(features, dtype=np.float64)
    X = np.ascontiguousarray(X, dtype=np.float64)
    n, d = X.shape
    if k < 2:
        raise ClusterError("GMM needs k >= 2")
    if n < k:
        raise ClusterError(f"cannot fit {k} components on {n} points")

    # best-of-n_init Lloyd-refined k-means++ seeding; EM then runs once
    best_means, best_hard, best_sse = None, None, np.inf
    for trial in range(cfg.n_init):
        trial_rng = np.random.default_rng([seed, trial])
        hard, means, sse = lloyd(X, kmeans_plus_plus(X, k, trial_rng))
        if sse < best_sse:
            best_means, best_hard, best_sse = means, hard, sse
    means, hard = best_means, best_hard
    resp = np.full((n, k), 1e-10)
    resp[np.arange(n), hard] = 1.0
    resp /= resp.sum(axis=1, keepdims=True)

    global_var = np.maximum(X.var(axis=0), cfg.reg_covar)
    variances = np.tile(global_var, (k, 1))
    weights = np.full(k, 1.0 / k)

    def m_step(resp):
        nk = resp.sum(axis=0)
        weights = nk / n
        means = (resp.T @ X) / nk[:, None]
        second = (resp.T @ (X**2)) / nk[:, None]
        variances = np.maximum(second - means**2, cfg.reg_covar)
        return weights, means, variances

    weights, means, variances = m_step(resp)

    ll_trace: list[float] = []
    reseeds = 0
    converged = False
    prev_ll = -np.inf
    for _ in range(cfg.max_iter):
        resp, ll = _e_step(X, means, variances, weights)
        nk = resp.sum(axis=0)
        dead = np.flatnonzero(nk < 1e-8)
        if dead.size:
            # farthest point from all current means restarts each dead component
            dist = _min_dists(X, means)
            for j in dead:
                far = int(np.argmax(dist))
                means[j] = X[far]
                variances[j] = global_var
                weights[j] = 1.0 / n
                dist[far] = -1.0
                reseeds += 1
            weights /= weights.sum()
            prev_ll = -np.inf
            continue
        ll_trace.append(ll)
        if np.isfinite(prev_ll) and abs(ll - prev_ll) / n < cfg.tol:
            converged = True
            break
        prev_ll = ll
        weights, means, variances = m_step(resp)
    else:
        resp, ll = _e_step(X, means, variances, weights)
        ll_trace.append(ll)

    affinity_ids, affinity_scores = ranked_affinity(resp)
    assignments = affinity_ids[:, 0]
    return ClusterModel(
        algorithm="gmm",
        k=k,
        seed=seed,
        assignments=assignments,
        centers=means.copy(),
        affinity_ids=affinity_ids,
        affinity_scores=affinity_scores,
        converged=converged,
        reseeds=reseeds,
        ll_trace=np.asarray(ll_trace),
    )


def _min_dists(X, means):
    sq_x = np.einsum("ij,ij->i", X, X)[:, None]
    sq_m = np.einsum("ij,ij->i", means, means)[None, :]
    d2 = sq_x + sq_m - 2.0 * (X @ means.T)
    np.maximum(d2, 0.0, out=d2)
    return np.sqrt(d2).min(axis=1)
