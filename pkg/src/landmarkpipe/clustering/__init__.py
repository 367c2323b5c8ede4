"""Clustering algorithms: GMM (EM), Ward hierarchical, BIRCH, bisecting
k-means, and the random baseline. All expose the same ClusterModel with hard
assignments plus ranked per-point cluster affinities."""

from landmarkpipe.clustering.baseline import random_assignment
from landmarkpipe.clustering.birch import fit_birch
from landmarkpipe.clustering.bisect import fit_bisecting_kmeans
from landmarkpipe.clustering.gmm import GmmConfig, fit_gmm
from landmarkpipe.clustering.hierarchy import fit_hierarchical
from landmarkpipe.clustering.model import ClusterModel, top_clusters

__all__ = [
    "ClusterModel",
    "GmmConfig",
    "fit_gmm",
    "fit_hierarchical",
    "fit_birch",
    "fit_bisecting_kmeans",
    "random_assignment",
    "top_clusters",
]
