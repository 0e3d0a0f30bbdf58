"""k-means on learned embeddings and clustering quality metrics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

__all__ = ["KmeansResult", "kmeans", "accuracy", "nmi", "purity"]


@dataclass
class KmeansResult:
    """Outcome of the best k-means restart.

    Attributes
    ----------
    labels : int array, shape (n,)
        Cluster index per sample, values in ``[0, c)``.
    centroids : array, shape (c, d)
    inertia : float
        Sum of squared distances of points to their assigned centroid.
    iterations : int
        Lloyd iterations performed by the winning restart.
    """

    labels: np.ndarray
    centroids: np.ndarray
    inertia: float
    iterations: int


def _pairwise_sq_dists(points, centers):
    # (n, c) matrix of squared euclidean distances, clipped at zero.
    sq = (
        np.sum(points**2, axis=1)[:, None]
        - 2.0 * points @ centers.T
        + np.sum(centers**2, axis=1)[None, :]
    )
    return np.maximum(sq, 0.0)


def _plus_plus_init(points, n_clusters, rng):
    n = points.shape[0]
    centers = np.empty((n_clusters, points.shape[1]))
    centers[0] = points[rng.integers(n)]
    closest = _pairwise_sq_dists(points, centers[:1])[:, 0]
    for c in range(1, n_clusters):
        total = closest.sum()
        if total <= 0.0:
            # Every point coincides with a chosen center; any pick works.
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=closest / total))
        centers[c] = points[idx]
        closest = np.minimum(closest, _pairwise_sq_dists(points, centers[c : c + 1])[:, 0])
    return centers


def _update_centers(points, labels, centers):
    c = centers.shape[0]
    new_centers = centers.copy()
    counts = np.bincount(labels, minlength=c)
    empty = np.flatnonzero(counts == 0)
    for j in range(c):
        if counts[j] > 0:
            new_centers[j] = points[labels == j].mean(axis=0)
    if empty.size:
        # Re-seed each empty cluster at the point farthest from its
        # assigned centroid, never reusing a point.
        dist = _pairwise_sq_dists(points, new_centers)
        to_center = dist[np.arange(points.shape[0]), labels]
        order = np.argsort(-to_center, kind="stable")
        for j, idx in zip(empty, order):
            new_centers[j] = points[idx]
    return new_centers


def _single_run(points, n_clusters, rng, max_iter):
    centers = _plus_plus_init(points, n_clusters, rng)
    labels = np.argmin(_pairwise_sq_dists(points, centers), axis=1)
    iterations = 0
    for _ in range(max_iter):
        centers = _update_centers(points, labels, centers)
        new_labels = np.argmin(_pairwise_sq_dists(points, centers), axis=1)
        iterations += 1
        converged = np.array_equal(new_labels, labels)
        labels = new_labels
        if converged:
            break
    inertia = float(
        np.sum((points - centers[labels]) ** 2)
    )
    return labels, centers, inertia, iterations


def kmeans(points, n_clusters: int, seed: int = 0, max_iter: int = 300, restarts: int = 10) -> KmeansResult:
    """Cluster points with k-means++ seeding and Lloyd refinement.

    Runs ``restarts`` independent initializations from seeds derived off
    ``seed`` and keeps the run with the smallest inertia (ties favor the
    earliest restart).  Empty clusters are re-seeded at the point
    farthest from its assigned centroid.  Bit-for-bit reproducible for a
    fixed seed.

    Parameters
    ----------
    points : array, shape (n, d)
    n_clusters : int
        Number of clusters, at most ``n``.
    seed : int
    max_iter : int
        Lloyd iteration cap per restart.
    restarts : int

    Returns
    -------
    KmeansResult
    """
    points = np.asarray(points, dtype=float)
    if points.ndim != 2 or points.shape[0] == 0:
        raise ValueError(f"points must be a non-empty matrix, got shape {points.shape}")
    if not np.isfinite(points).all():
        raise ValueError("points contain non-finite entries")
    if not 1 <= n_clusters <= points.shape[0]:
        raise ValueError(
            f"n_clusters must be in [1, {points.shape[0]}], got {n_clusters}"
        )
    if restarts < 1:
        raise ValueError(f"restarts must be at least 1, got {restarts}")
    best = None
    for child_seed in np.random.SeedSequence(seed).spawn(restarts):
        rng = np.random.default_rng(child_seed)
        labels, centers, inertia, iterations = _single_run(
            points, n_clusters, rng, max_iter
        )
        if best is None or inertia < best.inertia:
            best = KmeansResult(labels, centers, inertia, iterations)
    return best


def _contingency(pred, truth):
    pred = np.asarray(pred).ravel()
    truth = np.asarray(truth).ravel()
    if pred.size != truth.size:
        raise ValueError(
            f"label vectors must have equal length, got {pred.size} and {truth.size}"
        )
    if pred.size == 0:
        raise ValueError("label vectors must be non-empty")
    _, pred_idx = np.unique(pred, return_inverse=True)
    _, truth_idx = np.unique(truth, return_inverse=True)
    table = np.zeros((pred_idx.max() + 1, truth_idx.max() + 1))
    np.add.at(table, (pred_idx, truth_idx), 1.0)
    return table


def accuracy(pred, truth) -> float:
    """Clustering accuracy under the best cluster-to-class assignment.

    The contingency table is zero-padded to a square and matched with
    the Hungarian algorithm, so the result is invariant to relabeling
    of either argument.
    """
    table = _contingency(pred, truth)
    k = max(table.shape)
    padded = np.zeros((k, k))
    padded[: table.shape[0], : table.shape[1]] = table
    rows, cols = linear_sum_assignment(-padded)
    return float(padded[rows, cols].sum() / table.sum())


def nmi(pred, truth) -> float:
    """Normalized mutual information with sqrt-of-entropies normalization.

    Natural logarithms throughout; the value is base independent.  When
    either labeling has zero entropy the result is 1 if the two
    partitions are identical and 0 otherwise.
    """
    table = _contingency(pred, truth)
    n = table.sum()
    p_pred = table.sum(axis=1) / n
    p_truth = table.sum(axis=0) / n
    h_pred = -np.sum(p_pred * np.log(p_pred, where=p_pred > 0, out=np.zeros_like(p_pred)))
    h_truth = -np.sum(
        p_truth * np.log(p_truth, where=p_truth > 0, out=np.zeros_like(p_truth))
    )
    if h_pred <= 0.0 and h_truth <= 0.0:
        return 1.0
    if h_pred <= 0.0 or h_truth <= 0.0:
        return 0.0
    joint = table / n
    outer = np.outer(p_pred, p_truth)
    mask = joint > 0
    mutual = float(np.sum(joint[mask] * np.log(joint[mask] / outer[mask])))
    return float(min(1.0, max(0.0, mutual / np.sqrt(h_pred * h_truth))))


def purity(pred, truth) -> float:
    """Fraction of samples in the majority class of their cluster."""
    table = _contingency(pred, truth)
    return float(table.max(axis=1).sum() / table.sum())
