"""Input graph construction: similarity, LLE, anchors, bipartite graphs.

All builders return :class:`ViewGraph` values.  Feature matrices are
plain (n, d) arrays with one row per sample.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .clustering import kmeans

__all__ = [
    "ViewGraph",
    "AnchorSet",
    "gaussian_knn_graph",
    "lle_weights",
    "select_anchors_svd",
    "select_anchors_kmeans",
    "bipartite_graph",
    "DegreeNormalized",
    "degree_and_normalize",
]

_KINDS = ("similarity", "lle", "bipartite")


@dataclass
class ViewGraph:
    """A per-view graph over samples (square) or samples x anchors.

    ``kind`` records how the graph was built; similarity and bipartite
    graphs must be entrywise nonnegative, LLE weight graphs may carry
    negative reconstruction coefficients.  When ``row_stochastic`` every
    row sums to one.
    """

    values: np.ndarray
    kind: str
    row_stochastic: bool = False

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2:
            raise ValueError(f"graph values must be a matrix, got ndim={self.values.ndim}")
        if not np.isfinite(self.values).all():
            raise ValueError("graph values contain non-finite entries")
        if self.kind not in _KINDS:
            raise ValueError(f"kind must be one of {_KINDS}, got {self.kind!r}")
        if self.kind in ("similarity", "bipartite") and (self.values < 0).any():
            raise ValueError(f"{self.kind} graph has negative entries")
        if self.row_stochastic:
            sums = self.values.sum(axis=1)
            if np.abs(sums - 1.0).max() > 1e-10:
                raise ValueError("row_stochastic graph has rows not summing to 1")

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class AnchorSet:
    """Strictly increasing sample indices chosen as anchors."""

    indices: tuple[int, ...]
    method: str

    def __post_init__(self):
        object.__setattr__(self, "indices", tuple(int(i) for i in self.indices))
        if not self.indices:
            raise ValueError("anchor set must not be empty")
        if any(b <= a for a, b in zip(self.indices, self.indices[1:])):
            raise ValueError("anchor indices must be strictly increasing")
        if self.indices[0] < 0:
            raise ValueError("anchor indices must be nonnegative")

    def __len__(self) -> int:
        return len(self.indices)

    def to_dict(self) -> dict:
        return {"method": self.method, "indices": list(self.indices)}

    @classmethod
    def from_dict(cls, payload: dict) -> "AnchorSet":
        return cls(indices=tuple(payload["indices"]), method=str(payload["method"]))


def _as_features(x, name: str = "features") -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 2:
        raise ValueError(f"{name} must be a sample-by-feature matrix, got ndim={x.ndim}")
    if x.shape[0] < 2:
        raise ValueError(f"{name} needs at least 2 samples, got {x.shape[0]}")
    if not np.isfinite(x).all():
        raise ValueError(f"{name} contains non-finite entries")
    return x


def _sq_dists(a, b):
    sq = (
        np.sum(a**2, axis=1)[:, None]
        - 2.0 * a @ b.T
        + np.sum(b**2, axis=1)[None, :]
    )
    return np.maximum(sq, 0.0)


def _knn_indices(x, k):
    # k nearest neighbors of every row, self excluded, distance ties
    # broken toward the lower sample index.
    d2 = _sq_dists(x, x)
    np.fill_diagonal(d2, np.inf)
    order = np.argsort(d2, axis=1, kind="stable")
    return order[:, :k], d2


def gaussian_knn_graph(x, k: int, sigma: float | None = None) -> ViewGraph:
    """Symmetrized Gaussian similarity graph over k nearest neighbors.

    Entry (i, j) is ``exp(-||x_i - x_j||^2 / (2 sigma^2))`` when j is
    among the k nearest neighbors of i (self excluded), zero otherwise,
    then symmetrized as ``(S + S.T) / 2``.

    Parameters
    ----------
    x : array, shape (n, d)
    k : int
        Neighbor count, ``1 <= k < n``.
    sigma : float, optional
        Bandwidth.  Default is the median distance over all retained
        neighbor pairs.

    Returns
    -------
    ViewGraph
        ``kind='similarity'``, symmetric with zero diagonal.
    """
    x = _as_features(x)
    n = x.shape[0]
    if not 1 <= k < n:
        raise ValueError(f"k must satisfy 1 <= k < n={n}, got {k}")
    neighbors, d2 = _knn_indices(x, k)
    retained = np.take_along_axis(d2, neighbors, axis=1)
    if sigma is None:
        sigma = float(np.median(np.sqrt(retained)))
        if sigma <= 0.0:
            raise ValueError(
                "degenerate bandwidth: median neighbor distance is zero; "
                "pass an explicit sigma"
            )
    if not sigma > 0:
        raise ValueError(f"sigma must be strictly positive, got {sigma}")
    s = np.zeros((n, n))
    weights = np.exp(-retained / (2.0 * sigma**2))
    np.put_along_axis(s, neighbors, weights, axis=1)
    return ViewGraph((s + s.T) / 2.0, kind="similarity")


def lle_weights(x, k: int, reg: float = 1e-3) -> ViewGraph:
    """Locally linear reconstruction weights over k nearest neighbors.

    Row i minimizes ``||x_i - sum_j s_ij x_j||^2`` over its neighbors
    subject to the weights summing to one, solved through the local
    Gram system ``(C + reg * trace(C) / k * I) w = 1`` followed by
    normalization.  When the local Gram matrix has zero trace (all
    neighbors coincide with x_i) the regularizer falls back to
    ``reg * I`` so the constrained solution stays defined.

    Parameters
    ----------
    x : array, shape (n, d)
    k : int
        Neighbor count, ``1 <= k < n``.
    reg : float
        Nonnegative Tikhonov factor relative to the Gram trace.

    Returns
    -------
    ViewGraph
        ``kind='lle'``, row stochastic; entries may be negative.
    """
    x = _as_features(x)
    n = x.shape[0]
    if not 1 <= k < n:
        raise ValueError(f"k must satisfy 1 <= k < n={n}, got {k}")
    if reg < 0:
        raise ValueError(f"reg must be nonnegative, got {reg}")
    neighbors, _ = _knn_indices(x, k)
    s = np.zeros((n, n))
    ones = np.ones(k)
    for i in range(n):
        z = x[neighbors[i]] - x[i]
        gram = z @ z.T
        trace = float(np.trace(gram))
        if reg > 0:
            gram = gram + (reg * trace / k if trace > 0 else reg) * np.eye(k)
        try:
            w = np.linalg.solve(gram, ones)
        except np.linalg.LinAlgError as exc:
            raise ValueError(
                f"singular local Gram system at sample {i}; "
                "a positive reg is required"
            ) from exc
        total = w.sum()
        if not np.isfinite(total) or abs(total) < 1e-12:
            raise ValueError(
                f"ill-conditioned local Gram system at sample {i}; "
                "a positive reg is required"
            )
        s[i, neighbors[i]] = w / total
    return ViewGraph(s, kind="lle", row_stochastic=True)


def _standardized_concat(views: Sequence[np.ndarray]) -> np.ndarray:
    mats = [_as_features(v, f"view {i}") for i, v in enumerate(views)]
    n = mats[0].shape[0]
    for i, m in enumerate(mats):
        if m.shape[0] != n:
            raise ValueError(
                f"views must share the sample count: view 0 has {n}, view {i} has {m.shape[0]}"
            )
    concat = np.concatenate(mats, axis=1)
    mean = concat.mean(axis=0)
    std = concat.std(axis=0)
    return (concat - mean) / np.maximum(std, 1e-12)


def _view_list(views) -> list[np.ndarray]:
    return list(getattr(views, "views", views))


def select_anchors_svd(views, k: int) -> AnchorSet:
    """Pick anchors by leverage scores of the top left-singular subspace.

    Views are standardized per feature and concatenated column-wise;
    each sample is scored by its squared row norm in the subspace of
    the top ``r = min(k, total_dim, n)`` left singular vectors.  The k
    highest-scoring samples win, ties broken by the lower index.
    """
    mats = _view_list(views)
    concat = _standardized_concat(mats)
    n = concat.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k must satisfy 1 <= k <= n={n}, got {k}")
    r = min(k, concat.shape[1], n)
    u, _, _ = np.linalg.svd(concat, full_matrices=False)
    scores = np.sum(u[:, :r] ** 2, axis=1)
    ranked = np.argsort(-scores, kind="stable")
    chosen = np.sort(ranked[:k])
    return AnchorSet(indices=tuple(int(i) for i in chosen), method="svd-leverage")


def select_anchors_kmeans(views, k: int, seed: int = 0) -> AnchorSet:
    """Pick anchors as the samples nearest the k-means centroids.

    Clusters the standardized concatenated features into k groups and
    maps every centroid to its nearest sample, resolving duplicate hits
    by the next-nearest sample.
    """
    mats = _view_list(views)
    concat = _standardized_concat(mats)
    n = concat.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k must satisfy 1 <= k <= n={n}, got {k}")
    result = kmeans(concat, k, seed=seed)
    d2 = _sq_dists(result.centroids, concat)
    taken: set[int] = set()
    chosen = []
    for c in range(k):
        for idx in np.argsort(d2[c], kind="stable"):
            if int(idx) not in taken:
                taken.add(int(idx))
                chosen.append(int(idx))
                break
    return AnchorSet(indices=tuple(sorted(chosen)), method="kmeans")


def bipartite_graph(x, anchor_points, k: int) -> ViewGraph:
    """Adaptive-neighbor bipartite graph from samples to anchors.

    Row i places weight on its k nearest anchors using the closed form
    over sorted squared distances ``d_(1) <= ... <= d_(k+1)``:

        w_(j) = (d_(k+1) - d_(j)) / (k * d_(k+1) - sum_{j' <= k} d_(j'))

    which solves the adaptive-neighbor assignment problem and makes
    every row sum to one.  Rows where all k+1 distances tie fall back
    to uniform weights 1/k.

    Parameters
    ----------
    x : array, shape (n, d)
    anchor_points : array, shape (K, d)
        Anchor feature rows.
    k : int
        Neighbor count, ``1 <= k < K``.

    Returns
    -------
    ViewGraph
        ``kind='bipartite'``, shape (n, K), row stochastic.
    """
    x = _as_features(x)
    anchor_points = np.asarray(anchor_points, dtype=float)
    if anchor_points.ndim != 2 or anchor_points.shape[1] != x.shape[1]:
        raise ValueError(
            f"anchor points must be (K, {x.shape[1]}), got {anchor_points.shape}"
        )
    n_anchors = anchor_points.shape[0]
    if not 1 <= k < n_anchors:
        raise ValueError(f"k must satisfy 1 <= k < K={n_anchors}, got {k}")
    d2 = _sq_dists(x, anchor_points)
    order = np.argsort(d2, axis=1, kind="stable")
    sorted_d2 = np.take_along_axis(d2, order, axis=1)
    top = sorted_d2[:, :k]
    edge = sorted_d2[:, k]
    denom = k * edge - top.sum(axis=1)
    degenerate = denom <= 1e-12
    safe = np.where(degenerate, 1.0, denom)
    weights = np.maximum((edge[:, None] - top) / safe[:, None], 0.0)
    weights[degenerate] = 1.0 / k
    b = np.zeros_like(d2)
    np.put_along_axis(b, order[:, :k], weights, axis=1)
    # Guard against rounding drift; rows are analytically normalized.
    b /= b.sum(axis=1, keepdims=True)
    return ViewGraph(b, kind="bipartite", row_stochastic=True)


class DegreeNormalized(NamedTuple):
    """Column degrees with the normalized graph and optional Laplacian."""

    degrees: np.ndarray
    normalized: np.ndarray
    laplacian: np.ndarray | None
    had_zero_columns: bool


def degree_and_normalize(g) -> DegreeNormalized:
    """Column degree vector, column-normalized graph, and Laplacian.

    ``degrees[j]`` is the j-th column sum; ``normalized`` is ``G @
    inv(D)``.  For square graphs the symmetric normalized Laplacian
    ``I - D^(-1/2) G D^(-1/2)`` is returned as well, otherwise None.
    Zero columns receive degree 1e-12 and set ``had_zero_columns``.

    Parameters
    ----------
    g : ViewGraph or array
        Entrywise nonnegative graph.
    """
    values = np.asarray(getattr(g, "values", g), dtype=float)
    if values.ndim != 2:
        raise ValueError(f"graph must be a matrix, got ndim={values.ndim}")
    if (values < 0).any():
        raise ValueError("graph has negative entries")
    degrees = values.sum(axis=0)
    had_zero = bool((degrees == 0).any())
    degrees = np.where(degrees == 0, 1e-12, degrees)
    normalized = values / degrees[None, :]
    laplacian = None
    if values.shape[0] == values.shape[1]:
        inv_sqrt = 1.0 / np.sqrt(degrees)
        laplacian = np.eye(values.shape[0]) - inv_sqrt[:, None] * values * inv_sqrt[None, :]
    return DegreeNormalized(degrees, normalized, laplacian, had_zero)
