"""Alternating eigensolver coupling per-view LLE with graph consensus.

Every view keeps a locally linear embedding objective tr(U M U^T) with
M = (I - S)^T (I - S) built from reconstruction weights, and the views
are tied together through normalized-Laplacian consensus terms computed
on the current embeddings.  Each block subproblem is solved exactly by
a symmetric eigendecomposition, one view at a time.  Consensus
Laplacians are rebuilt between sweeps and held fixed within a sweep, so
every view update is the global minimizer of its subproblem and the
recorded objective cannot increase inside a sweep.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .graphs import degree_and_normalize, lle_weights

_KERNELS = ("gaussian", "linear")
_TIE_TOL = 1e-10


@dataclass
class GcmfConfig:
    """Settings for the alternating eigensolver.

    Parameters
    ----------
    dim : int or sequence of int
        Embedding dimension, shared across views when a single int is
        given, otherwise one entry per view.  Must stay below the
        sample count.
    neighbors : int
        Neighborhood size for the reconstruction weights.
    lambda_c : float
        Positive weight on the cross-view consensus terms.
    kernel : {'gaussian', 'linear'}
        Affinity used to build the consensus graph on each embedding.
        The linear kernel clamps negative affinities to zero.
    bandwidth : 'auto' or float
        Gaussian kernel width.  'auto' uses the median pairwise
        distance of the embedding (1.0 when the median is zero).
    tol : float
        Relative change of the objective between sweeps below which
        the solver stops.
    max_sweeps : int
        Upper bound on the number of sweeps over the views.
    reg : float
        Regularizer for the local reconstruction systems.
    """

    dim: int | tuple[int, ...]
    neighbors: int = 5
    lambda_c: float = 1.0
    kernel: str = "gaussian"
    bandwidth: float | str = "auto"
    tol: float = 1e-6
    max_sweeps: int = 50
    reg: float = 1e-3

    def __post_init__(self):
        dims = (self.dim,) if np.isscalar(self.dim) else tuple(self.dim)
        if not dims or any(int(d) != d or d < 1 for d in dims):
            raise ValueError(f"dim entries must be positive integers, got {self.dim!r}")
        if self.neighbors < 1:
            raise ValueError(f"neighbors must be at least 1, got {self.neighbors}")
        if self.lambda_c <= 0:
            raise ValueError(f"lambda_c must be positive, got {self.lambda_c}")
        if self.kernel not in _KERNELS:
            raise ValueError(f"kernel must be one of {_KERNELS}, got {self.kernel!r}")
        if self.bandwidth != "auto":
            if not np.isscalar(self.bandwidth) or self.bandwidth <= 0:
                raise ValueError(f"bandwidth must be 'auto' or positive, got {self.bandwidth!r}")
        if self.tol <= 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if self.max_sweeps < 1:
            raise ValueError(f"max_sweeps must be at least 1, got {self.max_sweeps}")
        if self.reg < 0:
            raise ValueError(f"reg must be nonnegative, got {self.reg}")

    def dims_for(self, n_views: int) -> tuple[int, ...]:
        """Per-view embedding dimensions, broadcasting a scalar dim."""
        if np.isscalar(self.dim):
            return (int(self.dim),) * n_views
        dims = tuple(int(d) for d in self.dim)
        if len(dims) != n_views:
            raise ValueError(f"dim has {len(dims)} entries for {n_views} views")
        return dims


class ViewEmbedding(NamedTuple):
    """One view update: embedding rows, their eigenvalues, tie flag."""

    u: np.ndarray
    eigenvalues: np.ndarray
    tie: bool


@dataclass
class GcmfResult:
    """Solver output.

    Attributes
    ----------
    embeddings : list of ndarray
        Per-view embeddings, each dim x n with orthonormal rows.
    objective_history : ndarray
        Entry 0 is the objective of the initial embeddings under the
        first sweep's Laplacians; entry t is the objective after sweep
        t under that sweep's (frozen) Laplacians.
    sweeps : int
        Number of sweeps performed.
    converged : bool
        True when the relative objective change dropped below tol.
    tie_flags : tuple of bool
        Per view, whether the last eigendecomposition had a repeated
        eigenvalue at the cutoff (the embedding is then not unique).
    """

    embeddings: list[np.ndarray]
    objective_history: np.ndarray
    sweeps: int
    converged: bool
    tie_flags: tuple[bool, ...]


def build_m(s) -> np.ndarray:
    """Reconstruction penalty matrix (I - S)^T (I - S).

    Parameters
    ----------
    s : ViewGraph or array
        Square reconstruction-weight matrix with rows summing to 1.

    Returns
    -------
    ndarray
        Symmetric positive semidefinite n x n matrix.
    """
    values = np.asarray(getattr(s, "values", s), dtype=float)
    if values.ndim != 2 or values.shape[0] != values.shape[1]:
        raise ValueError(f"reconstruction weights must be square, got shape {values.shape}")
    resid = np.eye(values.shape[0]) - values
    m = resid.T @ resid
    return (m + m.T) / 2.0


def consensus_laplacian(u_w, kernel: str = "gaussian", bandwidth="auto") -> np.ndarray:
    """Normalized Laplacian of the affinity graph on an embedding.

    The embedding columns are the per-sample vectors.  The gaussian
    kernel uses exp(-||u_i - u_j||^2 / (2 sigma^2)) with sigma the
    median pairwise distance (1.0 when that median is zero) or the
    fixed bandwidth; the linear kernel uses u_i . u_j with negative
    entries clamped to zero.  Zero-degree nodes fall back to a tiny
    degree and emit a warning.

    Parameters
    ----------
    u_w : ndarray
        Embedding of one view, dim x n with orthonormal rows.
    kernel : {'gaussian', 'linear'}
    bandwidth : 'auto' or float

    Returns
    -------
    ndarray
        Symmetric n x n matrix I - D^(-1/2) G D^(-1/2).
    """
    u = np.asarray(u_w, dtype=float)
    if u.ndim != 2:
        raise ValueError(f"embedding must be a matrix, got ndim={u.ndim}")
    if kernel not in _KERNELS:
        raise ValueError(f"kernel must be one of {_KERNELS}, got {kernel!r}")
    points = u.T
    if kernel == "gaussian":
        sq = np.sum(points**2, axis=1)
        d2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * points @ points.T, 0.0)
        if bandwidth == "auto":
            off_diag = np.sqrt(d2[np.triu_indices(d2.shape[0], k=1)])
            sigma = float(np.median(off_diag)) if off_diag.size else 0.0
            if sigma == 0.0:
                sigma = 1.0
        else:
            sigma = float(bandwidth)
            if sigma <= 0:
                raise ValueError(f"bandwidth must be positive, got {bandwidth!r}")
        g = np.exp(-d2 / (2.0 * sigma**2))
    else:
        g = np.maximum(points @ points.T, 0.0)
    g = (g + g.T) / 2.0
    normalized = degree_and_normalize(g)
    if normalized.had_zero_columns:
        warnings.warn(
            f"{kernel} consensus graph has zero-degree nodes; using a tiny degree fallback",
            RuntimeWarning,
            stacklevel=2,
        )
    lap = normalized.laplacian
    return (lap + lap.T) / 2.0


def update_view_embedding(view: int, m_v, laplacians: Sequence[np.ndarray], lambda_c: float, dim: int) -> ViewEmbedding:
    """Exact minimizer of one view's block subproblem.

    Minimizes tr(U (M + lambda_c sum L_w) U^T) over matrices with
    orthonormal rows, which is solved by the eigenvectors of the
    combined matrix for its ``dim`` smallest eigenvalues.  Eigenvectors
    are ordered by eigenvalue and sign-fixed so the largest-magnitude
    entry of each is positive.

    Parameters
    ----------
    view : int
        View index, used only in error messages.
    m_v : ndarray
        Reconstruction penalty matrix of this view.
    laplacians : sequence of ndarray
        Consensus Laplacians of the other views.
    lambda_c : float
        Weight on the consensus terms.
    dim : int
        Number of embedding rows.

    Returns
    -------
    ViewEmbedding
        Embedding (dim x n, orthonormal rows), its eigenvalues, and a
        flag marking a repeated eigenvalue at the cutoff.
    """
    c = np.asarray(m_v, dtype=float)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise ValueError(f"view {view}: penalty matrix must be square, got shape {c.shape}")
    n = c.shape[0]
    if not 1 <= dim <= n:
        raise ValueError(f"view {view}: dim must be in [1, {n}], got {dim}")
    if laplacians:
        c = c + lambda_c * np.sum(laplacians, axis=0)
    c = (c + c.T) / 2.0
    try:
        vals, vecs = np.linalg.eigh(c)
    except np.linalg.LinAlgError as exc:
        raise RuntimeError(f"eigendecomposition failed for view {view}: {exc}") from exc
    lead = vecs[:, :dim]
    pivots = np.argmax(np.abs(lead), axis=0)
    signs = np.sign(lead[pivots, np.arange(dim)])
    signs[signs == 0] = 1.0
    lead = lead * signs[None, :]
    tie = dim < n and vals[dim] - vals[dim - 1] <= _TIE_TOL * max(1.0, abs(vals[dim]))
    return ViewEmbedding(lead.T.copy(), vals[:dim].copy(), bool(tie))


def _objective(u_list, m_mats, laplacians, lambda_c: float) -> float:
    """Total objective under the given (frozen) consensus Laplacians."""
    total = 0.0
    for v, u in enumerate(u_list):
        total += float(np.sum(u * (u @ m_mats[v])))
        for w in range(len(u_list)):
            if w != v and laplacians:
                total += lambda_c * float(np.sum(u * (u @ laplacians[w])))
    return total


def solve(dataset, config: GcmfConfig) -> GcmfResult:
    """Run the alternating eigensolver on a multi-view dataset.

    Builds per-view reconstruction weights, initializes every view by
    its single-view embedding, then sweeps the views.  At the start of
    each sweep the consensus Laplacians are rebuilt from the current
    embeddings and frozen; each view update then solves its subproblem
    exactly.  The objective under the frozen Laplacians is recorded
    once per sweep (plus the initial value) and the solver stops when
    its relative change falls below tol.

    Parameters
    ----------
    dataset : MultiViewDataset
    config : GcmfConfig

    Returns
    -------
    GcmfResult
    """
    n = dataset.n_samples
    m = dataset.n_views
    dims = config.dims_for(m)
    if config.neighbors >= n:
        raise ValueError(f"neighbors must be below the sample count {n}, got {config.neighbors}")
    if max(dims) >= n:
        raise ValueError(f"dim must be below the sample count {n}, got {max(dims)}")
    m_mats = [build_m(lle_weights(view, config.neighbors, config.reg)) for view in dataset.views]
    u_list = []
    ties = []
    for v in range(m):
        res = update_view_embedding(v, m_mats[v], (), config.lambda_c, dims[v])
        u_list.append(res.u)
        ties.append(res.tie)
    history = []
    sweeps_done = 0
    converged = False
    for sweep in range(1, config.max_sweeps + 1):
        if m > 1:
            laps = [consensus_laplacian(u, config.kernel, config.bandwidth) for u in u_list]
        else:
            laps = []
        if sweep == 1:
            history.append(_objective(u_list, m_mats, laps, config.lambda_c))
        for v in range(m):
            others = [laps[w] for w in range(m) if w != v]
            res = update_view_embedding(v, m_mats[v], others, config.lambda_c, dims[v])
            u_list[v] = res.u
            ties[v] = res.tie
        history.append(_objective(u_list, m_mats, laps, config.lambda_c))
        sweeps_done = sweep
        if m == 1:
            converged = True
            break
        prev, cur = history[-2], history[-1]
        if abs(cur - prev) <= config.tol * max(1.0, abs(prev)):
            converged = True
            break
    return GcmfResult(
        embeddings=u_list,
        objective_history=np.asarray(history),
        sweeps=sweeps_done,
        converged=converged,
        tie_flags=tuple(ties),
    )


def history_to_csv(history) -> str:
    """Objective history as CSV text with columns sweep,objective.

    Row 0 holds the initial objective, row t the value after sweep t.
    """
    lines = ["sweep,objective"]
    for sweep, value in enumerate(np.asarray(history, dtype=float).tolist()):
        lines.append(f"{sweep},{value!r}")
    return "\n".join(lines) + "\n"
