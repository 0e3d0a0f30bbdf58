"""Tensorized consensus graph fusion by alternating ADMM updates.

Per-view graphs B^(v) (samples by anchors, row stochastic) are fused
into a shared spectral embedding.  The solver alternates closed-form
updates of the embedding pair (F_S, F_A), the low-rank tensor surrogate
Z, the learned graphs G^(v), the sparse error terms E^(v) and the view
weights alpha, followed by multiplier ascent with growing penalties.
The full N x N model is the same code path with every sample as an
anchor and row-normalized similarity graphs as input.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from .graphs import (
    AnchorSet,
    ViewGraph,
    bipartite_graph,
    degree_and_normalize,
    gaussian_knn_graph,
)
from .tensor_ops import prox_weighted_tnn, stack_rotate, unstack_rotate, weighted_tnn

__all__ = [
    "TcgfConfig",
    "TcgfState",
    "TcgfResult",
    "HistoryRecord",
    "update_f",
    "update_z",
    "project_simplex",
    "update_g",
    "update_e",
    "update_alpha",
    "update_multipliers",
    "solve",
    "solve_dataset",
    "build_bipartite_graphs",
    "build_full_graphs",
    "history_to_csv",
]


@dataclass
class TcgfConfig:
    """Hyperparameters of the fusion solver.

    ``dim`` is the embedding dimension and must not exceed min(N, K).
    ``omega`` weights the singular values of the rotated graph tensor;
    None means all ones (one weight per view).  ``gamma`` controls how
    sharply the view weights concentrate and must lie strictly inside
    (0, 1): the weighted-combination objective is concave exactly
    there, while larger values collapse alpha onto a single view.
    """

    dim: int
    lambda_e: float = 0.1
    lambda_r: float = 1.0
    gamma: float = 0.5
    omega: np.ndarray | None = None
    mu0: float = 0.1
    rho0: float = 0.1
    eta: float = 1.5
    penalty_cap: float = 1e8
    tol: float = 1e-6
    max_iter: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"dim must be a positive integer, got {self.dim}")
        if not self.lambda_e > 0:
            raise ValueError(f"lambda_e must be positive, got {self.lambda_e}")
        if not self.lambda_r > 0:
            raise ValueError(f"lambda_r must be positive, got {self.lambda_r}")
        if not 0.0 < self.gamma < 1.0:
            raise ValueError(f"gamma must lie in the open interval (0, 1), got {self.gamma}")
        if not self.mu0 > 0 or not self.rho0 > 0:
            raise ValueError("mu0 and rho0 must be positive")
        if not self.eta > 1.0:
            raise ValueError(f"eta must exceed 1, got {self.eta}")
        if self.penalty_cap < max(self.mu0, self.rho0):
            raise ValueError("penalty_cap must be at least the initial penalties")
        if not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be at least 1, got {self.max_iter}")
        if self.omega is not None:
            self.omega = np.asarray(self.omega, dtype=float)
            if self.omega.ndim != 1 or (self.omega <= 0).any():
                raise ValueError("omega must be a 1-D strictly positive vector")


@dataclass
class HistoryRecord:
    iteration: int
    objective: float
    res_graph_inf: float
    res_tensor_inf: float
    mu: float
    rho: float
    alpha: np.ndarray


@dataclass
class TcgfState:
    """Mutable solver state; owned by a single solve invocation."""

    b: list[np.ndarray]
    g: list[np.ndarray]
    e: list[np.ndarray]
    z: np.ndarray
    y: list[np.ndarray]
    y_tensor: np.ndarray
    alpha: np.ndarray
    mu: float
    rho: float
    eta: float = 1.5
    penalty_cap: float = 1e8
    f_s: np.ndarray | None = None
    f_a: np.ndarray | None = None
    history: list[HistoryRecord] = field(default_factory=list)


@dataclass
class TcgfResult:
    """Immutable solve outcome.

    ``embedding`` is F_S (N x d), ``anchor_embedding`` is F_A (K x d),
    ``consensus_graph`` their product F_S F_A^T.  ``rank_deficient`` is
    set when any embedding update met a fused graph of rank below dim.
    """

    embedding: np.ndarray
    anchor_embedding: np.ndarray
    consensus_graph: np.ndarray
    alpha: np.ndarray
    converged: bool
    iterations: int
    history: list[HistoryRecord]
    rank_deficient: bool


def update_f(normalized_graphs, alpha, gamma: float, dim: int):
    """Closed-form embedding update from the fused normalized graphs.

    Builds ``M = sum_v alpha_v**gamma * G^(v) D^(v)^-1`` and returns
    ``F_S = sqrt(1/2) U_d`` and ``F_A = sqrt(1/2) V_d`` from its rank-d
    truncated SVD, which maximizes the coupling trace subject to
    ``F_S^T F_S + F_A^T F_A = I``.  Each left singular vector is signed
    so its largest-magnitude entry is positive.

    Returns
    -------
    (f_s, f_a, rank_deficient)
        ``rank_deficient`` is True when rank(M) < dim; the returned
        trailing columns are then an orthonormal completion.
    """
    alpha = np.asarray(alpha, dtype=float)
    mats = [np.asarray(m, dtype=float) for m in normalized_graphs]
    if len(mats) != alpha.size:
        raise ValueError(f"got {len(mats)} graphs but {alpha.size} weights")
    fused = sum(a**gamma * m for a, m in zip(alpha, mats))
    if dim > min(fused.shape):
        raise ValueError(
            f"dim={dim} exceeds min(N, K)={min(fused.shape)}"
        )
    u, s, vh = np.linalg.svd(fused, full_matrices=False)
    v = vh.T
    for j in range(dim):
        pivot = np.argmax(np.abs(u[:, j]))
        if u[pivot, j] < 0:
            u[:, j] = -u[:, j]
            v[:, j] = -v[:, j]
    tol = s[0] * max(fused.shape) * np.finfo(float).eps if s.size else 0.0
    rank = int(np.sum(s > tol))
    scale = np.sqrt(0.5)
    return scale * u[:, :dim], scale * v[:, :dim], rank < dim


def update_z(g_tensor, y_tensor, rho: float, lambda_r: float, omega) -> np.ndarray:
    """Low-rank tensor update: weighted shrinkage of ``G + Y/rho``."""
    if not rho > 0:
        raise ValueError(f"rho must be positive, got {rho}")
    return prox_weighted_tnn(g_tensor + y_tensor / rho, lambda_r / rho, omega)


def project_simplex(v) -> np.ndarray:
    """Euclidean projection onto the probability simplex.

    Sort-and-threshold algorithm: with the entries sorted decreasingly,
    the largest feasible support determines the shift that makes the
    positive part sum to one.
    """
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise ValueError(f"expected a non-empty vector, got shape {v.shape}")
    if not np.isfinite(v).all():
        raise ValueError("vector contains non-finite entries")
    return _project_simplex_rows(v[None, :])[0]


def _project_simplex_rows(mat):
    n, m = mat.shape
    u = -np.sort(-mat, axis=1)
    cumulative = np.cumsum(u, axis=1) - 1.0
    counts = np.arange(1, m + 1)
    feasible = u * counts > cumulative
    # The first column is always feasible, so the last feasible index
    # per row is well defined.
    last = m - 1 - np.argmax(feasible[:, ::-1], axis=1)
    theta = cumulative[np.arange(n), last] / (last + 1)
    return np.maximum(mat - theta[:, None], 0.0)


def update_g(
    b,
    e,
    y,
    z_slice,
    y_tensor_slice,
    f_s,
    f_a,
    d_prev,
    alpha_v: float,
    gamma: float,
    mu: float,
    rho: float,
) -> np.ndarray:
    """Per-view graph update: row-wise simplex projection of an affine target.

    The quadratic-plus-linear subproblem in G^(v) is separable over
    rows; with ``P`` averaging the two quadratic anchors and ``Q`` the
    linear embedding pull, every row of the solution is the simplex
    projection of ``P_i + Q_i``.

    Parameters
    ----------
    d_prev : array, shape (K,)
        Column degrees of the previous iterate of G^(v) (the degree
        matrix is lagged one iteration to keep the subproblem closed
        form).
    """
    if not mu > 0 or not rho > 0:
        raise ValueError(f"penalties must be positive, got mu={mu}, rho={rho}")
    p = (mu * (b - e + y / mu) + rho * (z_slice - y_tensor_slice / rho)) / (mu + rho)
    q = (alpha_v**gamma / (mu + rho)) * (f_s @ f_a.T) / d_prev[None, :]
    return _project_simplex_rows(p + q)


def update_e(b, g, y, mu: float, lambda_e: float) -> np.ndarray:
    """Sparse error update: elementwise soft threshold of B - G + Y/mu."""
    if not mu > 0:
        raise ValueError(f"mu must be positive, got {mu}")
    gamma_mat = b - g + y / mu
    return np.sign(gamma_mat) * np.maximum(np.abs(gamma_mat) - lambda_e / mu, 0.0)


def update_alpha(h, gamma: float) -> np.ndarray:
    """View weight update: the KKT maximizer of ``sum_v alpha_v**gamma h_v``.

    ``h_v`` is the trace agreement between the consensus graph and view
    v; entries are clamped below at 1e-12.  The output is invariant to
    scaling h by a positive constant.
    """
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"gamma must lie in the open interval (0, 1), got {gamma}")
    h = np.maximum(np.asarray(h, dtype=float), 1e-12)
    powered = h ** (1.0 / (1.0 - gamma))
    return powered / powered.sum()


def update_multipliers(state: TcgfState) -> TcgfState:
    """Multiplier ascent and penalty growth, in place."""
    for v in range(len(state.b)):
        state.y[v] = state.y[v] + state.mu * (state.b[v] - state.g[v] - state.e[v])
    state.y_tensor = state.y_tensor + state.rho * (stack_rotate(state.g) - state.z)
    cap = state.penalty_cap
    state.mu = min(state.eta * state.mu, cap)
    state.rho = min(state.eta * state.rho, cap)
    return state


def _graph_values(graphs) -> list[np.ndarray]:
    mats = []
    for v, g in enumerate(graphs):
        values = np.asarray(getattr(g, "values", g), dtype=float)
        if values.ndim != 2:
            raise ValueError(f"view {v}: graph must be a matrix, got ndim={values.ndim}")
        if (values < 0).any():
            raise ValueError(f"view {v}: graph has negative entries")
        row_gap = np.abs(values.sum(axis=1) - 1.0).max()
        if row_gap > 1e-8:
            raise ValueError(
                f"view {v}: input graph must be row stochastic "
                f"(worst row sum deviation {row_gap:.3e})"
            )
        mats.append(values)
    if not mats:
        raise ValueError("at least one view graph is required")
    shape = mats[0].shape
    for v, m in enumerate(mats):
        if m.shape != shape:
            raise ValueError(
                f"all view graphs must share one shape: view 0 is {shape}, "
                f"view {v} is {m.shape}"
            )
    return mats


def solve(graphs, config: TcgfConfig) -> TcgfResult:
    """Run the ADMM loop on prebuilt row-stochastic graphs.

    Parameters
    ----------
    graphs : sequence of ViewGraph or (N, K) arrays
        One row-stochastic graph per view, all the same shape.
    config : TcgfConfig

    Returns
    -------
    TcgfResult
        ``converged`` reflects whether both constraint residuals fell
        below ``config.tol``; history holds one record per iteration.
    """
    b = _graph_values(graphs)
    n, k = b[0].shape
    m = len(b)
    if config.dim > min(n, k):
        raise ValueError(f"dim={config.dim} exceeds min(N, K)={min(n, k)}")
    n_weights = min(n, m)
    if config.omega is None:
        omega = np.ones(n_weights)
    else:
        omega = config.omega
        if omega.shape != (n_weights,):
            raise ValueError(
                f"omega must have one weight per view ({n_weights}), got {omega.shape}"
            )
    state = TcgfState(
        b=b,
        g=[mat.copy() for mat in b],
        e=[np.zeros((n, k)) for _ in range(m)],
        z=stack_rotate(b),
        y=[np.zeros((n, k)) for _ in range(m)],
        y_tensor=np.zeros((n, m, k)),
        alpha=np.full(m, 1.0 / m),
        mu=config.mu0,
        rho=config.rho0,
        eta=config.eta,
        penalty_cap=config.penalty_cap,
    )
    converged = False
    iterations = 0
    rank_deficient = False
    for it in range(1, config.max_iter + 1):
        try:
            mu, rho = state.mu, state.rho
            degrees = [degree_and_normalize(g).degrees for g in state.g]
            normalized = [g / d[None, :] for g, d in zip(state.g, degrees)]
            state.f_s, state.f_a, deficient = update_f(
                normalized, state.alpha, config.gamma, config.dim
            )
            rank_deficient = rank_deficient or deficient
            state.z = update_z(
                stack_rotate(state.g), state.y_tensor, rho, config.lambda_r, omega
            )
            z_slices = unstack_rotate(state.z)
            y_tensor_slices = unstack_rotate(state.y_tensor)
            for v in range(m):
                state.g[v] = update_g(
                    state.b[v],
                    state.e[v],
                    state.y[v],
                    z_slices[v],
                    y_tensor_slices[v],
                    state.f_s,
                    state.f_a,
                    degrees[v],
                    float(state.alpha[v]),
                    config.gamma,
                    mu,
                    rho,
                )
            for v in range(m):
                state.e[v] = update_e(
                    state.b[v], state.g[v], state.y[v], mu, config.lambda_e
                )
            consensus = state.f_s @ state.f_a.T
            h = np.array(
                [
                    float(np.sum(consensus * (state.g[v] / degrees[v][None, :])))
                    for v in range(m)
                ]
            )
            state.alpha = update_alpha(h, config.gamma)
            res_graph = max(
                float(np.abs(state.b[v] - state.g[v] - state.e[v]).max())
                for v in range(m)
            )
            res_tensor = float(np.abs(stack_rotate(state.g) - state.z).max())
            objective = (
                -float(np.sum(state.alpha**config.gamma * h))
                + config.lambda_e * sum(float(np.abs(e).sum()) for e in state.e)
                + config.lambda_r * weighted_tnn(state.z, omega)
            )
            state.history.append(
                HistoryRecord(
                    iteration=it,
                    objective=objective,
                    res_graph_inf=res_graph,
                    res_tensor_inf=res_tensor,
                    mu=mu,
                    rho=rho,
                    alpha=state.alpha.copy(),
                )
            )
            update_multipliers(state)
        except ValueError as exc:
            raise ValueError(f"iteration {it}: {exc}") from exc
        except Exception as exc:
            raise RuntimeError(f"iteration {it}: {exc}") from exc
        iterations = it
        if max(res_graph, res_tensor) < config.tol:
            converged = True
            break
    return TcgfResult(
        embedding=state.f_s,
        anchor_embedding=state.f_a,
        consensus_graph=state.f_s @ state.f_a.T,
        alpha=state.alpha,
        converged=converged,
        iterations=iterations,
        history=state.history,
        rank_deficient=rank_deficient,
    )


def build_bipartite_graphs(dataset, anchors: AnchorSet, knn: int) -> list[ViewGraph]:
    """Per-view adaptive bipartite graphs against shared anchor samples."""
    views = list(getattr(dataset, "views", dataset))
    indices = list(anchors.indices)
    n = views[0].shape[0]
    if indices[-1] >= n:
        raise ValueError(
            f"anchor index {indices[-1]} out of range for {n} samples"
        )
    return [bipartite_graph(x, x[indices], knn) for x in views]


def build_full_graphs(dataset, knn: int, sigma: float | None = None) -> list[ViewGraph]:
    """Row-normalized similarity graphs for the full N x N model."""
    views = list(getattr(dataset, "views", dataset))
    graphs = []
    for x in views:
        similarity = gaussian_knn_graph(x, knn, sigma=sigma).values
        rows = similarity.sum(axis=1, keepdims=True)
        graphs.append(
            ViewGraph(similarity / rows, kind="similarity", row_stochastic=True)
        )
    return graphs


def solve_dataset(
    dataset,
    config: TcgfConfig,
    anchors: AnchorSet | None = None,
    knn: int = 5,
) -> TcgfResult:
    """Build per-view graphs from a dataset and solve.

    With ``anchors`` the large-scale bipartite model is used; without,
    every sample acts as its own anchor through row-normalized
    similarity graphs (the full model).
    """
    if anchors is None:
        graphs = build_full_graphs(dataset, knn)
    else:
        graphs = build_bipartite_graphs(dataset, anchors, knn)
    return solve(graphs, config)


def history_to_csv(history, n_views: int) -> str:
    """Render solver history as CSV with one row per iteration."""
    out = io.StringIO()
    alpha_cols = ",".join(f"alpha_{v + 1}" for v in range(n_views))
    out.write(f"iter,objective,res_graph_inf,res_tensor_inf,mu,rho,{alpha_cols}\n")
    for rec in history:
        alphas = ",".join(repr(float(a)) for a in rec.alpha)
        out.write(
            f"{rec.iteration},{repr(rec.objective)},{repr(rec.res_graph_inf)},"
            f"{repr(rec.res_tensor_inf)},{repr(rec.mu)},{repr(rec.rho)},{alphas}\n"
        )
    return out.getvalue()
