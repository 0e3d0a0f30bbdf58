"""Release gate: eight end-to-end checks with pinned tolerances.

Each test prints a single summary line when it passes, so a verbose run
reads as a checklist.  Tolerances and budgets are fixed; loosening them
is a behavior change, not a test fix.
"""

import functools
import json
import time

import numpy as np
from threadpoolctl import threadpool_limits

from mvtensor.cli import main
from mvtensor.clustering import accuracy, kmeans, nmi, purity
from mvtensor.data import make_synthetic_blobs, save_dataset, save_labels, save_matrix
from mvtensor.gcmf import GcmfConfig
from mvtensor.gcmf import solve as gcmf_solve
from mvtensor.graphs import select_anchors_svd
from mvtensor.tcgf import (
    TcgfConfig,
    build_bipartite_graphs,
    project_simplex,
    solve,
    solve_dataset,
    update_alpha,
    update_e,
    update_g,
)
from mvtensor.tensor_ops import prox_weighted_tnn, t_product, t_svd, t_transpose
from oracles import (
    alpha_objective,
    g_row_qp_oracle,
    refined_simplex_argmax,
    scalar_l1_prox_oracle,
    shrink_oracle,
    simplex_grid,
    simplex_projection_oracle,
    t_product_oracle,
    accuracy_oracle,
)


def test_criterion_1_tensor_algebra_oracles():
    rng = np.random.default_rng(0)
    start = time.perf_counter()
    for _ in range(50):
        n1, n2, n3 = rng.integers(1, 7), rng.integers(1, 6), rng.integers(1, 8)
        p = int(rng.integers(1, 6))
        a = rng.standard_normal((n1, n2, n3))
        b = rng.standard_normal((n2, p, n3))
        assert np.abs(t_product(a, b) - t_product_oracle(a, b)).max() <= 1e-8

        u, s, v = t_svd(a)
        recon = t_product(t_product(u, s), t_transpose(v))
        scale = max(np.linalg.norm(a), 1e-12)
        assert np.linalg.norm(recon - a) / scale <= 1e-8

        tau = float(rng.uniform(0.05, 2.0))
        omega = rng.uniform(0.1, 2.0, size=min(n1, n2))
        out = prox_weighted_tnn(a, tau, omega)
        assert np.abs(out - shrink_oracle(a, tau, omega)).max() <= 1e-8
    elapsed = time.perf_counter() - start
    assert elapsed < 10.0
    print(f"criterion 1 PASS: 50 tensors, product/t-SVD/prox all within 1e-8, {elapsed:.1f}s")


def test_criterion_2_subproblem_oracles():
    rng = np.random.default_rng(1)
    for _ in range(30):
        n, k, d = 5, 3, 2
        b = rng.uniform(0.05, 1.0, size=(n, k))
        b /= b.sum(axis=1, keepdims=True)
        e = 0.1 * rng.standard_normal((n, k))
        y = rng.standard_normal((n, k))
        z = rng.standard_normal((n, k))
        y_t = rng.standard_normal((n, k))
        f_s = rng.standard_normal((n, d))
        f_a = rng.standard_normal((k, d))
        d_prev = rng.uniform(0.5, 2.0, size=k)
        mu, rho = float(rng.uniform(0.3, 2.0)), float(rng.uniform(0.3, 2.0))
        alpha_v, gamma = float(rng.uniform(0.1, 0.9)), 0.5
        out = update_g(b, e, y, z, y_t, f_s, f_a, d_prev, alpha_v, gamma, mu, rho)
        a_mat = b - e + y / mu
        b_mat = z - y_t / rho
        c_mat = alpha_v**gamma * (f_s @ f_a.T) / d_prev[None, :]
        for i in range(n):
            oracle = g_row_qp_oracle(a_mat[i], b_mat[i], c_mat[i], mu, rho)
            assert np.abs(out[i] - oracle).max() <= 1e-8

    for _ in range(100):
        v = rng.standard_normal(int(rng.integers(2, 9))) * rng.uniform(0.3, 3.0)
        assert np.abs(project_simplex(v) - simplex_projection_oracle(v)).max() <= 1e-8

    for m, steps in ((2, 9999), (3, 140)):
        for _ in range(5):
            h = rng.uniform(0.2, 2.0, size=m)
            alpha = update_alpha(h, 0.5)
            closed = alpha_objective(alpha, h, 0.5)
            coarse_best = float(np.max(np.sum(simplex_grid(m, steps) ** 0.5 * h, axis=1)))
            refined_best = refined_simplex_argmax(h, 0.5, coarse_steps=steps)
            assert closed >= coarse_best - 1e-12
            assert abs(closed - refined_best) <= 1e-6

    for _ in range(10):
        gamma_val = float(rng.uniform(-3.0, 3.0))
        threshold = float(rng.uniform(0.1, 1.5))
        out = update_e(
            np.array([[gamma_val]]), np.zeros((1, 1)), np.zeros((1, 1)), mu=1.0, lambda_e=threshold
        )
        assert abs(out[0, 0] - scalar_l1_prox_oracle(gamma_val, threshold)) <= 1e-6
    print("criterion 2 PASS: row QP 1e-8, simplex 1e-8, alpha grid 1e-6, prox grid 1e-6")


@functools.lru_cache(maxsize=1)
def _blobs_run():
    dataset = make_synthetic_blobs(
        100, clusters=3, views=3, dims=(20, 30, 25), noise_sigmas=(0.5, 0.7, 0.6), seed=0
    )
    anchors = select_anchors_svd(dataset.views, 30)
    start = time.perf_counter()
    result = solve_dataset(dataset, TcgfConfig(dim=3), anchors=anchors, knn=5)
    elapsed = time.perf_counter() - start
    return dataset, result, elapsed


def test_criterion_3_admm_convergence():
    dataset, result, elapsed = _blobs_run()
    assert elapsed < 30.0
    assert result.converged
    assert result.iterations <= 100
    last = result.history[-1]
    assert last.res_graph_inf < 1e-6
    assert last.res_tensor_inf < 1e-6
    print(
        f"criterion 3 PASS: residuals {last.res_graph_inf:.2e}/{last.res_tensor_inf:.2e} "
        f"after {result.iterations} iterations, {elapsed:.2f}s"
    )


def test_criterion_4_end_to_end_clustering(tmp_path):
    dataset, result, _ = _blobs_run()
    embedding_path = tmp_path / "embedding.csv"
    truth_path = tmp_path / "truth.csv"
    metrics_path = tmp_path / "metrics.json"
    save_matrix(embedding_path, result.embedding, "csv")
    save_labels(truth_path, dataset.labels)
    rc = main([
        "cluster-eval", "--embedding", str(embedding_path), "--clusters", "3",
        "--truth", str(truth_path), "--repeats", "10", "--out", str(metrics_path),
    ])
    assert rc == 0
    metrics = json.loads(metrics_path.read_text())
    assert metrics["acc"] >= 0.95
    assert metrics["nmi"] >= 0.90
    print(f"criterion 4 PASS: mean ACC {metrics['acc']:.3f}, mean NMI {metrics['nmi']:.3f} over 10 repeats")


def test_criterion_5_linear_scaling():
    start = time.perf_counter()

    def build(n_per_cluster):
        dataset = make_synthetic_blobs(
            n_per_cluster, clusters=4, views=2, dims=(10, 12), noise_sigmas=0.6, seed=0
        )
        anchors = select_anchors_svd(dataset.views, 64)
        return build_bipartite_graphs(dataset, anchors, knn=5)

    config = TcgfConfig(dim=5, tol=1e-30, max_iter=12)

    def best_of_three(graphs):
        best = np.inf
        for _ in range(3):
            t0 = time.perf_counter()
            solve(graphs, config)
            best = min(best, time.perf_counter() - t0)
        return best

    with threadpool_limits(limits=1):
        small_graphs = build(500)
        large_graphs = build(2000)
        solve(small_graphs, config)
        small = best_of_three(small_graphs)
        large = best_of_three(large_graphs)
    ratio = large / small
    elapsed = time.perf_counter() - start
    assert elapsed < 120.0
    assert 2.5 <= ratio <= 6.0
    print(f"criterion 5 PASS: 8000/2000 sample time ratio {ratio:.2f} (12 fixed iterations), {elapsed:.1f}s")


def test_criterion_6_sweep_monotonicity():
    dataset = make_synthetic_blobs(
        100, clusters=2, views=2, dims=(8, 10), noise_sigmas=0.2, seed=5
    )
    config = GcmfConfig(dim=2, neighbors=6, lambda_c=0.5, tol=1e-300, max_sweeps=20)
    result = gcmf_solve(dataset, config)
    assert result.sweeps >= 15
    diffs = np.diff(result.objective_history)
    assert diffs.max() <= 1e-9
    for u in result.embeddings:
        gram = u @ u.T
        assert np.abs(gram - np.eye(u.shape[0])).max() <= 1e-8
    print(
        f"criterion 6 PASS: {result.sweeps} sweeps, worst step {diffs.max():.2e}, "
        f"rows orthonormal to 1e-8"
    )


def test_criterion_7_metric_correctness():
    rng = np.random.default_rng(2)
    for _ in range(100):
        n = int(rng.integers(6, 21))
        c_pred = int(rng.integers(1, 7))
        c_truth = int(rng.integers(1, 7))
        pred = rng.integers(0, c_pred, size=n)
        truth = rng.integers(0, c_truth, size=n)
        assert accuracy(pred, truth) == accuracy_oracle(pred, truth)
    assert abs(accuracy([0, 0, 0, 1], [0, 0, 1, 1]) - 0.75) <= 1e-4
    assert abs(nmi([0, 0, 1, 1], [0, 0, 1, 2]) - 0.8164) <= 1e-4
    assert abs(purity([0, 0, 0, 0], [0, 0, 1, 1]) - 0.5) <= 1e-4
    print("criterion 7 PASS: 100 instances match exhaustive matching; 0.75/0.8164/0.5 reproduce")


def test_criterion_8_cli_determinism(tmp_path):
    dataset = make_synthetic_blobs(8, clusters=3, views=3, dims=(5, 6, 4), noise_sigmas=0.3, seed=0)
    manifest = save_dataset(dataset, tmp_path / "data")
    flags = [
        "tcgf", "--manifest", str(manifest), "--k", "9", "--dim", "3",
        "--knn", "4", "--seed", "11",
    ]
    first, second = tmp_path / "r1", tmp_path / "r2"
    rc1 = main(flags + ["--out-dir", str(first)])
    rc2 = main(flags + ["--out-dir", str(second)])
    assert rc1 == rc2
    assert (first / "embedding.csv").read_bytes() == (second / "embedding.csv").read_bytes()
    assert (first / "history.csv").read_bytes() == (second / "history.csv").read_bytes()
    print("criterion 8 PASS: repeated runs byte-identical (embedding.csv, history.csv)")
