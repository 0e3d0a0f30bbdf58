import json

import numpy as np
import pytest

from mvtensor.cli import main
from mvtensor.data import load_matrix, make_synthetic_blobs, save_dataset, save_labels, save_matrix


def write_blobs(tmp_path, per_cluster=8, clusters=3, views=3, dims=(5, 6, 4), seed=0):
    dataset = make_synthetic_blobs(
        per_cluster, clusters=clusters, views=views, dims=dims, noise_sigmas=0.3, seed=seed
    )
    return save_dataset(dataset, tmp_path / "data"), dataset


class TestAnchors:
    def test_all_samples(self, tmp_path):
        manifest, dataset = write_blobs(tmp_path)
        out = tmp_path / "anchors.json"
        rc = main(["anchors", "--manifest", str(manifest), "--k", str(dataset.n_samples), "--out", str(out)])
        assert rc == 0
        payload = json.loads(out.read_text())
        assert payload["indices"] == list(range(dataset.n_samples))
        assert payload["k"] == dataset.n_samples

    def test_deterministic(self, tmp_path):
        manifest, _ = write_blobs(tmp_path)
        outs = []
        for name in ("a.json", "b.json"):
            out = tmp_path / name
            rc = main([
                "anchors", "--manifest", str(manifest), "--k", "6",
                "--method", "kmeans", "--seed", "7", "--out", str(out),
            ])
            assert rc == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]

    def test_invalid_method_usage_error(self, tmp_path):
        manifest, _ = write_blobs(tmp_path)
        with pytest.raises(SystemExit) as excinfo:
            main(["anchors", "--manifest", str(manifest), "--k", "4",
                  "--method", "random", "--out", str(tmp_path / "a.json")])
        assert excinfo.value.code == 2

    def test_missing_manifest_is_io_error(self, tmp_path, capsys):
        rc = main(["anchors", "--manifest", str(tmp_path / "nope.json"), "--k", "4",
                   "--out", str(tmp_path / "a.json")])
        assert rc == 4
        assert "error:" in capsys.readouterr().err

    def test_k_too_large_is_validation_error(self, tmp_path, capsys):
        manifest, _ = write_blobs(tmp_path)
        rc = main(["anchors", "--manifest", str(manifest), "--k", "999",
                   "--out", str(tmp_path / "a.json")])
        assert rc == 2
        assert "error:" in capsys.readouterr().err


def run_tcgf(manifest, out_dir, *extra):
    return main([
        "tcgf", "--manifest", str(manifest), "--k", "9", "--dim", "3",
        "--knn", "4", "--out-dir", str(out_dir), *extra,
    ])


class TestTcgf:
    def test_outputs_exist_and_parse(self, tmp_path):
        manifest, dataset = write_blobs(tmp_path)
        out_dir = tmp_path / "run"
        rc = run_tcgf(manifest, out_dir)
        assert rc == 0
        embedding = load_matrix(out_dir / "embedding.csv", "csv")
        assert embedding.shape == (dataset.n_samples, 3)
        anchor_embedding = load_matrix(out_dir / "anchor_embedding.csv", "csv")
        assert anchor_embedding.shape == (9, 3)
        alpha = json.loads((out_dir / "alpha.json").read_text())["alpha"]
        assert len(alpha) == dataset.n_views
        assert sum(alpha) == pytest.approx(1.0, abs=1e-8)
        history = (out_dir / "history.csv").read_text().strip().split("\n")
        assert history[0].startswith("iter,objective")
        config = json.loads((out_dir / "run_config.json").read_text())
        assert config["converged"] is True
        assert config["command"] == "tcgf"
        assert config["k"] == 9

    def test_gamma_out_of_range(self, tmp_path, capsys):
        manifest, _ = write_blobs(tmp_path)
        rc = run_tcgf(manifest, tmp_path / "run", "--gamma", "1.5")
        assert rc == 2
        assert "gamma" in capsys.readouterr().err

    def test_rerun_is_byte_identical(self, tmp_path):
        manifest, _ = write_blobs(tmp_path)
        first, second = tmp_path / "r1", tmp_path / "r2"
        assert run_tcgf(manifest, first) == 0
        assert run_tcgf(manifest, second) == 0
        for name in ("embedding.csv", "history.csv"):
            assert (first / name).read_bytes() == (second / name).read_bytes()

    def test_non_convergence_exit_code_with_outputs(self, tmp_path):
        manifest, _ = write_blobs(tmp_path)
        out_dir = tmp_path / "run"
        rc = run_tcgf(manifest, out_dir, "--max-iter", "2")
        assert rc == 3
        assert (out_dir / "embedding.csv").exists()
        config = json.loads((out_dir / "run_config.json").read_text())
        assert config["converged"] is False

    def test_anchor_file_route(self, tmp_path):
        manifest, _ = write_blobs(tmp_path)
        anchors = tmp_path / "anchors.json"
        assert main(["anchors", "--manifest", str(manifest), "--k", "9",
                     "--out", str(anchors)]) == 0
        out_dir = tmp_path / "run"
        rc = main(["tcgf", "--manifest", str(manifest), "--anchors", str(anchors),
                   "--dim", "3", "--knn", "4", "--out-dir", str(out_dir)])
        assert rc == 0
        direct = tmp_path / "direct"
        assert run_tcgf(manifest, direct) == 0
        assert (out_dir / "embedding.csv").read_bytes() == (direct / "embedding.csv").read_bytes()

    def test_anchors_and_k_are_exclusive(self, tmp_path):
        manifest, _ = write_blobs(tmp_path)
        with pytest.raises(SystemExit) as excinfo:
            main(["tcgf", "--manifest", str(manifest), "--anchors", "a.json", "--k", "5",
                  "--dim", "3", "--out-dir", str(tmp_path / "run")])
        assert excinfo.value.code == 2

    def test_grid_sweep(self, tmp_path):
        manifest, _ = write_blobs(tmp_path)
        out_dir = tmp_path / "sweep"
        rc = run_tcgf(manifest, out_dir, "--grid", "2", "--max-iter", "8")
        assert rc in (0, 3)
        config = json.loads((out_dir / "run_config.json").read_text())
        assert len(config["cells"]) == 4
        for cell in config["cells"]:
            cell_dir = out_dir / cell["dir"]
            assert (cell_dir / "embedding.csv").exists()
            cell_config = json.loads((cell_dir / "run_config.json").read_text())
            assert cell_config["lambda_e"] == cell["lambda_e"]


class TestGcmf:
    def test_single_view(self, tmp_path):
        manifest, dataset = write_blobs(tmp_path, views=1, dims=5)
        out_dir = tmp_path / "run"
        rc = main(["gcmf", "--manifest", str(manifest), "--dim", "2",
                   "--neighbors", "4", "--out-dir", str(out_dir)])
        assert rc == 0
        embedding = load_matrix(out_dir / "embedding_view1.csv", "csv")
        assert embedding.shape == (dataset.n_samples, 2)
        assert not (out_dir / "embedding_view2.csv").exists()

    def test_two_views_history_finite(self, tmp_path):
        manifest, dataset = write_blobs(tmp_path, views=2, dims=(5, 6))
        out_dir = tmp_path / "run"
        rc = main(["gcmf", "--manifest", str(manifest), "--dim", "3",
                   "--neighbors", "5", "--out-dir", str(out_dir)])
        assert rc in (0, 3)
        for v in (1, 2):
            embedding = load_matrix(out_dir / f"embedding_view{v}.csv", "csv")
            assert embedding.shape == (dataset.n_samples, 3)
        lines = (out_dir / "history.csv").read_text().strip().split("\n")
        assert lines[0] == "sweep,objective"
        values = [float(line.split(",")[1]) for line in lines[1:]]
        assert all(np.isfinite(values))
        config = json.loads((out_dir / "run_config.json").read_text())
        assert config["sweeps"] == len(values) - 1

    def test_rerun_is_byte_identical(self, tmp_path):
        manifest, _ = write_blobs(tmp_path, views=2, dims=(5, 6))
        flags = ["gcmf", "--manifest", str(manifest), "--dim", "2", "--neighbors", "4"]
        first, second = tmp_path / "r1", tmp_path / "r2"
        main(flags + ["--out-dir", str(first)])
        main(flags + ["--out-dir", str(second)])
        for name in ("embedding_view1.csv", "embedding_view2.csv", "history.csv"):
            assert (first / name).read_bytes() == (second / name).read_bytes()


def one_hot_embedding(tmp_path, n_per_class=10, classes=3, fmt="csv"):
    labels = np.repeat(np.arange(classes), n_per_class)
    embedding = np.eye(classes)[labels]
    path = tmp_path / f"embedding.{fmt}"
    save_matrix(path, embedding, fmt)
    truth = tmp_path / "truth.csv"
    save_labels(truth, labels)
    return path, truth


class TestClusterEval:
    def test_perfect_embedding(self, tmp_path):
        embedding, truth = one_hot_embedding(tmp_path)
        out = tmp_path / "metrics.json"
        rc = main(["cluster-eval", "--embedding", str(embedding), "--clusters", "3",
                   "--truth", str(truth), "--repeats", "10", "--out", str(out)])
        assert rc == 0
        payload = json.loads(out.read_text())
        assert payload["acc"] == pytest.approx(1.0)
        assert "acc_std" in payload and "nmi_std" in payload and "purity_std" in payload
        assert len(payload["labels"]) == 30

    def test_truth_omitted(self, tmp_path):
        embedding, _ = one_hot_embedding(tmp_path)
        out = tmp_path / "metrics.json"
        rc = main(["cluster-eval", "--embedding", str(embedding), "--clusters", "3",
                   "--out", str(out)])
        assert rc == 0
        payload = json.loads(out.read_text())
        assert "labels" in payload
        assert not any(key.startswith(("acc", "nmi", "purity")) for key in payload)

    def test_mvb_embedding(self, tmp_path):
        embedding, truth = one_hot_embedding(tmp_path, fmt="mvb")
        out = tmp_path / "metrics.json"
        rc = main(["cluster-eval", "--embedding", str(embedding), "--clusters", "3",
                   "--truth", str(truth), "--out", str(out)])
        assert rc == 0

    def test_shape_mismatch(self, tmp_path, capsys):
        embedding, _ = one_hot_embedding(tmp_path)
        bad_truth = tmp_path / "bad.csv"
        save_labels(bad_truth, np.zeros(7, dtype=int))
        rc = main(["cluster-eval", "--embedding", str(embedding), "--clusters", "3",
                   "--truth", str(bad_truth), "--out", str(tmp_path / "m.json")])
        assert rc == 2
        assert "rows" in capsys.readouterr().err

    def test_deterministic(self, tmp_path):
        embedding, truth = one_hot_embedding(tmp_path)
        outs = []
        for name in ("m1.json", "m2.json"):
            out = tmp_path / name
            main(["cluster-eval", "--embedding", str(embedding), "--clusters", "3",
                  "--truth", str(truth), "--seed", "5", "--out", str(out)])
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]


class TestThreadCap:
    def test_invalid_env(self, tmp_path, monkeypatch, capsys):
        monkeypatch.setenv("MVTENSOR_THREADS", "lots")
        rc = main(["cluster-eval", "--embedding", "x.csv", "--clusters", "2",
                   "--out", str(tmp_path / "m.json")])
        assert rc == 2
        assert "MVTENSOR_THREADS" in capsys.readouterr().err

    def test_capped_run(self, tmp_path, monkeypatch):
        monkeypatch.setenv("MVTENSOR_THREADS", "1")
        embedding, truth = one_hot_embedding(tmp_path)
        rc = main(["cluster-eval", "--embedding", str(embedding), "--clusters", "3",
                   "--truth", str(truth), "--out", str(tmp_path / "m.json")])
        assert rc == 0
