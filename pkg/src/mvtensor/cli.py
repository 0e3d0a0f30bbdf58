"""Batch command line wiring datasets, solvers, and evaluation.

Four subcommands cover the pipeline: ``anchors`` ranks representative
samples, ``tcgf`` runs the tensorized consensus-graph solver, ``gcmf``
runs the alternating eigensolver, and ``cluster-eval`` scores an
embedding with repeated k-means.  Every run directory receives a
run_config.json recording the exact flags, outputs are written
atomically, and exit codes separate validation failures (2),
non-convergence (3), and I/O problems (4).  The MVTENSOR_THREADS
environment variable caps the BLAS worker pool.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import gcmf as gcmf_mod
from . import tcgf as tcgf_mod
from .clustering import accuracy, kmeans, nmi, purity
from .data import atomic_write_text, load_labels, load_manifest, load_matrix, save_matrix
from .graphs import AnchorSet, select_anchors_kmeans, select_anchors_svd

_GRID_RANGE = (-3.0, 3.0)


def _write_json(path, payload: dict) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _matrix_format(path) -> str:
    return "mvb" if Path(path).suffix == ".mvb" else "csv"


def _load_anchor_file(path) -> AnchorSet:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    try:
        return AnchorSet.from_dict(payload)
    except KeyError as exc:
        raise ValueError(f"anchors file {path} is missing key {exc}") from exc


def _select_anchors(dataset, k: int, method: str, seed: int) -> AnchorSet:
    if method == "svd":
        return select_anchors_svd(dataset.views, k)
    return select_anchors_kmeans(dataset.views, k, seed=seed)


def cmd_anchors(args) -> int:
    """Rank anchors from a manifest and write them as JSON."""
    dataset = load_manifest(args.manifest)
    anchors = _select_anchors(dataset, args.k, args.method, args.seed)
    payload = anchors.to_dict()
    payload["k"] = len(anchors)
    _write_json(args.out, payload)
    return 0


def _tcgf_config(args, lambda_e: float, lambda_r: float) -> tcgf_mod.TcgfConfig:
    return tcgf_mod.TcgfConfig(
        dim=args.dim,
        lambda_e=lambda_e,
        lambda_r=lambda_r,
        gamma=args.gamma,
        tol=args.tol,
        max_iter=args.max_iter,
        seed=args.seed,
    )


def _write_tcgf_outputs(out_dir: Path, result) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    save_matrix(out_dir / "embedding.csv", result.embedding, "csv")
    save_matrix(out_dir / "anchor_embedding.csv", result.anchor_embedding, "csv")
    _write_json(out_dir / "alpha.json", {"alpha": [float(a) for a in result.alpha]})
    atomic_write_text(
        out_dir / "history.csv",
        tcgf_mod.history_to_csv(result.history, n_views=len(result.alpha)),
    )


def _tcgf_flags(args) -> dict:
    return {
        "command": "tcgf",
        "manifest": str(args.manifest),
        "anchors": str(args.anchors) if args.anchors else None,
        "k": args.k,
        "anchor_method": args.anchor_method,
        "lambda_e": args.lambda_e,
        "lambda_r": args.lambda_r,
        "gamma": args.gamma,
        "dim": args.dim,
        "knn": args.knn,
        "tol": args.tol,
        "max_iter": args.max_iter,
        "seed": args.seed,
        "grid": args.grid,
        "out_dir": str(args.out_dir),
    }


def cmd_tcgf(args) -> int:
    """Run the consensus-graph solver end to end on a manifest."""
    dataset = load_manifest(args.manifest)
    if args.anchors:
        anchors = _load_anchor_file(args.anchors)
    else:
        anchors = _select_anchors(dataset, args.k, args.anchor_method, args.seed)
    out_dir = Path(args.out_dir)
    if args.grid is None:
        result = tcgf_mod.solve_dataset(
            dataset, _tcgf_config(args, args.lambda_e, args.lambda_r), anchors=anchors, knn=args.knn
        )
        _write_tcgf_outputs(out_dir, result)
        payload = _tcgf_flags(args)
        payload.update(
            converged=result.converged,
            iterations=result.iterations,
            rank_deficient=result.rank_deficient,
        )
        _write_json(out_dir / "run_config.json", payload)
        return 0 if result.converged else 3

    values = np.logspace(_GRID_RANGE[0], _GRID_RANGE[1], args.grid)
    cells = []
    all_converged = True
    for lambda_e in values:
        for lambda_r in values:
            cell_dir = out_dir / f"grid_le{lambda_e:g}_lr{lambda_r:g}"
            result = tcgf_mod.solve_dataset(
                dataset,
                _tcgf_config(args, float(lambda_e), float(lambda_r)),
                anchors=anchors,
                knn=args.knn,
            )
            _write_tcgf_outputs(cell_dir, result)
            cell_payload = _tcgf_flags(args)
            cell_payload.update(
                lambda_e=float(lambda_e),
                lambda_r=float(lambda_r),
                grid=None,
                out_dir=str(cell_dir),
                converged=result.converged,
                iterations=result.iterations,
                rank_deficient=result.rank_deficient,
            )
            _write_json(cell_dir / "run_config.json", cell_payload)
            cells.append(
                {
                    "dir": cell_dir.name,
                    "lambda_e": float(lambda_e),
                    "lambda_r": float(lambda_r),
                    "converged": result.converged,
                    "iterations": result.iterations,
                }
            )
            all_converged = all_converged and result.converged
    payload = _tcgf_flags(args)
    payload["cells"] = cells
    payload["converged"] = all_converged
    _write_json(out_dir / "run_config.json", payload)
    return 0 if all_converged else 3


def cmd_gcmf(args) -> int:
    """Run the alternating eigensolver and export per-view embeddings."""
    dataset = load_manifest(args.manifest)
    config = gcmf_mod.GcmfConfig(
        dim=args.dim,
        neighbors=args.neighbors,
        lambda_c=args.lambda_c,
        kernel=args.kernel,
        tol=args.tol,
        max_sweeps=args.max_sweeps,
    )
    result = gcmf_mod.solve(dataset, config)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for v, u in enumerate(result.embeddings):
        save_matrix(out_dir / f"embedding_view{v + 1}.csv", u.T, "csv")
    atomic_write_text(out_dir / "history.csv", gcmf_mod.history_to_csv(result.objective_history))
    _write_json(
        out_dir / "run_config.json",
        {
            "command": "gcmf",
            "manifest": str(args.manifest),
            "neighbors": args.neighbors,
            "lambda_c": args.lambda_c,
            "dim": args.dim,
            "kernel": args.kernel,
            "tol": args.tol,
            "max_sweeps": args.max_sweeps,
            "out_dir": str(args.out_dir),
            "converged": result.converged,
            "sweeps": result.sweeps,
            "tie_flags": list(result.tie_flags),
        },
    )
    return 0 if result.converged else 3


def cmd_cluster_eval(args) -> int:
    """Score an embedding with repeated k-means and write metrics JSON."""
    embedding = load_matrix(args.embedding, _matrix_format(args.embedding))
    truth = load_labels(args.truth) if args.truth else None
    if truth is not None and truth.shape[0] != embedding.shape[0]:
        raise ValueError(
            f"embedding has {embedding.shape[0]} rows but truth has {truth.shape[0]} labels"
        )
    if args.repeats < 1:
        raise ValueError(f"repeats must be at least 1, got {args.repeats}")
    seeds = np.random.SeedSequence(args.seed).generate_state(args.repeats)
    runs = [kmeans(embedding, args.clusters, seed=int(s)) for s in seeds]
    best = min(range(len(runs)), key=lambda i: runs[i].inertia)
    inertias = np.array([r.inertia for r in runs])
    payload = {
        "clusters": args.clusters,
        "repeats": args.repeats,
        "seed": args.seed,
        "labels": runs[best].labels.tolist(),
        "inertia": float(inertias.mean()),
        "inertia_std": float(inertias.std()),
    }
    if truth is not None:
        for name, metric in (("acc", accuracy), ("nmi", nmi), ("purity", purity)):
            scores = np.array([metric(r.labels, truth) for r in runs])
            payload[name] = float(scores.mean())
            payload[f"{name}_std"] = float(scores.std())
    _write_json(args.out, payload)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mvtensor", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    anchors = sub.add_parser("anchors", help="rank representative samples from a manifest")
    anchors.add_argument("--manifest", required=True)
    anchors.add_argument("--k", type=int, required=True)
    anchors.add_argument("--method", choices=("svd", "kmeans"), default="svd")
    anchors.add_argument("--seed", type=int, default=0)
    anchors.add_argument("--out", required=True)
    anchors.set_defaults(func=cmd_anchors)

    tcgf = sub.add_parser("tcgf", help="run the tensorized consensus-graph solver")
    tcgf.add_argument("--manifest", required=True)
    anchor_src = tcgf.add_mutually_exclusive_group(required=True)
    anchor_src.add_argument("--anchors", help="anchors JSON produced by the anchors command")
    anchor_src.add_argument("--k", type=int, help="number of anchors to select")
    tcgf.add_argument("--anchor-method", choices=("svd", "kmeans"), default="svd")
    tcgf.add_argument("--lambda-e", type=float, default=0.1)
    tcgf.add_argument("--lambda-r", type=float, default=1.0)
    tcgf.add_argument("--gamma", type=float, default=0.5)
    tcgf.add_argument("--dim", type=int, required=True)
    tcgf.add_argument("--knn", type=int, default=5)
    tcgf.add_argument("--tol", type=float, default=1e-6)
    tcgf.add_argument("--max-iter", type=int, default=100)
    tcgf.add_argument("--seed", type=int, default=0)
    tcgf.add_argument("--grid", type=int, help="points per axis of a log-spaced lambda sweep")
    tcgf.add_argument("--out-dir", required=True)
    tcgf.set_defaults(func=cmd_tcgf)

    gcmf = sub.add_parser("gcmf", help="run the alternating eigensolver")
    gcmf.add_argument("--manifest", required=True)
    gcmf.add_argument("--neighbors", type=int, default=5)
    gcmf.add_argument("--lambda-c", type=float, default=1.0)
    gcmf.add_argument("--dim", type=int, required=True)
    gcmf.add_argument("--kernel", choices=("gaussian", "linear"), default="gaussian")
    gcmf.add_argument("--tol", type=float, default=1e-6)
    gcmf.add_argument("--max-sweeps", type=int, default=50)
    gcmf.add_argument("--out-dir", required=True)
    gcmf.set_defaults(func=cmd_gcmf)

    ce = sub.add_parser("cluster-eval", help="score an embedding with repeated k-means")
    ce.add_argument("--embedding", required=True)
    ce.add_argument("--clusters", type=int, required=True)
    ce.add_argument("--truth")
    ce.add_argument("--repeats", type=int, default=10)
    ce.add_argument("--seed", type=int, default=0)
    ce.add_argument("--out", required=True)
    ce.set_defaults(func=cmd_cluster_eval)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    threads = os.environ.get("MVTENSOR_THREADS")
    if threads is not None:
        try:
            limit = int(threads)
        except ValueError:
            print(f"error: MVTENSOR_THREADS must be an integer, got {threads!r}", file=sys.stderr)
            return 2
        if limit < 1:
            print(f"error: MVTENSOR_THREADS must be positive, got {limit}", file=sys.stderr)
            return 2
    else:
        limit = None
    try:
        if limit is None:
            return args.func(args)
        with threadpool_limits(limits=limit):
            return args.func(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except RuntimeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
