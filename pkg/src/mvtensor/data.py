"""Dataset ingestion, synthetic data, and file persistence.

A dataset is a JSON manifest next to one matrix file per view (CSV or
the MVB binary format) plus an optional integer label file.  All
writers are atomic: content lands in a temp file that is renamed over
the target.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "MultiViewDataset",
    "load_matrix",
    "save_matrix",
    "load_labels",
    "save_labels",
    "load_manifest",
    "save_dataset",
    "make_synthetic_blobs",
    "atomic_write_bytes",
    "atomic_write_text",
]

_MAGIC = b"MVB1"
_FORMATS = ("csv", "mvb")


@dataclass
class MultiViewDataset:
    """Per-view feature matrices over a shared sample set."""

    name: str
    views: list[np.ndarray]
    labels: np.ndarray | None = None

    def __post_init__(self):
        if not self.views:
            raise ValueError("dataset needs at least one view")
        self.views = [np.asarray(v, dtype=float) for v in self.views]
        n = self.views[0].shape[0]
        for i, v in enumerate(self.views):
            if v.ndim != 2:
                raise ValueError(f"view {i} must be a matrix, got ndim={v.ndim}")
            if v.shape[0] != n:
                raise ValueError(
                    f"views must share the sample count: view 0 has {n}, "
                    f"view {i} has {v.shape[0]}"
                )
            if not np.isfinite(v).all():
                raise ValueError(f"view {i} contains non-finite entries")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=int)
            if self.labels.shape != (n,):
                raise ValueError(
                    f"labels must have length {n}, got shape {self.labels.shape}"
                )

    @property
    def n_samples(self) -> int:
        return self.views[0].shape[0]

    @property
    def n_views(self) -> int:
        return len(self.views)


def atomic_write_bytes(path, payload: bytes) -> None:
    """Write bytes through a same-directory temp file and rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def _located_nonfinite_error(matrix, path):
    bad = np.argwhere(~np.isfinite(matrix))
    if bad.size:
        i, j = bad[0]
        raise ValueError(f"{path}: non-finite value at row {i}, column {j}")


def _load_csv(path) -> np.ndarray:
    rows = []
    width = None
    with open(path, "r", encoding="utf-8") as handle:
        for r, line in enumerate(handle):
            line = line.strip()
            if not line:
                continue
            cells = line.split(",")
            if width is None:
                width = len(cells)
            elif len(cells) != width:
                raise ValueError(
                    f"{path}: row {r} has {len(cells)} columns, expected {width}"
                )
            parsed = []
            for c, cell in enumerate(cells):
                try:
                    parsed.append(float(cell))
                except ValueError:
                    raise ValueError(
                        f"{path}: non-numeric value {cell!r} at row {r}, column {c}"
                    ) from None
            rows.append(parsed)
    if not rows:
        raise ValueError(f"{path}: CSV has zero rows")
    matrix = np.array(rows, dtype=float)
    _located_nonfinite_error(matrix, path)
    return matrix


def _save_csv(path, matrix) -> None:
    lines = [",".join(repr(float(v)) for v in row) for row in matrix]
    atomic_write_text(path, "\n".join(lines) + "\n")


def _load_mvb(path) -> np.ndarray:
    payload = Path(path).read_bytes()
    if len(payload) < 12 or payload[:4] != _MAGIC:
        raise ValueError(f"{path}: bad magic, not an MVB matrix file")
    rows, cols = struct.unpack("<II", payload[4:12])
    if rows == 0:
        raise ValueError(f"{path}: MVB file has zero rows")
    expected = 12 + rows * cols * 8
    if len(payload) < expected:
        raise ValueError(
            f"{path}: truncated payload, expected {expected} bytes, got {len(payload)}"
        )
    if len(payload) > expected:
        raise ValueError(
            f"{path}: trailing bytes, expected {expected} bytes, got {len(payload)}"
        )
    matrix = np.frombuffer(payload, dtype="<f8", offset=12).reshape(rows, cols).copy()
    _located_nonfinite_error(matrix, path)
    return matrix


def _save_mvb(path, matrix) -> None:
    matrix = np.ascontiguousarray(matrix, dtype="<f8")
    header = struct.pack("<4sII", _MAGIC, matrix.shape[0], matrix.shape[1])
    atomic_write_bytes(path, header + matrix.tobytes())


def load_matrix(path, fmt: str) -> np.ndarray:
    """Load a matrix from a headerless CSV or an MVB binary file."""
    if fmt not in _FORMATS:
        raise ValueError(f"format must be one of {_FORMATS}, got {fmt!r}")
    return _load_csv(path) if fmt == "csv" else _load_mvb(path)


def save_matrix(path, matrix, fmt: str) -> None:
    """Save a matrix as headerless CSV (round-trip precision) or MVB binary."""
    if fmt not in _FORMATS:
        raise ValueError(f"format must be one of {_FORMATS}, got {fmt!r}")
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2:
        raise ValueError(f"matrix must be 2-D, got ndim={matrix.ndim}")
    if fmt == "csv":
        _save_csv(path, matrix)
    else:
        _save_mvb(path, matrix)


def load_labels(path) -> np.ndarray:
    labels = []
    with open(path, "r", encoding="utf-8") as handle:
        for r, line in enumerate(handle):
            line = line.strip()
            if not line:
                continue
            try:
                labels.append(int(line))
            except ValueError:
                raise ValueError(
                    f"{path}: non-integer label {line!r} at row {r}"
                ) from None
    if not labels:
        raise ValueError(f"{path}: label file has zero rows")
    return np.array(labels, dtype=int)


def save_labels(path, labels) -> None:
    atomic_write_text(path, "\n".join(str(int(v)) for v in labels) + "\n")


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _verify_checksum(path, expected: str | None) -> None:
    if expected is None:
        return
    actual = _sha256(path)
    if actual != expected:
        raise ValueError(
            f"{path}: checksum mismatch, manifest says {expected}, file is {actual}"
        )


def load_manifest(path) -> MultiViewDataset:
    """Load a dataset described by a JSON manifest.

    The manifest must provide ``name``, ``n_samples`` and ``views``
    (each with ``name``, ``path``, ``dim``, ``format`` and optionally a
    ``checksum``); ``labels_path`` and ``labels_checksum`` are optional.
    View paths are resolved relative to the manifest location, and
    views load in manifest order.
    """
    path = Path(path)
    payload = json.loads(path.read_text(encoding="utf-8"))
    for key in ("name", "n_samples", "views"):
        if key not in payload:
            raise ValueError(f"{path}: manifest is missing the {key!r} field")
    base = path.parent
    n_samples = int(payload["n_samples"])
    views = []
    for entry in payload["views"]:
        for key in ("name", "path", "dim", "format"):
            if key not in entry:
                raise ValueError(
                    f"{path}: view entry is missing the {key!r} field: {entry}"
                )
        view_path = base / entry["path"]
        _verify_checksum(view_path, entry.get("checksum"))
        matrix = load_matrix(view_path, entry["format"])
        if matrix.shape[0] != n_samples:
            raise ValueError(
                f"view {entry['name']!r}: expected {n_samples} rows, "
                f"file has {matrix.shape[0]}"
            )
        if matrix.shape[1] != int(entry["dim"]):
            raise ValueError(
                f"view {entry['name']!r}: declared dim {entry['dim']}, "
                f"file has {matrix.shape[1]} columns"
            )
        views.append(matrix)
    labels = None
    if payload.get("labels_path"):
        labels_path = base / payload["labels_path"]
        _verify_checksum(labels_path, payload.get("labels_checksum"))
        labels = load_labels(labels_path)
        if labels.shape[0] != n_samples:
            raise ValueError(
                f"labels: expected {n_samples} rows, file has {labels.shape[0]}"
            )
    return MultiViewDataset(name=str(payload["name"]), views=views, labels=labels)


def save_dataset(dataset: MultiViewDataset, out_dir, fmt: str = "csv") -> Path:
    """Write a dataset as per-view matrix files plus a manifest.

    Returns the manifest path.  Checksums are recorded so a later load
    verifies file integrity.
    """
    if fmt not in _FORMATS:
        raise ValueError(f"format must be one of {_FORMATS}, got {fmt!r}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for i, view in enumerate(dataset.views):
        name = f"view{i}"
        filename = f"{name}.{fmt}"
        save_matrix(out_dir / filename, view, fmt)
        entries.append(
            {
                "name": name,
                "path": filename,
                "dim": int(view.shape[1]),
                "format": fmt,
                "checksum": _sha256(out_dir / filename),
            }
        )
    manifest = {
        "name": dataset.name,
        "n_samples": dataset.n_samples,
        "views": entries,
    }
    if dataset.labels is not None:
        save_labels(out_dir / "labels.csv", dataset.labels)
        manifest["labels_path"] = "labels.csv"
        manifest["labels_checksum"] = _sha256(out_dir / "labels.csv")
    manifest_path = out_dir / "manifest.json"
    atomic_write_text(manifest_path, json.dumps(manifest, indent=2) + "\n")
    return manifest_path


def _per_view(value, n_views, name):
    if np.isscalar(value):
        return [value] * n_views
    values = list(value)
    if len(values) != n_views:
        raise ValueError(f"{name} must be scalar or length {n_views}, got {len(values)}")
    return values


def make_synthetic_blobs(
    n_per_cluster: int,
    clusters: int,
    views: int,
    dims,
    noise_sigmas,
    seed: int = 0,
    separation: float = 6.0,
    name: str = "blobs",
) -> MultiViewDataset:
    """Generate a multi-view Gaussian blob dataset with shared labels.

    Cluster centers are drawn once in a latent space and rescaled so the
    closest pair sits at ``separation``; every view applies its own
    random linear map to the centers (an isometry whenever the view
    dimension allows) and adds per-view Gaussian noise.  The draw order
    is fixed, so a seed pins the dataset bit for bit.

    Parameters
    ----------
    n_per_cluster : int
    clusters : int
    views : int
    dims : int or sequence of int
        Feature dimension per view.
    noise_sigmas : float or sequence of float
        Noise scale per view.
    seed : int
    separation : float
        Minimum distance between latent cluster centers.
    name : str

    Returns
    -------
    MultiViewDataset
    """
    if n_per_cluster < 1 or clusters < 1 or views < 1:
        raise ValueError("n_per_cluster, clusters and views must be positive")
    dims = [int(d) for d in _per_view(dims, views, "dims")]
    sigmas = [float(s) for s in _per_view(noise_sigmas, views, "noise_sigmas")]
    if any(d < 1 for d in dims):
        raise ValueError("every view dimension must be positive")
    if any(s < 0 for s in sigmas):
        raise ValueError("noise sigmas must be nonnegative")
    rng = np.random.default_rng(seed)
    latent = rng.standard_normal((clusters, clusters))
    if clusters > 1:
        gaps = np.sqrt(
            np.sum((latent[:, None, :] - latent[None, :, :]) ** 2, axis=2)
        )
        closest = gaps[np.triu_indices(clusters, k=1)].min()
        latent *= separation / max(closest, 1e-12)
    labels = np.repeat(np.arange(clusters), n_per_cluster)
    n = labels.size
    view_mats = []
    for d, sigma in zip(dims, sigmas):
        if d >= clusters:
            # Row-orthonormal map: cluster geometry carries over exactly.
            q, _ = np.linalg.qr(rng.standard_normal((d, clusters)))
            basis = q[:, :clusters].T
        else:
            basis = rng.standard_normal((clusters, d)) / np.sqrt(clusters)
        centers = latent @ basis
        noise = sigma * rng.standard_normal((n, d))
        view_mats.append(centers[labels] + noise)
    return MultiViewDataset(name=name, views=view_mats, labels=labels)
