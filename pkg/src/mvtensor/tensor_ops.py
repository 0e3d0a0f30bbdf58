"""Third-order tensor algebra under the circular convolution product.

A third-order tensor is treated as a stack of frontal slices that are
diagonalized by a DFT along the third axis.  All products, factorizations
and proximal steps below are computed slice by slice in the Fourier
domain, exploiting conjugate symmetry of real input so that only about
half of the slices need an explicit SVD.
"""

from __future__ import annotations

from typing import NamedTuple, Sequence

import numpy as np

__all__ = [
    "fft3",
    "ifft3",
    "t_transpose",
    "identity_tensor",
    "t_product",
    "TSvdFactors",
    "t_svd",
    "weighted_tnn",
    "prox_weighted_tnn",
    "stack_rotate",
    "unstack_rotate",
]

# Relative imaginary residue tolerated when casting an inverse FFT back to
# a real tensor.  Anything larger indicates inconsistent Fourier input.
_IMAG_TOL = 1e-8


def _as_tensor3(a, name: str = "tensor") -> np.ndarray:
    a = np.asarray(a)
    if a.ndim != 3:
        raise ValueError(f"{name} must be a third-order array, got ndim={a.ndim}")
    if a.size == 0:
        raise ValueError(f"{name} must be non-empty, got shape {a.shape}")
    if not np.isfinite(a).all():
        raise ValueError(f"{name} contains non-finite entries")
    return a


def fft3(tensor) -> np.ndarray:
    """DFT of a real third-order tensor along its third axis."""
    return np.fft.fft(_as_tensor3(tensor), axis=2)


def ifft3(spectrum) -> np.ndarray:
    """Inverse DFT along the third axis, cast back to a real tensor.

    The imaginary residue is discarded only when it is negligible
    relative to the real part; otherwise the spectrum does not describe
    a real tensor and a ``ValueError`` is raised.
    """
    spectrum = np.asarray(spectrum)
    if spectrum.ndim != 3:
        raise ValueError(f"spectrum must be third-order, got ndim={spectrum.ndim}")
    out = np.fft.ifft(spectrum, axis=2)
    scale = max(1.0, float(np.abs(out.real).max(initial=0.0)))
    residue = float(np.abs(out.imag).max(initial=0.0))
    if residue > _IMAG_TOL * scale:
        raise ValueError(
            "inverse FFT produced imaginary residue "
            f"{residue:.3e} (tolerance {_IMAG_TOL:.0e} relative); "
            "the spectrum is not conjugate symmetric"
        )
    return np.ascontiguousarray(out.real)


def t_transpose(tensor) -> np.ndarray:
    """Transpose every frontal slice and reverse the order of slices 1..n3-1."""
    t = _as_tensor3(tensor)
    out = np.empty((t.shape[1], t.shape[0], t.shape[2]), dtype=t.dtype)
    out[:, :, 0] = t[:, :, 0].T
    if t.shape[2] > 1:
        out[:, :, 1:] = np.transpose(t[:, :, :0:-1], (1, 0, 2))
    return out


def identity_tensor(n: int, n3: int) -> np.ndarray:
    """Identity element of the slice-circulant product: I in slice 0, zeros elsewhere."""
    out = np.zeros((n, n, n3))
    out[:, :, 0] = np.eye(n)
    return out


def t_product(a, b) -> np.ndarray:
    """Circular convolution product of two third-order tensors.

    Equivalent to multiplying the block-circulant unfolding of ``a``
    with the stacked slices of ``b``, but computed slice-wise in the
    Fourier domain.

    Parameters
    ----------
    a : array, shape (n1, n2, n3)
    b : array, shape (n2, n4, n3)

    Returns
    -------
    array, shape (n1, n4, n3)
    """
    a = _as_tensor3(a, "a")
    b = _as_tensor3(b, "b")
    if a.shape[1] != b.shape[0] or a.shape[2] != b.shape[2]:
        raise ValueError(
            f"incompatible shapes for t-product: {a.shape} and {b.shape}"
        )
    af = np.fft.fft(a, axis=2)
    bf = np.fft.fft(b, axis=2)
    cf = np.matmul(af.transpose(2, 0, 1), bf.transpose(2, 0, 1))
    return ifft3(cf.transpose(1, 2, 0))


class TSvdFactors(NamedTuple):
    """Orthogonal factors ``u``, ``v`` and f-diagonal ``s`` with a = u * s * v^T."""

    u: np.ndarray
    s: np.ndarray
    v: np.ndarray


def _mirror_conjugate(spectrum: np.ndarray) -> None:
    # Fill slices n3-j from slice j for real-input conjugate symmetry.
    n3 = spectrum.shape[2]
    for j in range(1, (n3 + 1) // 2):
        spectrum[:, :, n3 - j] = np.conj(spectrum[:, :, j])


def t_svd(tensor, exploit_symmetry: bool = True) -> TSvdFactors:
    """Slice-wise SVD in the Fourier domain.

    Parameters
    ----------
    tensor : array, shape (n1, n2, n3)
    exploit_symmetry : bool
        When true only the first ``n3 // 2 + 1`` Fourier slices are
        factorized and the rest are filled in by conjugate symmetry.

    Returns
    -------
    TSvdFactors
        ``u`` of shape (n1, n1, n3), ``s`` of shape (n1, n2, n3) whose
        Fourier slices are diagonal with non-negative non-increasing
        values, and ``v`` of shape (n2, n2, n3).
    """
    t = _as_tensor3(tensor)
    n1, n2, n3 = t.shape
    tf = np.fft.fft(t, axis=2)
    uf = np.empty((n1, n1, n3), dtype=complex)
    sf = np.zeros((n1, n2, n3), dtype=complex)
    vf = np.empty((n2, n2, n3), dtype=complex)
    diag = np.arange(min(n1, n2))
    n_explicit = n3 // 2 + 1 if exploit_symmetry else n3
    for j in range(n_explicit):
        u, s, vh = np.linalg.svd(tf[:, :, j], full_matrices=True)
        uf[:, :, j] = u
        sf[diag, diag, j] = s
        vf[:, :, j] = vh.conj().T
    if exploit_symmetry:
        _mirror_conjugate(uf)
        _mirror_conjugate(sf)
        _mirror_conjugate(vf)
    return TSvdFactors(ifft3(uf), ifft3(sf), ifft3(vf))


def _check_omega(omega, n_min: int) -> np.ndarray:
    omega = np.asarray(omega, dtype=float)
    if omega.shape != (n_min,):
        raise ValueError(
            f"omega must have shape ({n_min},) to match min(n1, n2), "
            f"got {omega.shape}"
        )
    if not np.isfinite(omega).all() or (omega <= 0).any():
        raise ValueError("omega entries must be finite and strictly positive")
    return omega


def weighted_tnn(tensor, omega) -> float:
    """Weighted tensor nuclear norm: weighted singular values summed over Fourier slices."""
    t = _as_tensor3(tensor)
    n1, n2, n3 = t.shape
    omega = _check_omega(omega, min(n1, n2))
    tf = np.fft.fft(t, axis=2)
    total = 0.0
    for j in range(n3 // 2 + 1):
        mult = 1.0 if j == 0 or 2 * j == n3 else 2.0
        s = np.linalg.svd(tf[:, :, j], compute_uv=False)
        total += mult * float(omega @ s)
    return total


def prox_weighted_tnn(tensor, tau: float, omega, exploit_symmetry: bool = True) -> np.ndarray:
    """Proximal operator of ``tau`` times the weighted tensor nuclear norm.

    Shrinks the singular values of every Fourier slice by ``tau * omega``
    and truncates at zero.

    Parameters
    ----------
    tensor : array, shape (n1, n2, n3)
    tau : float
        Positive step size.
    omega : array, shape (min(n1, n2),)
        Strictly positive weights, one per singular value index.
    exploit_symmetry : bool
        When true, shrink only the non-redundant Fourier slices and
        mirror the rest by conjugate symmetry.

    Returns
    -------
    array, shape (n1, n2, n3)
    """
    t = _as_tensor3(tensor)
    if not tau > 0:
        raise ValueError(f"tau must be strictly positive, got {tau}")
    n1, n2, n3 = t.shape
    omega = _check_omega(omega, min(n1, n2))
    tf = np.fft.fft(t, axis=2)
    zf = np.empty_like(tf)
    n_explicit = n3 // 2 + 1 if exploit_symmetry else n3
    for j in range(n_explicit):
        u, s, vh = np.linalg.svd(tf[:, :, j], full_matrices=False)
        shrunk = np.maximum(s - tau * omega, 0.0)
        zf[:, :, j] = (u * shrunk) @ vh
    if exploit_symmetry:
        _mirror_conjugate(zf)
    return ifft3(zf)


def stack_rotate(graphs: Sequence[np.ndarray]) -> np.ndarray:
    """Stack per-view graphs into a rotated tensor with views along axis 1.

    View ``v`` of the result is the lateral slice ``t[:, v, :]``, so the
    frontal slices mix entries across views and the weighted nuclear
    norm couples the views through shared singular value indices.
    """
    mats = [np.asarray(g, dtype=float) for g in graphs]
    if not mats:
        raise ValueError("at least one view graph is required")
    shape = mats[0].shape
    for v, m in enumerate(mats):
        if m.ndim != 2:
            raise ValueError(f"view {v} must be a matrix, got ndim={m.ndim}")
        if m.shape != shape:
            raise ValueError(
                f"view graphs must share one shape: view 0 is {shape}, "
                f"view {v} is {m.shape}"
            )
    return np.stack(mats, axis=1)


def unstack_rotate(tensor) -> list[np.ndarray]:
    """Inverse of :func:`stack_rotate`: recover the list of per-view graphs."""
    t = _as_tensor3(tensor)
    return [np.ascontiguousarray(t[:, v, :]) for v in range(t.shape[1])]
