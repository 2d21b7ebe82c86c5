"""Dense linear algebra for small Hermitian operators.

Matrices are plain complex ``numpy`` arrays.  Bipartite operators are
indexed as ``(a, b)`` with the B index running fastest, i.e. the usual
Kronecker ordering ``|a>|b> -> a * dB + b``.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .errors import ConvergenceFailure, DimensionMismatch, NonPositiveSpectrum, NotHermitian

HERMITIAN_TOL = 1e-12
SPECTRAL_FLOOR = 1e-14


class EigenDecomposition(NamedTuple):
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T


def _dims(dims):
    # accepts BipartiteDims or any (dA, dB) pair
    da, db = (dims.dA, dims.dB) if hasattr(dims, "dA") else dims
    return int(da), int(db)


def as_hermitian(m, tol: float = HERMITIAN_TOL) -> np.ndarray:
    """Return ``m`` as a square complex array, checking Hermitian symmetry."""
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise NotHermitian(f"expected a non-empty square matrix, got shape {a.shape}")
    err = np.max(np.abs(a - a.conj().T))
    if err > tol:
        raise NotHermitian(f"asymmetry {err:.3e} exceeds {tol:g}")
    return a


def is_hermitian(m, tol: float = HERMITIAN_TOL) -> bool:
    try:
        as_hermitian(m, tol)
    except NotHermitian:
        return False
    return True


def hermitize(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.conj().T)


def jacobi_eigh(m, tol: float | None = None, max_sweeps: int = 100) -> EigenDecomposition:
    """Cyclic Jacobi eigensolver for a complex Hermitian matrix.

    Each rotation first removes the phase of the pivot ``a[p, q]`` with a
    diagonal unitary and then applies the real symmetric Jacobi rotation.
    Sweeps stop once the off-diagonal Frobenius norm drops below
    ``tol`` (default ``1e-13 * N``).
    """
    a = as_hermitian(m).copy()
    n = a.shape[0]
    if tol is None:
        tol = 1e-13 * n
    v = np.eye(n, dtype=complex)
    for _ in range(max_sweeps):
        off = np.linalg.norm(a - np.diag(np.diag(a)))
        if off <= tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                mag = abs(apq)
                if mag < 1e-300:
                    continue
                phase = apq / mag
                theta = 0.5 * np.arctan2(2.0 * mag, a[q, q].real - a[p, p].real)
                c, s = np.cos(theta), np.sin(theta)
                # columns p, q of the unitary: diag(1, conj(phase)) @ [[c, s], [-s, c]]
                u = np.array([[c, s], [-s * np.conj(phase), c * np.conj(phase)]])
                idx = [p, q]
                a[:, idx] = a[:, idx] @ u
                a[idx, :] = u.conj().T @ a[idx, :]
                a[q, p] = 0.0
                a[p, q] = 0.0
                v[:, idx] = v[:, idx] @ u
    else:
        off = np.linalg.norm(a - np.diag(np.diag(a)))
        if off > tol:
            raise ConvergenceFailure(f"Jacobi did not converge: off-diagonal norm {off:.3e}")
    w = np.diag(a).real
    order = np.argsort(w, kind="stable")
    return EigenDecomposition(w[order], v[:, order])


def eig_hermitian(m, method: str = "lapack") -> EigenDecomposition:
    """Eigendecomposition with ascending eigenvalues.

    ``method="lapack"`` calls :func:`numpy.linalg.eigh`; ``method="jacobi"``
    uses :func:`jacobi_eigh`.
    """
    a = as_hermitian(m)
    if method == "jacobi":
        return jacobi_eigh(a)
    if method != "lapack":
        raise ValueError(f"unknown method {method!r}")
    w, v = np.linalg.eigh(a)
    return EigenDecomposition(w, v)


def eigvalsh(m) -> np.ndarray:
    return np.linalg.eigvalsh(as_hermitian(m))


def apply_function(m, func, floor: float | None = None) -> np.ndarray:
    """Apply a scalar function spectrally: ``V diag(func(w)) V^dagger``."""
    w, v = eig_hermitian(m)
    if floor is not None and w[0] <= floor:
        raise NonPositiveSpectrum(f"smallest eigenvalue {w[0]:.3e} <= {floor:g}")
    return (v * func(w)) @ v.conj().T


def matrix_log(m) -> np.ndarray:
    """Natural logarithm of a positive definite Hermitian matrix."""
    return apply_function(m, np.log, floor=SPECTRAL_FLOOR)


def partial_transpose(m, dims) -> np.ndarray:
    """Transpose the B factor: ``<a b|M|a' b'> -> <a b'|M|a' b>``."""
    da, db = _dims(dims)
    a = np.asarray(m)
    if a.shape != (da * db, da * db):
        raise DimensionMismatch(f"matrix of shape {a.shape} does not match dims ({da}, {db})")
    return a.reshape(da, db, da, db).transpose(0, 3, 2, 1).reshape(da * db, da * db)


def partial_trace(m, dims, which: str = "B") -> np.ndarray:
    """Trace out subsystem ``which`` (``"A"`` or ``"B"``)."""
    da, db = _dims(dims)
    a = np.asarray(m)
    if a.shape != (da * db, da * db):
        raise DimensionMismatch(f"matrix of shape {a.shape} does not match dims ({da}, {db})")
    t = a.reshape(da, db, da, db)
    if which == "B":
        return np.einsum("ijkj->ik", t)
    if which == "A":
        return np.einsum("ijil->jl", t)
    raise ValueError(f"which must be 'A' or 'B', got {which!r}")


def tensor_product(*ops) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for op in ops:
        out = np.kron(out, np.asarray(op))
    return out


def trace_norm(m) -> float:
    """``tr|M|``; no factor of one half."""
    return float(np.sum(np.abs(eigvalsh(m))))


def operator_norm(m) -> float:
    return float(np.max(np.abs(eigvalsh(m))))


def frobenius_norm(m) -> float:
    return float(np.linalg.norm(m))
