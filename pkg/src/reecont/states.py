"""Bipartite density matrices, canonical states, samplers and file I/O."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import linalg
from .errors import DimensionMismatch, NotDensityMatrix, NotHermitian, NotProbabilityVector

TRACE_TOL = 1e-10
PSD_TOL = 1e-10


@dataclass(frozen=True)
class BipartiteDims:
    dA: int
    dB: int

    def __post_init__(self):
        for name in ("dA", "dB"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise DimensionMismatch(f"{name} must be a positive integer, got {value!r}")

    @property
    def N(self) -> int:
        return self.dA * self.dB

    def power(self, n: int) -> "BipartiteDims":
        """Dimensions of the ``n``-fold tensor power under the A^n : B^n cut."""
        return BipartiteDims(self.dA**n, self.dB**n)

    def __iter__(self):
        yield self.dA
        yield self.dB

    @classmethod
    def parse(cls, text: str) -> "BipartiteDims":
        """Parse ``"2x3"``."""
        try:
            da, db = (int(t) for t in text.lower().split("x"))
        except ValueError as exc:
            raise DimensionMismatch(f"cannot parse dims {text!r}; expected e.g. 2x2") from exc
        return cls(da, db)


def _coerce_dims(dims) -> BipartiteDims:
    if isinstance(dims, BipartiteDims):
        return dims
    return BipartiteDims(*dims)


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """A validated state; construct through :func:`validate_density`."""

    matrix: np.ndarray
    dims: BipartiteDims

    @property
    def N(self) -> int:
        return self.dims.N

    def __array__(self, dtype=None, copy=None):
        return self.matrix if dtype is None else self.matrix.astype(dtype)

    def spectrum(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)

    def purity(self) -> float:
        return float(np.real(np.vdot(self.matrix, self.matrix)))


def validate_density(m, dims) -> DensityMatrix:
    """Check hermiticity, unit trace and positivity.

    Small negative eigenvalues (down to ``-PSD_TOL``) are clipped to zero
    and the result renormalized; anything worse is rejected.
    """
    dims = _coerce_dims(dims)
    a = np.array(m, dtype=complex)
    if a.shape != (dims.N, dims.N):
        raise DimensionMismatch(f"matrix of shape {a.shape} does not match dims {tuple(dims)}")
    try:
        a = linalg.as_hermitian(a, tol=1e-10)
    except NotHermitian as exc:
        raise NotDensityMatrix("hermiticity", str(exc)) from exc
    a = linalg.hermitize(a)
    tr = np.trace(a).real
    if abs(tr - 1.0) > TRACE_TOL:
        raise NotDensityMatrix("trace", f"trace {tr!r} differs from 1")
    w, v = np.linalg.eigh(a)
    if w[0] < -PSD_TOL:
        raise NotDensityMatrix("positivity", f"minimum eigenvalue {w[0]:.3e}")
    if w[0] < -linalg.SPECTRAL_FLOOR:
        w = np.clip(w, 0.0, None)
        w = w / w.sum()
        a = linalg.hermitize((v * w) @ v.conj().T)
    a.setflags(write=False)
    return DensityMatrix(a, dims)


def _trusted(m: np.ndarray, dims: BipartiteDims) -> DensityMatrix:
    # internal constructor for matrices that are states by construction
    a = linalg.hermitize(np.asarray(m, dtype=complex))
    a = a / np.trace(a).real
    a.setflags(write=False)
    return DensityMatrix(a, dims)


def as_state(obj, dims=None) -> DensityMatrix:
    if isinstance(obj, DensityMatrix):
        return obj
    a = np.asarray(obj)
    if dims is None:
        dims = (a.shape[0], 1)
    return validate_density(a, dims)


def pure_state(psi, dims) -> DensityMatrix:
    psi = np.asarray(psi, dtype=complex).ravel()
    psi = psi / np.linalg.norm(psi)
    return _trusted(np.outer(psi, psi.conj()), _coerce_dims(dims))


def maximally_mixed(dims) -> DensityMatrix:
    dims = _coerce_dims(dims)
    return _trusted(np.eye(dims.N) / dims.N, dims)


def bell_vectors() -> np.ndarray:
    """Rows are Phi+, Phi-, Psi+, Psi- in the computational basis."""
    s = 1 / np.sqrt(2)
    return np.array(
        [
            [s, 0, 0, s],
            [s, 0, 0, -s],
            [0, s, s, 0],
            [0, s, -s, 0],
        ],
        dtype=complex,
    )


def bell_state() -> DensityMatrix:
    return pure_state(bell_vectors()[0], (2, 2))


def bell_diagonal(p) -> DensityMatrix:
    p = np.asarray(p, dtype=float)
    if p.shape != (4,) or np.any(p < -1e-12) or abs(p.sum() - 1) > 1e-10:
        raise NotProbabilityVector(f"expected a probability 4-vector, got {p!r}")
    b = bell_vectors()
    return _trusted(np.einsum("i,ij,ik->jk", np.clip(p, 0, None), b, b.conj()), BipartiteDims(2, 2))


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def random_pure(dim: int, seed) -> np.ndarray:
    """Haar-random unit vector: normalized i.i.d. complex Gaussian entries."""
    rng = _rng(seed)
    z = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return z / np.linalg.norm(z)


def random_mixed(dims, rank: int, seed) -> DensityMatrix:
    """Induced-measure state: trace out a ``rank``-dimensional ancilla from a
    Haar-random pure state on ``N * rank`` dimensions."""
    dims = _coerce_dims(dims)
    if rank < 1:
        raise DimensionMismatch(f"rank must be positive, got {rank}")
    psi = random_pure(dims.N * rank, seed).reshape(dims.N, rank)
    return _trusted(psi @ psi.conj().T, dims)


def random_product_pure(dims, seed) -> DensityMatrix:
    dims = _coerce_dims(dims)
    rng = _rng(seed)
    a = random_pure(dims.dA, rng)
    b = random_pure(dims.dB, rng)
    return pure_state(np.kron(a, b), dims)


def mix(s1: DensityMatrix, s2: DensityMatrix, t: float) -> DensityMatrix:
    """``(1 - t) * s1 + t * s2``."""
    _check_same(s1, s2)
    return _trusted((1 - t) * s1.matrix + t * s2.matrix, s1.dims)


def tensor_power(state: DensityMatrix, n: int) -> DensityMatrix:
    """``state`` tensored ``n`` times, reordered so the cut is A^n : B^n."""
    da, db = state.dims
    out = np.ones((1, 1), dtype=complex)
    cur_a, cur_b = 1, 1
    for _ in range(n):
        # (a b) (a' b') with a=(a_prev, a_new) and b=(b_prev, b_new)
        t = np.kron(out, state.matrix).reshape(cur_a, cur_b, da, db, cur_a, cur_b, da, db)
        t = t.transpose(0, 2, 1, 3, 4, 6, 5, 7)
        cur_a, cur_b = cur_a * da, cur_b * db
        out = t.reshape(cur_a * cur_b, cur_a * cur_b)
    return _trusted(out, BipartiteDims(cur_a, cur_b))


def _check_same(s1: DensityMatrix, s2: DensityMatrix):
    if s1.dims != s2.dims:
        raise DimensionMismatch(f"dims differ: {tuple(s1.dims)} vs {tuple(s2.dims)}")


def trace_distance(s1: DensityMatrix, s2: DensityMatrix) -> float:
    """``tr|s1 - s2|`` in [0, 2]."""
    _check_same(s1, s2)
    return linalg.trace_norm(s1.matrix - s2.matrix)


# --- serialization -----------------------------------------------------------


def state_to_dict(state: DensityMatrix) -> dict:
    m = state.matrix
    return {
        "dims": [state.dims.dA, state.dims.dB],
        "matrix": [[[float(z.real), float(z.imag)] for z in row] for row in m],
    }


def state_from_dict(data: dict) -> DensityMatrix:
    try:
        dims = BipartiteDims(*data["dims"])
        arr = np.asarray(data["matrix"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise NotDensityMatrix("hermiticity", f"malformed state file: {exc}") from exc
    if arr.ndim != 3 or arr.shape[2] != 2:
        raise DimensionMismatch(f"matrix entries must be [re, im] pairs, got shape {arr.shape}")
    return validate_density(arr[..., 0] + 1j * arr[..., 1], dims)


def dumps_state(state: DensityMatrix) -> str:
    # json uses repr for floats, which round-trips exactly (17 significant digits max)
    return json.dumps(state_to_dict(state))


def loads_state(text: str) -> DensityMatrix:
    return state_from_dict(json.loads(text))


def save_state(state: DensityMatrix, path) -> None:
    Path(path).write_text(dumps_state(state) + "\n")


def load_state(path) -> DensityMatrix:
    return loads_state(Path(path).read_text())


def spectrum_csv(state: DensityMatrix) -> str:
    """One eigenvalue per line, ascending."""
    return "".join(f"{w!r}\n" for w in state.spectrum().tolist())

