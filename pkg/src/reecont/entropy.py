"""Entropic functionals in nats: von Neumann entropy, relative entropy,
``eta`` and the two continuity bounds built from it."""

from __future__ import annotations

import math

import numpy as np

from .errors import DimensionMismatch, OutOfDomain
from .linalg import SPECTRAL_FLOOR

# a sigma eigenvector carrying more weight than this outside supp(rho) makes S infinite
SUPPORT_WEIGHT_TOL = 1e-10
FANNES_MAX_T = 1.0 / 3.0


def _matrix(state) -> np.ndarray:
    return state.matrix if hasattr(state, "matrix") else np.asarray(state, dtype=complex)


def _xlogx(w: np.ndarray) -> np.ndarray:
    out = np.zeros_like(w)
    pos = w > SPECTRAL_FLOOR
    out[pos] = w[pos] * np.log(w[pos])
    return out


def von_neumann_entropy(state) -> float:
    """``-tr(s ln s)``, with ``0 ln 0 = 0``."""
    w = np.linalg.eigvalsh(_matrix(state))
    return max(float(-np.sum(_xlogx(w))), 0.0)


def relative_entropy(sigma, rho) -> float:
    """``S(sigma|rho) = tr sigma ln sigma - tr sigma ln rho``.

    Returns ``math.inf`` when the support of ``sigma`` is not contained in
    the support of ``rho``.  Eigenvalues of ``rho`` at or below the spectral
    floor count as outside its support.
    """
    s = _matrix(sigma)
    r = _matrix(rho)
    if s.shape != r.shape:
        raise DimensionMismatch(f"shapes differ: {s.shape} vs {r.shape}")
    ws, vs = np.linalg.eigh(s)
    wr, vr = np.linalg.eigh(r)
    keep = ws > SPECTRAL_FLOOR
    ws, vs = ws[keep], vs[:, keep]
    # |<r_j|s_i>|^2, rows indexed by sigma eigenvectors
    overlap = np.abs(vs.conj().T @ vr) ** 2
    inside = wr > SPECTRAL_FLOOR
    leak = overlap[:, ~inside].sum(axis=1)
    if np.any(ws * leak > SUPPORT_WEIGHT_TOL):
        return math.inf
    cross = np.sum(ws[:, None] * overlap[:, inside] * np.log(wr[inside])[None, :])
    value = float(np.sum(ws * np.log(ws)) - cross)
    # rounding can push a zero divergence slightly negative
    return 0.0 if -1e-9 <= value < 0.0 else value


def eta(s: float) -> float:
    """``-s ln s`` on [0, 1], with ``eta(0) = 0``."""
    if not 0.0 <= s <= 1.0:
        raise OutOfDomain(f"eta is defined on [0, 1], got {s!r}")
    return 0.0 if s == 0.0 else -s * math.log(s)


def _check_t(t: float):
    if not 0.0 <= t <= FANNES_MAX_T + 1e-15:
        raise OutOfDomain(f"bound requires 0 <= T <= 1/3, got {t!r}")


def fannes_bound(t: float, n: int) -> float:
    """Entropy continuity bound ``T ln N + eta(T)`` for ``T <= 1/3``."""
    _check_t(t)
    return t * math.log(n) + eta(min(t, 1.0))


def theorem_bound(t: float, n: int) -> float:
    """``2 (T ln N + eta(T)) + 4 T``: the continuity bound on the entanglement
    measure for states at trace distance ``T <= 1/3``."""
    _check_t(t)
    return 2.0 * fannes_bound(t, n) + 4.0 * t
