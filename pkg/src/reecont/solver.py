"""Relative entropy of entanglement with certified bounds.

The solver minimizes ``rho -> S(sigma | x rho + (1 - x) I/N)`` over the
chosen convex set with Frank-Wolfe.  Mixing in the maximally mixed state
keeps every iterate full rank, and the error this introduces is at most
``-ln x``, so bounds on the mixed problem convert into bounds on the
original one.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Literal

import numpy as np
from scipy.optimize import minimize

from . import linalg
from .entropy import relative_entropy, von_neumann_entropy
from .errors import ConvergenceFailure, DimensionMismatch, NonPositiveSpectrum, OutOfDomain
from .sets import DEFAULT_X, ConvexSetSpec, shift
from .states import DensityMatrix, _trusted

_log = logging.getLogger(__name__)

# projections inside local refinement only need to be good, not exact: the
# result is repaired to exact feasibility and the gap is re-certified by the oracle
REFINE_PROJECTION_TOL = 1e-7


@dataclass(frozen=True)
class SolverOptions:
    max_iters: int = 50_000
    gap_tol: float = 1e-6
    x: float = DEFAULT_X
    line_search_tol: float = 1e-12
    restarts: int = 32
    seed: int = 0
    variant: str = "pairwise"
    # local refinement of the iterate every this many steps (0 disables)
    refine_every: int = 10
    refine_iters: int = 200
    # raise ConvergenceFailure at max_iters (the partial result rides on the exception)
    strict: bool = True

    def __post_init__(self):
        if self.gap_tol <= 0:
            raise OutOfDomain("gap_tol must be positive")
        if not 0.5 <= self.x < 1.0:
            raise OutOfDomain(f"x must satisfy 1/2 <= x < 1, got {self.x!r}")

    def replace(self, **changes) -> "SolverOptions":
        return replace(self, **changes)


@dataclass(frozen=True)
class CertifiedValue:
    lower: float
    upper: float
    minimizer: DensityMatrix
    fw_gap: float
    iterations: int
    x: float
    confidence: Literal["certified", "heuristicLower"]
    converged: bool = True
    history: list = field(default_factory=list, repr=False, compare=False)

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def contains(self, value: float, slack: float = 0.0) -> bool:
        return self.lower - slack <= value <= self.upper + slack

    def to_dict(self, units: float = 1.0) -> dict:
        return {
            "lower": self.lower / units,
            "upper": self.upper / units,
            "fwGap": self.fw_gap / units,
            "iterations": self.iterations,
            "x": self.x,
            "confidence": self.confidence,
            "converged": self.converged,
        }


# --- gradient and line search ----------------------------------------------------


def _log_divided_difference(w: np.ndarray) -> np.ndarray:
    """Matrix of first divided differences of ``ln`` at the eigenvalues ``w``."""
    wi = w[:, None]
    wj = w[None, :]
    diff = wi - wj
    close = np.abs(diff) <= 1e-8 * np.maximum(wi, wj)
    with np.errstate(divide="ignore", invalid="ignore"):
        phi = np.where(close, 2.0 / (wi + wj), (np.log(wi) - np.log(wj)) / np.where(close, 1.0, diff))
    return phi


class _Objective:
    """``rho -> S(sigma|rho)`` on full-rank ``rho`` with cached sigma data."""

    def __init__(self, sigma: DensityMatrix):
        self.sigma = sigma.matrix
        self.neg_entropy = -von_neumann_entropy(sigma)

    def eig(self, rho: np.ndarray):
        w, v = np.linalg.eigh(rho)
        if w[0] <= linalg.SPECTRAL_FLOOR:
            raise NonPositiveSpectrum(f"smallest eigenvalue {w[0]:.3e}")
        st = v.conj().T @ self.sigma @ v
        return w, v, st

    def value(self, w, st) -> float:
        return self.neg_entropy - float(np.sum(st.diagonal().real * np.log(w)))

    @staticmethod
    def gradient(w, v, st) -> np.ndarray:
        gt = -st * _log_divided_difference(w)
        return linalg.hermitize(v @ gt @ v.conj().T)

    def directional(self, rho: np.ndarray, direction: np.ndarray) -> float:
        w, v, st = self.eig(rho)
        dt = v.conj().T @ direction @ v
        return float(-np.sum(st * _log_divided_difference(w) * dt.T).real)


def relent_gradient(sigma: DensityMatrix, rho: DensityMatrix) -> np.ndarray:
    """Gradient of ``rho -> -tr(sigma ln rho)`` (Daleckii-Krein form).

    In the eigenbasis of ``rho`` the gradient is ``-sigma_ij * phi_ij`` where
    ``phi`` holds the divided differences of ``ln``; it is rotated back to the
    computational basis before returning.
    """
    r = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho)
    w, v = np.linalg.eigh(r)
    if w[0] <= linalg.SPECTRAL_FLOOR:
        raise NonPositiveSpectrum(f"gradient needs a full-rank state; smallest eigenvalue {w[0]:.3e}")
    s = sigma.matrix if isinstance(sigma, DensityMatrix) else np.asarray(sigma)
    return _Objective.gradient(w, v, v.conj().T @ s @ v)


def _line_search(obj: _Objective, rho: np.ndarray, omega: np.ndarray, tol: float) -> float:
    d = omega - rho
    if np.max(np.abs(d)) == 0.0:
        return 0.0
    if obj.directional(rho, d) >= 0.0:
        return 0.0
    if obj.directional(omega, d) <= 0.0:
        return 1.0
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if obj.directional(rho + mid * d, d) > 0.0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def line_search(sigma: DensityMatrix, rho: DensityMatrix, omega: DensityMatrix, tol: float = 1e-12) -> float:
    """Exact line search for ``g(t) = S(sigma | rho + t (omega - rho))`` on [0, 1].

    ``g`` is convex, so the root of ``g'`` is bracketed by bisection.
    Returns 0 when ``omega`` equals ``rho``.
    """
    return _line_search(_Objective(sigma), rho.matrix, omega.matrix, tol)


# --- Frank-Wolfe ---------------------------------------------------------------------


def _factor_product(atom: np.ndarray, dims) -> tuple[np.ndarray, np.ndarray]:
    # rank-one product projector -> (a, b) with |a b><a b| == atom
    da, db = dims
    _, vecs = np.linalg.eigh(atom)
    u, sv, vh = np.linalg.svd(vecs[:, -1].reshape(da, db))
    return u[:, 0] * np.sqrt(sv[0]), vh[0] * np.sqrt(sv[0])


def _refine_product(obj: "_Objective", x: float, atoms, weights, dims, max_iter: int):
    """Local L-BFGS over the weights and factors of product atoms.

    Weights are parametrized as normalized squares and factors as free
    complex vectors, so the search is unconstrained and every point is a
    separable state.  Returns refined ``(atoms, weights)``.
    """
    da, db = dims
    n = da * db
    k = len(atoms)
    tau = np.eye(n) / n
    factors = [_factor_product(a, dims) for a in atoms]
    al0 = np.array([f[0] for f in factors])
    be0 = np.array([f[1] for f in factors])
    z0 = np.concatenate([np.sqrt(weights), al0.real.ravel(), al0.imag.ravel(), be0.real.ravel(), be0.imag.ravel()])
    o1, o2, o3, o4 = k, k + k * da, k + 2 * k * da, k + 2 * k * da + k * db

    def unpack(z):
        p = z[:k]
        al = (z[o1:o2] + 1j * z[o2:o3]).reshape(k, da)
        be = (z[o3:o4] + 1j * z[o4:]).reshape(k, db)
        return p, al, be

    def fun(z):
        p, al, be = unpack(z)
        psi = (al[:, :, None] * be[:, None, :]).reshape(k, n)
        na = np.sum(np.abs(al) ** 2, axis=1)
        nb = np.sum(np.abs(be) ** 2, axis=1)
        nrm = na * nb
        total = np.sum(p**2)
        w = p**2 / total
        r = np.einsum("k,ki,kj->ij", w / nrm, psi, psi.conj())
        ev, vec, st = obj.eig(x * r + (1 - x) * tau)
        f = obj.value(ev, st)
        gr = x * obj.gradient(ev, vec, st)
        gpsi = psi @ gr.T
        q = np.real(np.sum(psi.conj() * gpsi, axis=1)) / nrm
        qbar = np.sum(w * q)
        dp = 2 * p / total * (q - qbar)
        gm = gpsi.reshape(k, da, db)
        coef = (w / nrm)[:, None]
        dal = coef * (np.einsum("kab,kb->ka", gm, be.conj()) - (q * nb)[:, None] * al)
        dbe = coef * (np.einsum("kab,ka->kb", gm, al.conj()) - (q * na)[:, None] * be)
        grad = np.concatenate([dp, 2 * dal.real.ravel(), 2 * dal.imag.ravel(), 2 * dbe.real.ravel(), 2 * dbe.imag.ravel()])
        return f, grad

    res = minimize(fun, z0, jac=True, method="L-BFGS-B", options={"maxiter": max_iter, "ftol": 1e-16, "gtol": 1e-14})
    p, al, be = unpack(res.x)
    w = p**2 / np.sum(p**2)
    psi = (al[:, :, None] * be[:, None, :]).reshape(k, n)
    psi /= np.linalg.norm(psi, axis=1, keepdims=True)
    keep = w > 0.0
    new_atoms = [np.outer(v, v.conj()) for v in psi[keep]]
    return new_atoms, w[keep] / w[keep].sum()


def _refine_projection(obj: "_Objective", x: float, r: np.ndarray, project, dims, steps: int) -> np.ndarray:
    """Projected gradient with Barzilai-Borwein steps and Armijo backtracking."""
    n = dims.N
    tau = np.eye(n) / n
    ev, vec, st = obj.eig(x * r + (1 - x) * tau)
    f = obj.value(ev, st)
    gr = x * obj.gradient(ev, vec, st)
    size = 1.0 / max(np.linalg.norm(gr), 1e-300)
    for _ in range(steps):
        while size > 1e-14:
            cand = project(r - size * gr, dims, tol=REFINE_PROJECTION_TOL).matrix
            ev2, vec2, st2 = obj.eig(x * cand + (1 - x) * tau)
            f2 = obj.value(ev2, st2)
            if f2 <= f - 1e-4 * float(np.real(np.vdot(gr, r - cand))):
                break
            size *= 0.25
        else:
            break
        gr2 = x * obj.gradient(ev2, vec2, st2)
        step, dg = cand - r, gr2 - gr
        curv = float(np.real(np.vdot(step, dg)))
        moved = np.linalg.norm(step)
        r, f, ev, vec, st, gr = cand, f2, ev2, vec2, st2, gr2
        if moved <= 1e-12:
            break
        size = float(np.real(np.vdot(step, step))) / curv if curv > 0 else 1.0 / max(np.linalg.norm(gr), 1e-300)
        size = min(size, 1e6)
    return r


def ree_shifted(sigma: DensityMatrix, spec: ConvexSetSpec, opts: SolverOptions | None = None) -> CertifiedValue:
    """Certified interval for ``inf_{rho in D} S(sigma | x rho + (1-x) I/N)``.

    ``spec.x`` is the mixing weight.  The iterate is kept as a convex
    combination of oracle atoms, starting from the maximally mixed state.
    With ``variant="pairwise"`` each step moves weight from the active atom
    with the largest linearized cost to the new oracle atom; with
    ``"classic"`` it moves toward the new atom from the whole iterate.
    Either way the step length comes from an exact line search.  Every
    ``opts.refine_every`` steps the iterate is also improved locally
    (product-atom L-BFGS for SEP, projected gradient for PPT); refinement
    only accepts descent, so the objective never increases.

    The returned ``minimizer`` is the point in the set itself and ``upper``
    equals ``S(sigma | shift(minimizer, x))``.  ``lower`` is the best
    Frank-Wolfe dual bound ``f - gap`` seen over all iterations.
    """
    opts = opts or SolverOptions()
    x = spec.x
    if not 0.0 < x < 1.0:
        raise OutOfDomain(f"the mixed problem needs 0 < x < 1, got {x!r}")
    if sigma.dims != spec.dims:
        raise DimensionMismatch(f"state dims {tuple(sigma.dims)} differ from set dims {tuple(spec.dims)}")
    if opts.variant not in ("pairwise", "classic"):
        raise ValueError(f"unknown Frank-Wolfe variant {opts.variant!r}")
    dims = spec.dims
    n = dims.N
    tau = np.eye(n) / n
    obj = _Objective(sigma)
    oracle = spec.oracle
    confidence = "certified" if oracle.exact_oracle else "heuristicLower"

    if oracle.refine == "product":
        atoms = [np.diag(row).astype(complex) for row in np.eye(n)]
        weights = np.full(n, 1.0 / n)
    else:
        atoms = [tau.astype(complex)]
        weights = np.ones(1)
    r = np.einsum("i,ijk->jk", weights, np.asarray(atoms))
    w, v, st = obj.eig(x * r + (1 - x) * tau)
    f = obj.value(w, st)
    lower = -math.inf
    gap = math.inf
    last = None
    history = []
    converged = False
    k = 0
    for k in range(1, opts.max_iters + 1):
        g = obj.gradient(w, v, st)
        lm = spec.linmin(g, seed=[opts.seed, k], restarts=opts.restarts, start=last)
        last = lm.atom
        s_atom = lm.atom.matrix
        # gap against the shifted set: tr(G (rho - omega)) with omega = shift(atom)
        gap = x * float(np.real(np.vdot(g, r - s_atom)))
        lower = max(lower, f - gap)
        history.append((f, gap))
        if gap <= opts.gap_tol:
            converged = True
            break

        rho = x * r + (1 - x) * tau
        idx = next((i for i, a in enumerate(atoms) if np.max(np.abs(a - s_atom)) <= 1e-12), None)
        if idx is None:
            atoms.append(s_atom)
            weights = np.append(weights, 0.0)
            idx = len(atoms) - 1
        if opts.variant == "classic":
            target = s_atom
            span = 1.0
        else:
            costs = np.array([np.real(np.vdot(g, a)) for a in atoms])
            costs[weights <= 0.0] = -np.inf
            away = int(np.argmax(costs))
            span = weights[away]
            target = r + span * (s_atom - atoms[away])
        t = _line_search(obj, rho, x * target + (1 - x) * tau, opts.line_search_tol)
        if t == 0.0 and not opts.refine_every:
            # no descent along the chosen direction: the gap is at rounding level
            converged = gap <= 10 * opts.gap_tol
            break
        if opts.variant == "classic":
            weights *= 1.0 - t
            weights[idx] += t
        else:
            moved = t * span
            weights[idx] += moved
            weights[away] = 0.0 if t == 1.0 else weights[away] - moved
        keep = weights > 0.0
        atoms = [a for a, kp in zip(atoms, keep) if kp]
        weights = weights[keep] / weights[keep].sum()

        if opts.refine_every and (k % opts.refine_every == 0 or t == 0.0) and oracle.refine:
            if oracle.refine == "product":
                atoms, weights = _refine_product(obj, x, atoms, weights, dims, opts.refine_iters)
            else:
                atoms = [_refine_projection(obj, x, np.einsum("i,ijk->jk", weights, np.asarray(atoms)), oracle.project, dims, opts.refine_iters)]
                weights = np.ones(1)
        r_new = np.einsum("i,ijk->jk", weights, np.asarray(atoms))
        w_new, v_new, st_new = obj.eig(x * r_new + (1 - x) * tau)
        f_new = obj.value(w_new, st_new)
        if f_new > f + 1e-12:
            _log.warning("Frank-Wolfe ascent of %.3e at iteration %d", f_new - f, k)
        if t == 0.0 and f_new >= f - 1e-15:
            converged = gap <= 10 * opts.gap_tol
            break
        r, w, v, st, f = r_new, w_new, v_new, st_new, f_new
    lower = max(lower, 0.0)
    result = CertifiedValue(
        lower=min(lower, max(f, 0.0)),
        upper=max(f, 0.0),
        minimizer=_trusted(r, dims),
        fw_gap=gap,
        iterations=k,
        x=x,
        confidence=confidence,
        converged=converged,
        history=history,
    )
    if not converged and opts.strict:
        raise ConvergenceFailure(
            f"Frank-Wolfe gap {gap:.3e} above {opts.gap_tol:g} after {k} iterations", partial=result
        )
    return result


def ree(sigma: DensityMatrix, spec: ConvexSetSpec, opts: SolverOptions | None = None) -> CertifiedValue:
    """Certified interval for ``E(sigma) = inf_{rho in D} S(sigma | rho)``.

    Solves the mixed problem at ``opts.x`` and widens its lower end by
    ``ln x``.  For ``x >= 1/2`` the widening is at most ``2 (1 - x)``.
    """
    opts = opts or SolverOptions()
    try:
        shifted = ree_shifted(sigma, spec.with_x(opts.x), opts)
    except ConvergenceFailure as exc:
        partial = None if exc.partial is None else _unshift(exc.partial)
        raise ConvergenceFailure(str(exc), partial=partial) from exc
    return _unshift(shifted)


def _unshift(cv: CertifiedValue) -> CertifiedValue:
    return replace(cv, lower=max(cv.lower + math.log(cv.x), 0.0))


def closest_state(sigma: DensityMatrix, spec: ConvexSetSpec, opts: SolverOptions | None = None) -> DensityMatrix:
    """A representative closest state in the set.

    The minimizer need not be unique; the one returned is the first found
    for the given seed and options.
    """
    return ree(sigma, spec, opts).minimizer


def recheck_upper(sigma: DensityMatrix, cv: CertifiedValue) -> float:
    """Recompute ``S(sigma | shift(minimizer, x))`` from scratch."""
    return relative_entropy(sigma, shift(cv.minimizer, cv.x))
