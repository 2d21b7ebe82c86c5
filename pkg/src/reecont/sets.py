"""Convex sets of states and the oracles the solver needs from them.

Two sets are provided: ``SEP`` (separable states) and ``PPT`` (states with
positive partial transpose).  Each exposes a membership test and a linear
minimization oracle ``min tr(G w)`` over the set.  New sets can be added by
registering a :class:`SetOracle` in :data:`ORACLES`.
"""

from __future__ import annotations

import threading
import warnings
from dataclasses import dataclass
from typing import Callable, Literal

import numpy as np

from . import linalg
from .errors import ConvergenceFailure, OutOfDomain
from .states import BipartiteDims, DensityMatrix, _coerce_dims, _trusted, pure_state

MEMBER_TOL = 1e-9
PROJECTION_TOL = 1e-10
MAX_ITERS = 100_000
DEFAULT_X = 1.0 - 1e-6

Confidence = Literal["heuristic", "certified"]


@dataclass(frozen=True)
class LinMinResult:
    atom: DensityMatrix
    value: float
    restarts_used: int
    global_confidence: Confidence


@dataclass(frozen=True)
class ConvexSetSpec:
    """Which set to minimize over, and the weight ``x`` kept on it when
    mixing toward the maximally mixed state."""

    kind: str
    dims: BipartiteDims
    x: float = DEFAULT_X

    def __post_init__(self):
        object.__setattr__(self, "dims", _coerce_dims(self.dims))
        object.__setattr__(self, "kind", self.kind.upper())
        if self.kind not in ORACLES:
            raise ValueError(f"unknown set kind {self.kind!r}; known: {sorted(ORACLES)}")
        if not 0.0 < self.x <= 1.0:
            raise OutOfDomain(f"x must lie in (0, 1], got {self.x!r}")

    @property
    def oracle(self) -> "SetOracle":
        return ORACLES[self.kind]

    def contains(self, state: DensityMatrix, tol: float = MEMBER_TOL) -> bool:
        return self.oracle.member(state, self.dims, tol)

    def linmin(self, g: np.ndarray, seed=0, **kwargs) -> LinMinResult:
        return self.oracle.linmin(g, self.dims, seed=seed, **kwargs)

    def with_x(self, x: float) -> "ConvexSetSpec":
        return ConvexSetSpec(self.kind, self.dims, x)


# --- membership --------------------------------------------------------------


def ppt_member(state, dims=None, tol: float = MEMBER_TOL) -> bool:
    """True iff the partial transpose has no eigenvalue below ``-tol``."""
    m = state.matrix if isinstance(state, DensityMatrix) else np.asarray(state)
    if dims is None:
        dims = state.dims
    return bool(np.linalg.eigvalsh(linalg.partial_transpose(m, dims))[0] >= -tol)


def sep_member(state, dims=None, tol: float = MEMBER_TOL) -> bool:
    """Exact only when ``dA * dB <= 6``, where PPT and separable coincide;
    raises :class:`OutOfDomain` otherwise."""
    if dims is None:
        dims = state.dims
    da, db = _coerce_dims(dims)
    if da * db > 6:
        raise OutOfDomain("separability is only decided here when dA * dB <= 6 (partial transpose test)")
    return ppt_member(state, dims, tol)


def shift(state: DensityMatrix, x: float, dims=None) -> DensityMatrix:
    """``x * state + (1 - x) * I/N``."""
    if not 0.0 < x <= 1.0:
        raise OutOfDomain(f"x must lie in (0, 1], got {x!r}")
    dims = state.dims if dims is None else _coerce_dims(dims)
    n = dims.N
    return _trusted(x * state.matrix + (1.0 - x) / n * np.eye(n), dims)


# --- SEP oracle ----------------------------------------------------------------


def _complement(v: np.ndarray) -> np.ndarray:
    """Batched orthonormal bases of the complement of unit vectors ``v``."""
    r, d = v.shape
    stacked = np.concatenate([v[:, :, None], np.broadcast_to(np.eye(d), (r, d, d))], axis=2)
    q, _ = np.linalg.qr(stacked, mode="reduced")
    return q[:, :, 1:]


def _product_values(g4: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    r = a.shape[0]
    n = a.shape[1] * b.shape[1]
    psi = (a[:, :, None] * b[:, None, :]).reshape(r, n)
    return np.einsum("ri,ri->r", psi.conj(), psi @ g4.reshape(n, n).T).real


def _newton_step(g4: np.ndarray, a: np.ndarray, b: np.ndarray, value: np.ndarray):
    """One safeguarded Newton step for ``<a b|G|a b>`` on the product of spheres.

    Coordinates are the complex tangent offsets of ``a`` and ``b``, split into
    real and imaginary parts.  Negative curvature is flipped and tiny
    curvature floored, and the step is halved until the value decreases.
    Rows that never decrease keep their input vectors.
    """
    r, da = a.shape
    db = b.shape[1]
    ma, mb = da - 1, db - 1
    m = ma + mb
    if m == 0:
        return a, b, value
    qa = _complement(a)
    qb = _complement(b)
    big = np.einsum("ijkl,rk,rl->rij", g4, a, b)  # G|a b> as (dA, dB)
    ca = np.einsum("rki,rl,rkl->ri", qa.conj(), b.conj(), big)
    cb = np.einsum("rk,rlj,rkl->rj", a.conj(), qb.conj(), big)
    n = da * db
    xa = np.einsum("rki,rl->rkli", qa, b).reshape(r, n, ma)
    xb = np.einsum("rk,rlj->rklj", a, qb).reshape(r, n, mb)
    x = np.concatenate([xa, xb], axis=2)
    g2 = g4.reshape(n, n)
    mm = np.einsum("rni,nk,rkj->rij", x.conj(), g2, x) - value[:, None, None] * np.eye(m)
    d = np.einsum("rki,rlj,rkl->rij", qa.conj(), qb.conj(), big).conj()

    h = np.zeros((r, 2 * m, 2 * m))
    h[:, :m, :m] = mm.real
    h[:, m:, m:] = mm.real
    h[:, :m, m:] = -mm.imag
    h[:, m:, :m] = mm.imag
    pa, pb = slice(0, ma), slice(ma, m)
    qa_, qb_ = slice(m, m + ma), slice(m + ma, 2 * m)
    for rows, cols, block in ((pa, pb, d.real), (pa, qb_, -d.imag), (qa_, pb, -d.imag), (qa_, qb_, -d.real)):
        h[:, rows, cols] += block
        h[:, cols, rows] += np.swapaxes(block, 1, 2)
    h *= 2.0
    grad = 2.0 * np.concatenate([ca.real, cb.real, ca.imag, cb.imag], axis=1)

    w, v = np.linalg.eigh(h)
    w = np.maximum(np.abs(w), 1e-10 * np.abs(w).max(axis=1, keepdims=True) + 1e-300)
    z = -np.einsum("rij,rj,rkj,rk->ri", v, 1.0 / w, v, grad)

    best_a, best_b, best_v = a.copy(), b.copy(), value.copy()
    pending = np.ones(r, dtype=bool)
    t = 1.0
    for _ in range(12):
        ua = z[:, :ma] + 1j * z[:, m : m + ma]
        ub = z[:, ma:m] + 1j * z[:, m + ma :]
        na = a + t * np.einsum("rij,rj->ri", qa, ua)
        nb = b + t * np.einsum("rij,rj->ri", qb, ub)
        na /= np.linalg.norm(na, axis=1, keepdims=True)
        nb /= np.linalg.norm(nb, axis=1, keepdims=True)
        nv = _product_values(g4, na, nb)
        ok = pending & (nv < best_v)
        best_a[ok], best_b[ok], best_v[ok] = na[ok], nb[ok], nv[ok]
        pending &= ~ok
        if not pending.any():
            break
        t *= 0.5
    return best_a, best_b, best_v


def sep_linmin(
    g: np.ndarray,
    dims,
    restarts: int = 32,
    max_iters: int = 1000,
    seed=0,
) -> LinMinResult:
    """Minimize ``<a b|G|a b>`` over product unit vectors.

    Alternating eigeniteration from ``restarts`` random starting vectors
    on B, all run in lockstep: each half step replaces one factor with the
    lowest eigenvector of ``G`` conditioned on the other factor.  Every
    sweep is followed by a safeguarded Newton step on the pair, which only
    speeds up the approach to the same fixed points (plain alternation
    crawls when the conditioned spectra are nearly degenerate).  The value
    never increases.  The result is a local optimum only.
    """
    dims = _coerce_dims(dims)
    da, db = dims
    g = linalg.hermitize(np.asarray(g, dtype=complex))
    # the identity part is constant on unit product vectors; strip it and
    # normalize so tolerances act on the shape of the landscape
    offset = np.trace(g).real / dims.N
    g0 = g - offset * np.eye(dims.N)
    scale = np.linalg.norm(g0)
    if scale == 0.0:
        atom = pure_state(np.eye(dims.N)[0], dims)
        return LinMinResult(atom, offset, restarts, "heuristic")
    g4 = (g0 / scale).reshape(da, db, da, db)
    rng = np.random.default_rng(seed)
    b = rng.standard_normal((restarts, db)) + 1j * rng.standard_normal((restarts, db))
    b /= np.linalg.norm(b, axis=1, keepdims=True)
    value = np.full(restarts, np.inf)
    settle = 1e-12
    converged = np.zeros(restarts, dtype=bool)
    for _ in range(max_iters):
        ga = np.einsum("rj,ijkl,rl->rik", b.conj(), g4, b)
        _, va = np.linalg.eigh(ga)
        a = va[:, :, 0]
        gb = np.einsum("ri,ijkl,rk->rjl", a.conj(), g4, a)
        wb, vb = np.linalg.eigh(gb)
        b = vb[:, :, 0]
        new = wb[:, 0]
        live = ~converged
        if live.any():
            a[live], b[live], new[live] = _newton_step(g4, a[live], b[live], new[live])
        converged = np.abs(value - new) <= settle
        value = new
        if converged.all():
            break
        # slow restarts crawl along nearly flat valleys; once most restarts
        # have settled and none of the crawlers is ahead, stop
        if 2 * converged.sum() >= restarts and value[~converged].min() >= value[converged].min() - settle:
            break
    if not converged.any():
        raise ConvergenceFailure(f"no restart reached a fixed point in {max_iters} iterations")
    cand = np.where(converged, value, np.inf)
    best = int(np.argmin(cand))
    atom = pure_state(np.kron(a[best], b[best]), dims)
    return LinMinResult(atom, float(np.real(np.vdot(g, atom.matrix))), restarts, "heuristic")


# --- PPT oracle ----------------------------------------------------------------


def _clip_psd(m: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(m)
    return (v * np.clip(w, 0.0, None)) @ v.conj().T


def dykstra_project_ppt(
    m,
    dims,
    tol: float = PROJECTION_TOL,
    max_iters: int = MAX_ITERS,
) -> DensityMatrix:
    """Frobenius-nearest PPT state to the Hermitian matrix ``m``.

    Dykstra's algorithm over the PSD cone, the cone of matrices with PSD
    partial transpose, and the unit-trace hyperplane, cycled in that order
    with one correction term per set.  Stops when an entire cycle moves the
    iterate by at most ``tol`` in Frobenius norm.
    """
    dims = _coerce_dims(dims)
    n = dims.N
    x = linalg.hermitize(linalg.as_hermitian(m, tol=1e-9))
    eye = np.eye(n)
    p = np.zeros_like(x)
    q = np.zeros_like(x)
    r = np.zeros_like(x)
    for _ in range(max_iters):
        y = _clip_psd(x + p)
        p = x + p - y
        z = linalg.partial_transpose(_clip_psd(linalg.partial_transpose(y + q, dims)), dims)
        q = y + q - z
        t = z + r
        x_new = t - (np.trace(t).real - 1.0) / n * eye
        r = t - x_new
        change = np.linalg.norm(x_new - x)
        x = x_new
        if change <= tol:
            break
    else:
        raise ConvergenceFailure(f"Dykstra projection did not converge in {max_iters} cycles")
    return _feasible(x, dims)


def _feasible(x: np.ndarray, dims: BipartiteDims) -> DensityMatrix:
    # remove residual infeasibility left by the last trace step by mixing in a
    # sliver of I/N, which keeps the trace and lifts both spectra uniformly
    n = dims.N
    x = linalg.hermitize(x)
    low = min(np.linalg.eigvalsh(x)[0], np.linalg.eigvalsh(linalg.partial_transpose(x, dims))[0])
    if low < 0:
        d = -low * n / (1.0 - low * n)
        x = (1 - d) * x + d / n * np.eye(n)
    return _trusted(x, dims)


def _ppt_linmin_projected(g, dims, step_count, tol, start):
    n = dims.N
    scale = np.linalg.norm(g)
    w = start.matrix if start is not None else np.eye(n) / n
    if scale == 0.0:
        return _trusted(w, dims)
    gh = g / scale
    value = float(np.real(np.vdot(g, w)))
    for k in range(step_count):
        # steps stay large for a while, then shrink like 1/k
        step = 4.0 / (1.0 + k / 200.0)
        w_new = dykstra_project_ppt(w - step * gh, dims).matrix
        new = float(np.real(np.vdot(g, w_new)))
        moved = np.linalg.norm(w_new - w)
        w = w_new
        if abs(new - value) <= tol * (1.0 + abs(new)) and moved <= 1e-7:
            return _trusted(w, dims)
        value = new
    raise ConvergenceFailure(f"PPT projected gradient did not settle in {step_count} steps")


_sdp_cache = threading.local()


def _ppt_sdp(dims: BipartiteDims):
    cache = getattr(_sdp_cache, "problems", None)
    if cache is None:
        cache = _sdp_cache.problems = {}
    key = (dims.dA, dims.dB)
    if key not in cache:
        import cvxpy as cp

        # real form of the Hermitian program: W = Wr + i Wi with Wr symmetric,
        # Wi antisymmetric, and W >= 0 iff [[Wr, -Wi], [Wi, Wr]] >= 0.  Keeping
        # the objective linear in real parameters lets CVXPY cache the
        # compiled problem between calls.
        n = dims.N
        gr = cp.Parameter((n, n))
        gi = cp.Parameter((n, n))
        wr = cp.Variable((n, n), symmetric=True)
        wi = cp.Variable((n, n))
        pt = [dims.dA, dims.dB]
        tr, ti = cp.partial_transpose(wr, pt, 1), cp.partial_transpose(wi, pt, 1)
        constraints = [
            wi == -wi.T,
            cp.bmat([[wr, -wi], [wi, wr]]) >> 0,
            cp.bmat([[tr, -ti], [ti, tr]]) >> 0,
            cp.trace(wr) == 1,
        ]
        objective = cp.Minimize(cp.sum(cp.multiply(gr, wr)) + cp.sum(cp.multiply(gi, wi)))
        cache[key] = (cp.Problem(objective, constraints), gr, gi, wr, wi)
    return cache[key]


def _ppt_linmin_sdp(g, dims):
    problem, gr, gi, wr, wi = _ppt_sdp(dims)
    gh = linalg.hermitize(g / max(np.linalg.norm(g), 1e-300))
    gr.value, gi.value = gh.real, gh.imag
    with warnings.catch_warnings():
        # an "inaccurate" solution is still checked and repaired below
        warnings.simplefilter("ignore", UserWarning)
        problem.solve(solver="CLARABEL", tol_gap_abs=1e-8, tol_gap_rel=1e-8, tol_feas=1e-8)
    if wr.value is None or problem.status not in ("optimal", "optimal_inaccurate"):
        raise ConvergenceFailure(f"PPT semidefinite program ended with status {problem.status!r}")
    return _feasible(np.asarray(wr.value) + 1j * np.asarray(wi.value), dims)


def ppt_linmin(
    g: np.ndarray,
    dims,
    step_count: int = 5000,
    tol: float = 1e-10,
    start: DensityMatrix | None = None,
    method: str = "sdp",
) -> LinMinResult:
    """Minimize ``tr(G w)`` over PPT states.

    The problem is a small semidefinite program.  ``method="sdp"`` hands it
    to an interior-point solver (Clarabel through CVXPY).
    ``method="projected"`` runs projected gradient descent
    ``w <- P(w - s_k G/|G|)`` with ``P`` the Dykstra projection and shrinking
    steps ``s_k``, stopping once the objective and the iterate settle.  The
    returned atom is always exactly feasible.
    """
    dims = _coerce_dims(dims)
    g = linalg.hermitize(np.asarray(g, dtype=complex))
    if method == "sdp":
        atom = _ppt_linmin_sdp(g, dims)
    elif method == "projected":
        atom = _ppt_linmin_projected(g, dims, step_count, tol, start)
    else:
        raise ValueError(f"unknown method {method!r}")
    return LinMinResult(atom, float(np.real(np.vdot(g, atom.matrix))), 1, "certified")


@dataclass(frozen=True)
class SetOracle:
    member: Callable[..., bool]
    linmin: Callable[..., LinMinResult]
    exact_oracle: bool = False
    # how the solver may refine an iterate locally: "product" atoms or "projection"
    refine: str | None = None
    project: Callable[..., DensityMatrix] | None = None


def _sep_linmin_kw(g, dims, seed=0, restarts=32, max_iters=1000, **_):
    return sep_linmin(g, dims, restarts=restarts, max_iters=max_iters, seed=seed)


def _ppt_linmin_kw(g, dims, start=None, method="sdp", **_):
    return ppt_linmin(g, dims, start=start, method=method)


ORACLES: dict[str, SetOracle] = {
    "SEP": SetOracle(sep_member, _sep_linmin_kw, exact_oracle=False, refine="product"),
    "PPT": SetOracle(ppt_member, _ppt_linmin_kw, exact_oracle=True, refine="projection", project=dykstra_project_ppt),
}
