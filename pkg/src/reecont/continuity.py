"""Numerical checks of the continuity bound for the entanglement measure.

``theorem_check`` compares ``|E(s1) - E(s2)|`` (from certified intervals)
with ``2 (T ln N + eta(T)) + 4 T`` where ``T = tr|s1 - s2| <= 1/3``.
``proof_chain_check`` tests the intermediate inequalities the bound is
assembled from, ``corollary_trace`` follows closest states along a sequence
converging into the set, and ``density_check`` evaluates the measure per
copy on small tensor powers.
"""

from __future__ import annotations

import csv
import io
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import linalg
from .entropy import FANNES_MAX_T, fannes_bound, theorem_bound, von_neumann_entropy
from .errors import ConvergenceFailure, DimensionMismatch, NotInSet, OutOfDomain, SamplingExhausted
from .sets import ConvexSetSpec, shift
from .solver import CertifiedValue, SolverOptions, ree, ree_shifted
from .states import (
    DensityMatrix,
    _coerce_dims,
    maximally_mixed,
    mix,
    random_mixed,
    random_product_pure,
    tensor_power,
    trace_distance,
)

SLACK_TOL = 1e-9
# rounding allowance when gating T <= 1/3 (the boundary pair is built to sit on it)
T_GATE = FANNES_MAX_T + 1e-12
MAX_TENSOR_DIM = 64


@dataclass
class InequalityResult:
    name: str
    lhs: float
    rhs: float
    slack: float
    holds: bool

    @classmethod
    def of(cls, name: str, lhs: float, rhs: float, tol: float = SLACK_TOL) -> "InequalityResult":
        slack = rhs - lhs
        return cls(name, float(lhs), float(rhs), float(slack), bool(slack >= -tol))


@dataclass
class ContinuityReport:
    seed: int | None
    dims: tuple[int, int]
    T: float
    bound: float | None
    E1: CertifiedValue | None
    E2: CertifiedValue | None
    delta_upper: float | None
    holds: bool | None
    margin: float | None
    proof_chain: list[InequalityResult] = field(default_factory=list)
    confidence: str | None = None
    skipped: bool = False

    @property
    def ratio(self) -> float | None:
        if self.skipped or not self.bound:
            return None
        return self.delta_upper / self.bound

    def to_dict(self, units: float = 1.0) -> dict:
        return {
            "seed": self.seed,
            "dims": list(self.dims),
            "T": self.T,
            "bound": None if self.bound is None else self.bound / units,
            "E1": None if self.E1 is None else self.E1.to_dict(units),
            "E2": None if self.E2 is None else self.E2.to_dict(units),
            "deltaUpper": None if self.delta_upper is None else self.delta_upper / units,
            "holds": self.holds,
            "margin": None if self.margin is None else self.margin / units,
            "proofChain": [asdict(c) for c in self.proof_chain],
            "confidence": self.confidence,
            "skipped": self.skipped,
        }


def _confidence(*values: CertifiedValue) -> str:
    return "certified" if all(v.confidence == "certified" for v in values) else "heuristicLower"


def _solve(fn, sigma, spec, opts):
    # intervals stay valid when the gap target is missed; keep them and let
    # the converged flag tell the story
    try:
        return fn(sigma, spec, opts.replace(strict=False))
    except ConvergenceFailure as exc:  # pragma: no cover - strict is off
        return exc.partial


def interval_distance(a: CertifiedValue, b: CertifiedValue) -> float:
    """Largest ``|p - q|`` with ``p`` in ``a`` and ``q`` in ``b``."""
    return max(abs(a.upper - b.lower), abs(b.upper - a.lower))


def theorem_check(
    s1: DensityMatrix,
    s2: DensityMatrix,
    spec: ConvexSetSpec,
    opts: SolverOptions | None = None,
    seed: int | None = None,
) -> ContinuityReport:
    """Check the continuity bound on one pair of states.

    Pairs farther apart than 1/3 in trace norm are returned with
    ``skipped=True``.  Identical inputs give a zero difference without
    solving twice.
    """
    opts = opts or SolverOptions()
    if s1.dims != s2.dims:
        raise DimensionMismatch(f"dims differ: {tuple(s1.dims)} vs {tuple(s2.dims)}")
    dims = tuple(s1.dims)
    t = trace_distance(s1, s2)
    if t > T_GATE:
        return ContinuityReport(seed, dims, t, None, None, None, None, None, None, skipped=True)
    t = min(t, FANNES_MAX_T)
    n = s1.dims.N
    bound = theorem_bound(t, n)
    e1 = _solve(ree, s1, spec, opts)
    if np.array_equal(s1.matrix, s2.matrix):
        e2, delta = e1, 0.0
    else:
        e2 = _solve(ree, s2, spec, opts)
        delta = interval_distance(e1, e2)
    return ContinuityReport(
        seed=seed,
        dims=dims,
        T=t,
        bound=bound,
        E1=e1,
        E2=e2,
        delta_upper=delta,
        holds=bool(delta <= bound + SLACK_TOL),
        margin=bound - delta,
        confidence=_confidence(e1, e2),
    )


def sample_set_members(spec: ConvexSetSpec, count: int, seed) -> list[DensityMatrix]:
    """The maximally mixed state followed by random pure product states."""
    rng = np.random.default_rng(seed)
    out = [maximally_mixed(spec.dims)]
    out += [random_product_pure(spec.dims, rng) for _ in range(count - 1)]
    return out


def proof_chain_check(
    s1: DensityMatrix,
    s2: DensityMatrix,
    spec: ConvexSetSpec,
    opts: SolverOptions | None = None,
    seed=0,
    e1: CertifiedValue | None = None,
    e2: CertifiedValue | None = None,
    samples: int = 8,
) -> list[InequalityResult]:
    """Evaluate the five intermediate inequalities at ``x = 1 - T``.

    (a) ``E <= E_x <= E - ln x`` for both states, using interval ends so
        a failure means the intervals cannot be reconciled;
    (b) ``|ln x| <= 2 (1 - x)``;
    (c) the entropy continuity bound ``|S(s1) - S(s2)| <= T ln N + eta(T)``;
    (d) ``|tr(s1 L) - tr(s2 L)| <= T (ln N - ln(1 - x))`` with
        ``L = ln(x rho + (1 - x) I/N)`` for ``samples`` states ``rho`` in the
        set (the maximally mixed one plus random product states);
    (e) ``|E_x(s1) - E_x(s2)| <= 2 (T ln N + eta(T))``.
    """
    opts = opts or SolverOptions()
    if s1.dims != s2.dims:
        raise DimensionMismatch(f"dims differ: {tuple(s1.dims)} vs {tuple(s2.dims)}")
    t = trace_distance(s1, s2)
    if not 0.0 < t <= T_GATE:
        raise OutOfDomain(f"proof chain needs 0 < T <= 1/3, got {t!r}")
    t = min(t, FANNES_MAX_T)
    n = s1.dims.N
    x = 1.0 - t
    e1 = e1 or _solve(ree, s1, spec, opts)
    e2 = e2 or _solve(ree, s2, spec, opts)
    spec_x = spec.with_x(x)
    ex1 = _solve(ree_shifted, s1, spec_x, opts)
    ex2 = _solve(ree_shifted, s2, spec_x, opts)

    sandwich = []
    for e, ex in ((e1, ex1), (e2, ex2)):
        sandwich.append(InequalityResult.of("E <= E_x", e.lower, ex.upper))
        sandwich.append(InequalityResult.of("E_x <= E - ln x", ex.lower, e.upper - math.log(x)))
    worst = min(sandwich, key=lambda c: c.slack)
    checks = [InequalityResult.of("(a) sandwich", worst.lhs, worst.rhs)]

    checks.append(InequalityResult.of("(b) |ln x| <= 2(1-x)", abs(math.log(x)), 2.0 * (1.0 - x)))

    ds = abs(von_neumann_entropy(s1) - von_neumann_entropy(s2))
    checks.append(InequalityResult.of("(c) entropy continuity", ds, fannes_bound(t, n)))

    rhs_d = t * (math.log(n) - math.log(1.0 - x))
    trace_checks = []
    for rho in sample_set_members(spec, samples, seed):
        log_shift = linalg.matrix_log(shift(rho, x).matrix)
        lhs = abs(np.real(np.vdot(s1.matrix, log_shift) - np.vdot(s2.matrix, log_shift)))
        trace_checks.append(InequalityResult.of("trace", lhs, rhs_d))
    worst = min(trace_checks, key=lambda c: c.slack)
    checks.append(InequalityResult.of("(d) trace bound on log of mixed state", worst.lhs, worst.rhs))

    checks.append(InequalityResult.of("(e) E_x continuity", interval_distance(ex1, ex2), 2.0 * fannes_bound(t, n)))
    return checks


def trace_functional_check(s1, s2, a) -> InequalityResult:
    """``|tr(s1 A) - tr(s2 A)| <= tr|s1 - s2| * |A|_op``."""
    m1 = s1.matrix if isinstance(s1, DensityMatrix) else np.asarray(s1)
    m2 = s2.matrix if isinstance(s2, DensityMatrix) else np.asarray(s2)
    lhs = abs(np.real(np.vdot(m1, a) - np.vdot(m2, a)))
    return InequalityResult.of("trace functional", lhs, linalg.trace_norm(m1 - m2) * linalg.operator_norm(a), tol=1e-12)


# --- corollary -----------------------------------------------------------------------


@dataclass
class CorollaryEntry:
    n: int
    state_distance: float
    closest_distance: float
    e_upper: float


@dataclass
class CorollaryTrace:
    family: str
    entries: list[CorollaryEntry]
    threshold: float
    criterion_met: bool

    def to_dict(self, units: float = 1.0) -> dict:
        return {
            "family": self.family,
            "threshold": self.threshold,
            "criterionMet": self.criterion_met,
            "entries": [
                {
                    "n": e.n,
                    "stateDistance": e.state_distance,
                    "closestDistance": e.closest_distance,
                    "eUpper": e.e_upper / units,
                }
                for e in self.entries
            ],
        }


DEFAULT_SCHEDULE = (4, 16, 64, 256, 1024)


def corollary_trace(
    sigma: DensityMatrix,
    direction: DensityMatrix,
    schedule=DEFAULT_SCHEDULE,
    spec: ConvexSetSpec | None = None,
    opts: SolverOptions | None = None,
    dist_tol: float = 0.05,
    family: str | None = None,
) -> CorollaryTrace:
    """Closest states along ``s_n = (1 - 1/n) sigma + (1/n) direction``.

    ``sigma`` must belong to the set.  The trace passes when the last entry
    has ``|closest(s_n) - sigma| <= max(5 |s_n - sigma|, dist_tol)``; the
    convergence statement is about a limit, and this finite-``n`` test is
    its stand-in.
    """
    opts = opts or SolverOptions()
    spec = spec or ConvexSetSpec("SEP", sigma.dims)
    if not spec.contains(sigma):
        raise NotInSet(f"base state is not in the {spec.kind} set")
    entries = []
    for n in sorted(schedule):
        if n < 1:
            raise OutOfDomain(f"schedule entries must be >= 1, got {n}")
        s_n = mix(sigma, direction, 1.0 / n)
        cv = _solve(ree, s_n, spec, opts)
        entries.append(
            CorollaryEntry(
                n=int(n),
                state_distance=trace_distance(s_n, sigma),
                closest_distance=trace_distance(cv.minimizer, sigma),
                e_upper=cv.upper,
            )
        )
    last = entries[-1]
    ok = last.closest_distance <= max(5.0 * last.state_distance, dist_tol)
    return CorollaryTrace(family or "(1-1/n) sigma + (1/n) direction", entries, dist_tol, bool(ok))


# --- tensor powers -------------------------------------------------------------------


@dataclass
class DensityRecord:
    n: int
    per_pair: CertifiedValue
    reference: float

    def to_dict(self, units: float = 1.0) -> dict:
        return {"n": self.n, "perPair": self.per_pair.to_dict(units), "reference": self.reference / units}


def density_check(
    sigma: DensityMatrix,
    n_max: int = 3,
    spec: ConvexSetSpec | None = None,
    opts: SolverOptions | None = None,
    reference: float | None = None,
) -> list[DensityRecord]:
    """Per-copy entanglement ``E(sigma^n) / n`` for ``n = 1..n_max``.

    The cut separates the ``n`` A factors from the ``n`` B factors.  When
    no ``reference`` is given, the single-copy upper bound is used.
    """
    opts = opts or SolverOptions()
    kind = spec.kind if spec is not None else "SEP"
    if sigma.dims.N**n_max > MAX_TENSOR_DIM:
        raise DimensionMismatch(f"{n_max} copies of a {sigma.dims.N}-dimensional state exceed {MAX_TENSOR_DIM}")
    records = []
    for n in range(1, n_max + 1):
        power = tensor_power(sigma, n)
        cv = _solve(ree, power, ConvexSetSpec(kind, power.dims), opts)
        per = CertifiedValue(
            lower=cv.lower / n,
            upper=cv.upper / n,
            minimizer=cv.minimizer,
            fw_gap=cv.fw_gap / n,
            iterations=cv.iterations,
            x=cv.x,
            confidence=cv.confidence,
            converged=cv.converged,
        )
        if reference is None:
            reference = per.upper
        records.append(DensityRecord(n, per, reference))
    return records


# --- batches -------------------------------------------------------------------------


@dataclass(frozen=True)
class SamplerConfig:
    """Pair sampler: ``s2 = (1 - t) s1 + t z`` with ``t`` log-uniform on
    ``[t_min, min(1, (1/3) / |s1 - z|)]`` so ``T = t |s1 - z| <= 1/3``."""

    ranks: tuple[int, ...] | None = None
    t_min: float = 1e-3
    max_rejections: int = 10_000


def item_seed(batch_seed: int, index: int) -> int:
    return int(np.random.SeedSequence([batch_seed, index]).generate_state(1)[0])


def sample_pair(dims, seed, config: SamplerConfig | None = None) -> tuple[DensityMatrix, DensityMatrix]:
    config = config or SamplerConfig()
    dims = _coerce_dims(dims)
    rng = np.random.default_rng(seed)
    ranks = config.ranks or tuple(range(1, dims.N + 1))
    for _ in range(config.max_rejections):
        s1 = random_mixed(dims, int(rng.choice(ranks)), rng)
        z = random_mixed(dims, int(rng.choice(ranks)), rng)
        dist = trace_distance(s1, z)
        t_max = min(1.0, FANNES_MAX_T / dist) if dist > 0 else 1.0
        if t_max <= config.t_min:
            continue
        t = math.exp(rng.uniform(math.log(config.t_min), math.log(t_max)))
        s2 = mix(s1, z, t)
        if 0.0 < trace_distance(s1, s2) <= T_GATE:
            return s1, s2
    raise SamplingExhausted(f"no admissible pair after {config.max_rejections} draws")


def boundary_pair(dims, seed) -> tuple[DensityMatrix, DensityMatrix]:
    """A pair at trace distance 1/3 up to rounding."""
    dims = _coerce_dims(dims)
    rng = np.random.default_rng(seed)
    while True:
        s1 = random_mixed(dims, dims.N, rng)
        z = random_mixed(dims, 1, rng)
        dist = trace_distance(s1, z)
        if dist > FANNES_MAX_T:
            return s1, mix(s1, z, FANNES_MAX_T / dist)


@dataclass
class BatchReport:
    pairs: int
    failures: list[int]
    max_ratio: float
    reports: list[ContinuityReport]
    seconds: float
    seed: int

    @property
    def ok(self) -> bool:
        return not self.failures

    def summary(self) -> str:
        return f"pairs={self.pairs} failures={len(self.failures)} maxRatio={self.max_ratio:.6g}"

    def to_dict(self, units: float = 1.0, deterministic: bool = False) -> dict:
        out = {
            "pairs": self.pairs,
            "seed": self.seed,
            "failures": self.failures,
            "maxRatio": self.max_ratio,
            "reports": [r.to_dict(units) for r in self.reports],
        }
        if not deterministic:
            out["seconds"] = self.seconds
        return out


def _batch_item(args):
    index, batch_seed, dims, config, spec, opts, with_chain = args
    seed = item_seed(batch_seed, index)
    s1, s2 = sample_pair(dims, seed, config)
    report = theorem_check(s1, s2, spec, opts.replace(seed=seed), seed=seed)
    if with_chain and not report.skipped:
        report.proof_chain = proof_chain_check(
            s1, s2, spec, opts.replace(seed=seed), seed=seed, e1=report.E1, e2=report.E2
        )
    return report


def batch_report(
    count: int,
    dims,
    config: SamplerConfig | None = None,
    spec: ConvexSetSpec | None = None,
    opts: SolverOptions | None = None,
    seed: int = 0,
    proof_chain: bool = True,
    workers: int | None = None,
) -> BatchReport:
    """Sample ``count`` pairs with ``T <= 1/3`` and check each one.

    A pair fails when the continuity bound or any proof-chain inequality
    fails.  Item ``i`` uses a seed derived from ``(seed, i)``, so results do
    not depend on ``workers`` (``REE_THREADS`` when unset; 0 runs serially).
    """
    if count < 1:
        raise OutOfDomain("count must be at least 1")
    dims = _coerce_dims(dims)
    config = config or SamplerConfig()
    spec = spec or ConvexSetSpec("SEP", dims)
    opts = opts or SolverOptions()
    if workers is None:
        workers = int(os.environ.get("REE_THREADS", "0") or 0)
    jobs = [(i, seed, dims, config, spec, opts, proof_chain) for i in range(count)]
    start = time.perf_counter()
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(_batch_item, jobs))
    else:
        reports = [_batch_item(job) for job in jobs]
    elapsed = time.perf_counter() - start
    failures = [
        i
        for i, r in enumerate(reports)
        if not r.skipped and (not r.holds or not all(c.holds for c in r.proof_chain))
    ]
    ratios = [r.ratio for r in reports if r.ratio is not None]
    return BatchReport(count, failures, max(ratios, default=0.0), reports, elapsed, seed)


def reports_csv(reports: list[ContinuityReport], units: float = 1.0) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["seed", "T", "bound", "deltaUpper", "margin", "holds", "confidence"])
    for r in reports:
        writer.writerow(
            [
                r.seed,
                repr(r.T),
                "" if r.bound is None else repr(r.bound / units),
                "" if r.delta_upper is None else repr(r.delta_upper / units),
                "" if r.margin is None else repr(r.margin / units),
                "skipped" if r.skipped else str(r.holds).lower(),
                r.confidence or "",
            ]
        )
    return buf.getvalue()


# --- entropy continuity suite ----------------------------------------------------------


@dataclass
class FannesCase:
    T: float
    lhs: float | None
    rhs: float | None
    holds: bool | None
    skipped: bool
    label: str = "sampled"


def fannes_case(s1: DensityMatrix, s2: DensityMatrix, label: str = "sampled") -> FannesCase:
    t = trace_distance(s1, s2)
    if t > T_GATE:
        return FannesCase(t, None, None, None, True, label)
    t = min(t, FANNES_MAX_T)
    lhs = abs(von_neumann_entropy(s1) - von_neumann_entropy(s2))
    rhs = fannes_bound(t, s1.dims.N)
    return FannesCase(t, lhs, rhs, bool(lhs <= rhs + SLACK_TOL), False, label)


def fannes_suite(count: int, dims, seed: int = 0, independent: int = 0, boundary: bool = True) -> list[FannesCase]:
    """Entropy continuity on ``count`` sampled pairs with ``T <= 1/3``, the
    engineered pair at ``T = 1/3``, and ``independent`` unconditioned pairs
    (which are skipped whenever ``T > 1/3``)."""
    dims = _coerce_dims(dims)
    cases = [fannes_case(*sample_pair(dims, item_seed(seed, i))) for i in range(count)]
    if boundary:
        cases.append(fannes_case(*boundary_pair(dims, seed), label="boundary"))
    rng = np.random.default_rng([seed, 1 << 20])
    for _ in range(independent):
        cases.append(
            fannes_case(random_mixed(dims, dims.N, rng), random_mixed(dims, dims.N, rng), label="independent")
        )
    return cases


def eta_grid_check(points: int = 10_001) -> float:
    """Smallest slack of ``|ln x| <= 2 (1 - x)`` on a uniform grid of [1/2, 1]."""
    xs = np.linspace(0.5, 1.0, points)
    return float(np.min(2.0 * (1.0 - xs) - np.abs(np.log(xs))))


__all__ = [
    "ContinuityReport",
    "CorollaryTrace",
    "DensityRecord",
    "InequalityResult",
    "SamplerConfig",
    "BatchReport",
    "theorem_check",
    "proof_chain_check",
    "corollary_trace",
    "density_check",
    "batch_report",
    "fannes_suite",
]
