import csv
import io
import math

import numpy as np
import pytest

from reecont.continuity import (
    SamplerConfig,
    batch_report,
    boundary_pair,
    corollary_trace,
    density_check,
    eta_grid_check,
    fannes_suite,
    interval_distance,
    item_seed,
    proof_chain_check,
    reports_csv,
    sample_pair,
    theorem_check,
    trace_functional_check,
)
from reecont.entropy import theorem_bound
from reecont.errors import DimensionMismatch, NotInSet, OutOfDomain, SamplingExhausted
from reecont.sets import shift
from reecont.solver import CertifiedValue, SolverOptions
from reecont.states import maximally_mixed, pure_state, random_mixed, random_product_pure, trace_distance

LN2 = math.log(2)


def interval(lo, hi):
    return CertifiedValue(lo, hi, None, 0.0, 0, 0.9, "certified")


class TestIntervalDistance:
    def test_disjoint(self):
        assert interval_distance(interval(0, 1), interval(2, 3)) == 3

    def test_symmetric(self):
        a, b = interval(0.1, 0.2), interval(0.15, 0.4)
        assert interval_distance(a, b) == interval_distance(b, a) == pytest.approx(0.3)


class TestTheoremCheck:
    def test_identical_states(self, bell, sep):
        r = theorem_check(bell, bell, sep)
        assert r.T == 0.0
        assert r.bound == 0.0
        assert r.delta_upper <= 2 * SolverOptions().gap_tol
        assert r.holds

    def test_bell_vs_shifted_bell(self, bell, sep):
        r = theorem_check(bell, shift(bell, 0.95), sep)
        assert r.T == pytest.approx(0.075)
        assert r.bound == pytest.approx(theorem_bound(0.075, 4))
        assert r.holds
        assert r.margin > 0
        assert r.delta_upper == pytest.approx(max(abs(r.E1.upper - r.E2.lower), abs(r.E2.upper - r.E1.lower)))

    def test_orthogonal_pure_states_skipped(self, sep):
        a = pure_state([1, 0, 0, 0], (2, 2))
        b = pure_state([0, 0, 0, 1], (2, 2))
        r = theorem_check(a, b, sep)
        assert r.skipped
        assert r.T == pytest.approx(2.0)
        assert r.holds is None

    def test_dims_mismatch(self, sep):
        with pytest.raises(DimensionMismatch):
            theorem_check(maximally_mixed((2, 2)), maximally_mixed((1, 4)), sep)

    def test_holds_iff_within_bound(self, sep):
        s1, s2 = sample_pair((2, 2), 3)
        r = theorem_check(s1, s2, sep)
        assert r.holds == (r.delta_upper <= r.bound + 1e-9)
        assert r.confidence == "heuristicLower"

    def test_to_dict_units(self, bell, sep):
        r = theorem_check(bell, shift(bell, 0.95), sep)
        d = r.to_dict(units=LN2)
        assert d["bound"] == pytest.approx(r.bound / LN2)
        assert d["T"] == r.T


class TestProofChain:
    def test_random_pair(self, sep):
        s1, s2 = sample_pair((2, 2), 11)
        checks = proof_chain_check(s1, s2, sep)
        assert [c.name[:3] for c in checks] == ["(a)", "(b)", "(c)", "(d)", "(e)"]
        assert all(c.holds for c in checks)
        for c in checks:
            assert c.slack == pytest.approx(c.rhs - c.lhs)

    def test_requires_positive_t(self, bell, sep):
        with pytest.raises(OutOfDomain):
            proof_chain_check(bell, bell, sep)

    def test_requires_small_t(self, sep):
        a = pure_state([1, 0, 0, 0], (2, 2))
        with pytest.raises(OutOfDomain):
            proof_chain_check(a, pure_state([0, 1, 0, 0], (2, 2)), sep)

    def test_simple_inequality_at_half(self):
        assert abs(math.log(0.5)) <= 2 * (1 - 0.5)
        assert eta_grid_check() >= 0.0

    def test_maximally_mixed_gives_zero_lhs(self):
        # with rho = I/N the log is a multiple of I and the trace difference vanishes
        s1, s2 = random_mixed((2, 2), 4, 0), random_mixed((2, 2), 4, 1)
        l = -math.log(4) * np.eye(4)
        assert trace_functional_check(s1, s2, l).lhs == pytest.approx(0.0, abs=1e-15)


class TestTraceFunctional:
    @pytest.mark.parametrize("seed", range(10))
    def test_holds(self, seed, rng):
        s1, s2 = random_mixed((2, 2), 4, [seed, 0]), random_mixed((2, 2), 2, [seed, 1])
        a = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        assert trace_functional_check(s1, s2, a + a.conj().T).holds

    def test_tight_for_projector_witness(self):
        # A = P+ - P- on the spectral split of s1 - s2 attains the bound
        s1, s2 = random_mixed((2, 2), 4, 0), random_mixed((2, 2), 4, 1)
        w, v = np.linalg.eigh(s1.matrix - s2.matrix)
        a = (v * np.sign(w)) @ v.conj().T
        res = trace_functional_check(s1, s2, a)
        assert res.lhs == pytest.approx(res.rhs)


class TestSampler:
    @pytest.mark.parametrize("seed", range(20))
    def test_pairs_are_admissible(self, seed):
        s1, s2 = sample_pair((2, 2), seed)
        assert 0 < trace_distance(s1, s2) <= 1 / 3 + 1e-12

    def test_reproducible(self):
        a, b = sample_pair((2, 3), 5), sample_pair((2, 3), 5)
        assert np.array_equal(a[1].matrix, b[1].matrix)

    def test_item_seed_stable(self):
        assert item_seed(0, 3) == item_seed(0, 3)
        assert item_seed(0, 3) != item_seed(0, 4)

    def test_boundary_pair(self):
        s1, s2 = boundary_pair((2, 2), 0)
        assert trace_distance(s1, s2) == pytest.approx(1 / 3, abs=1e-14)

    def test_exhausted(self):
        with pytest.raises(SamplingExhausted):
            sample_pair((2, 2), 0, SamplerConfig(t_min=1.0, max_rejections=5))


class TestBatch:
    def test_single_pair_deterministic(self):
        a = batch_report(1, (2, 2), seed=7)
        b = batch_report(1, (2, 2), seed=7)
        assert a.to_dict(deterministic=True) == b.to_dict(deterministic=True)
        assert a.summary().startswith("pairs=1 failures=0 maxRatio=")

    def test_small_batch(self):
        batch = batch_report(4, (2, 2), seed=1)
        assert batch.ok
        assert 0 < batch.max_ratio < 1
        assert all(len(r.proof_chain) == 5 for r in batch.reports)

    def test_count_validated(self):
        with pytest.raises(OutOfDomain):
            batch_report(0, (2, 2))

    def test_csv(self):
        batch = batch_report(2, (2, 2), seed=2, proof_chain=False)
        rows = list(csv.DictReader(io.StringIO(reports_csv(batch.reports))))
        assert list(rows[0]) == ["seed", "T", "bound", "deltaUpper", "margin", "holds", "confidence"]
        assert rows[0]["holds"] == "true"
        assert float(rows[0]["T"]) <= 1 / 3


class TestFannesSuite:
    def test_all_hold(self):
        cases = fannes_suite(50, (2, 2), seed=0, independent=5)
        assert not any(c.holds is False for c in cases)
        assert any(c.label == "boundary" and not c.skipped for c in cases)

    def test_far_pairs_skipped(self):
        cases = fannes_suite(0, (2, 2), boundary=False, independent=20)
        far = [c for c in cases if c.T > 1 / 3]
        assert far and all(c.skipped and c.holds is None for c in far)


class TestCorollary:
    def test_tau_toward_bell(self, bell, tau, sep):
        tr = corollary_trace(tau, bell, [4, 16, 64], sep)
        assert [e.n for e in tr.entries] == [4, 16, 64]
        assert tr.criterion_met
        d = [e.closest_distance for e in tr.entries]
        assert all(b <= a + 1e-3 for a, b in zip(d, d[1:]))

    def test_constant_sequence(self, tau, sep):
        tr = corollary_trace(tau, tau, [4, 16], sep)
        assert all(e.closest_distance <= 1e-6 and e.e_upper <= 1e-6 for e in tr.entries)

    def test_entangled_base_rejected(self, bell, tau, sep):
        with pytest.raises(NotInSet):
            corollary_trace(bell, tau, [4], sep)

    def test_upper_within_theorem_bound(self, bell, sep):
        # E(sigma) = 0 for sigma in the set, so E(sigma_n) <= bound(|sigma_n - sigma|)
        base = random_product_pure((2, 2), 3)
        tr = corollary_trace(base, bell, [4, 16, 64], sep)
        for e in tr.entries:
            if e.state_distance <= 1 / 3:
                assert e.e_upper <= theorem_bound(e.state_distance, 4) + 2e-6

    def test_schedule_sorted(self, bell, tau, sep):
        tr = corollary_trace(tau, bell, [16, 4], sep)
        assert [e.n for e in tr.entries] == [4, 16]


class TestDensity:
    def test_maximally_mixed(self, tau):
        for rec in density_check(tau, 2):
            assert rec.per_pair.contains(0.0)
            assert rec.per_pair.upper <= 1e-9

    def test_oversize(self, tau):
        with pytest.raises(DimensionMismatch):
            density_check(maximally_mixed((2, 3)), 3)

    def test_bell_two_copies(self, bell):
        recs = density_check(bell, 2)
        assert [r.n for r in recs] == [1, 2]
        for r in recs:
            assert abs(r.per_pair.upper - LN2) <= 0.02
            assert r.per_pair.lower <= LN2 + 1e-3
        assert recs[1].per_pair.upper <= recs[0].per_pair.upper + 0.02
        assert recs[1].reference == recs[0].per_pair.upper
