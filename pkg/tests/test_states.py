import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from reecont import linalg
from reecont.errors import DimensionMismatch, NotDensityMatrix, NotProbabilityVector
from reecont.states import (
    BipartiteDims,
    bell_diagonal,
    bell_vectors,
    dumps_state,
    load_state,
    loads_state,
    maximally_mixed,
    mix,
    pure_state,
    random_mixed,
    random_product_pure,
    save_state,
    spectrum_csv,
    tensor_power,
    trace_distance,
    validate_density,
)


class TestDims:
    def test_parse(self):
        assert BipartiteDims.parse("2x3") == BipartiteDims(2, 3)
        assert BipartiteDims.parse("2X3").N == 6

    @pytest.mark.parametrize("text", ["0x2", "2x", "axb", "2x2x2", "-1x2"])
    def test_parse_rejects(self, text):
        with pytest.raises(DimensionMismatch):
            BipartiteDims.parse(text)

    def test_power(self):
        assert BipartiteDims(2, 3).power(2) == BipartiteDims(4, 9)


class TestValidation:
    def test_accepts_state(self, bell):
        s = validate_density(bell.matrix, (2, 2))
        assert_allclose(s.matrix, bell.matrix)

    def test_trace(self):
        with pytest.raises(NotDensityMatrix) as exc:
            validate_density(np.eye(4) / 2, (2, 2))
        assert exc.value.reason == "trace"

    def test_positivity(self):
        with pytest.raises(NotDensityMatrix) as exc:
            validate_density(np.diag([1.2, -0.2, 0, 0]), (2, 2))
        assert exc.value.reason == "positivity"

    def test_hermiticity(self):
        m = np.eye(4) / 4
        m[0, 1] = 0.1
        with pytest.raises(NotDensityMatrix) as exc:
            validate_density(m, (2, 2))
        assert exc.value.reason == "hermiticity"

    def test_small_negative_eigenvalue_clipped(self):
        s = validate_density(np.diag([0.5 + 5e-11, 0.5, -5e-11, 0.0]), (2, 2))
        assert s.spectrum()[0] >= 0.0
        assert np.trace(s.matrix).real == pytest.approx(1.0, abs=1e-14)

    def test_shape_mismatch(self):
        with pytest.raises(DimensionMismatch):
            validate_density(np.eye(4) / 4, (2, 3))

    def test_read_only(self, bell):
        with pytest.raises(ValueError):
            bell.matrix[0, 0] = 1.0


class TestCanonicalStates:
    def test_bell_vectors_orthonormal(self):
        b = bell_vectors()
        assert_allclose(b @ b.conj().T, np.eye(4), atol=1e-15)

    def test_bell_is_pure_and_maximally_entangled(self, bell):
        assert bell.purity() == pytest.approx(1.0)
        reduced = linalg.partial_trace(bell.matrix, (2, 2))
        assert_allclose(reduced, np.eye(2) / 2, atol=1e-15)

    def test_bell_diagonal(self):
        s = bell_diagonal([0.75, 0.25, 0, 0])
        assert_allclose(sorted(s.spectrum()), [0, 0, 0.25, 0.75], atol=1e-15)

    @pytest.mark.parametrize("p", [[0.5, 0.5, 0.1, 0], [1, 0, 0], [1.5, -0.5, 0, 0]])
    def test_bell_diagonal_rejects(self, p):
        with pytest.raises(NotProbabilityVector):
            bell_diagonal(p)

    def test_trace_distance_bell_tau(self, bell, tau):
        # eigenvalues of Bell - tau are 3/4, -1/4, -1/4, -1/4
        assert trace_distance(bell, tau) == pytest.approx(1.5)

    def test_trace_distance_orthogonal(self):
        a = pure_state([1, 0, 0, 0], (2, 2))
        b = pure_state([0, 1, 0, 0], (2, 2))
        assert trace_distance(a, b) == pytest.approx(2.0)

    def test_trace_distance_dims_mismatch(self):
        with pytest.raises(DimensionMismatch):
            trace_distance(maximally_mixed((2, 2)), maximally_mixed((1, 4)))

    def test_mix_distance_scales(self, bell, tau):
        assert trace_distance(mix(bell, tau, 0.2), bell) == pytest.approx(0.2 * 1.5)


class TestSampling:
    @pytest.mark.parametrize("rank", [1, 2, 4, 6])
    def test_random_mixed_is_state(self, rank):
        s = random_mixed((2, 3), rank, seed=rank)
        assert np.trace(s.matrix).real == pytest.approx(1.0)
        w = s.spectrum()
        assert w[0] >= -1e-14
        assert np.sum(w > 1e-12) == min(rank, 6)

    def test_seed_reproducible(self):
        assert_allclose(random_mixed((2, 2), 2, 5).matrix, random_mixed((2, 2), 2, 5).matrix)

    def test_product_pure_has_ppt(self):
        s = random_product_pure((2, 3), 1)
        assert s.purity() == pytest.approx(1.0)
        assert np.linalg.eigvalsh(linalg.partial_transpose(s.matrix, (2, 3)))[0] >= -1e-14

    def test_haar_mean_purity(self):
        # E[tr rho^2] = 2/(d+1) for Haar-random pure states reduced to d x d of a d^2 system
        vals = [random_mixed((2, 2), 4, s).purity() for s in range(2000)]
        assert np.mean(vals) == pytest.approx((4 + 4) / (4 * 4 + 1), rel=0.02)


class TestTensorPower:
    def test_dims_and_trace(self, bell):
        p = tensor_power(bell, 3)
        assert tuple(p.dims) == (8, 8)
        assert np.trace(p.matrix).real == pytest.approx(1.0)

    def test_cut_is_a_versus_b(self, bell):
        # two Bell pairs across the A^2 : B^2 cut leave A^2 maximally mixed
        p = tensor_power(bell, 2)
        assert_allclose(linalg.partial_trace(p.matrix, p.dims), np.eye(4) / 4, atol=1e-15)

    def test_product_stays_product(self):
        a, b = np.diag([0.7, 0.3]), np.diag([0.1, 0.9])
        s = validate_density(np.kron(a, b), (2, 2))
        p = tensor_power(s, 2)
        assert_allclose(p.matrix, np.kron(np.kron(a, a), np.kron(b, b)), atol=1e-15)


class TestSerialization:
    def test_round_trip_bit_exact(self):
        s = random_mixed((2, 3), 3, 11)
        back = loads_state(dumps_state(s))
        assert np.array_equal(back.matrix, s.matrix)
        assert back.dims == s.dims

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(1, 4))
    def test_round_trip_property(self, seed, rank):
        s = random_mixed((2, 2), rank, seed)
        assert np.array_equal(loads_state(dumps_state(s)).matrix, s.matrix)

    def test_file_round_trip(self, tmp_path, bell):
        path = tmp_path / "bell.json"
        save_state(bell, path)
        assert np.array_equal(load_state(path).matrix, bell.matrix)

    def test_format(self, tau):
        data = json.loads(dumps_state(tau))
        assert data["dims"] == [2, 2]
        assert data["matrix"][0][0] == [0.25, 0.0]

    def test_truncated_decimals_survive(self, bell):
        data = json.loads(dumps_state(bell))
        data["matrix"] = [[[round(v, 9) for v in z] for z in row] for row in data["matrix"]]
        s = loads_state(json.dumps(data))
        assert trace_distance(s, bell) < 1e-8

    @pytest.mark.parametrize("text", ['{"dims": [2, 2]}', '{"matrix": [], "dims": "x"}'])
    def test_malformed(self, text):
        with pytest.raises((NotDensityMatrix, DimensionMismatch)):
            loads_state(text)

    def test_wrong_entry_shape(self):
        with pytest.raises(DimensionMismatch):
            loads_state(json.dumps({"dims": [1, 1], "matrix": [[1.0]]}))

    def test_spectrum_csv(self):
        s = bell_diagonal([0.75, 0.25, 0, 0])
        values = [float(v) for v in spectrum_csv(s).split()]
        assert values == sorted(values)
        assert math.fsum(values) == pytest.approx(1.0)
