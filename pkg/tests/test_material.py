import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from hdgtransfer.errors import InvalidParameterError
from hdgtransfer.material import apply_A, apply_Ainv, lame_from_E_nu

J = np.array([[0.0, 1.0], [-1.0, 0.0]])
tensors = arrays(np.float64, (2, 2), elements=st.floats(-1e3, 1e3, allow_nan=False))
poisson = st.floats(0.01, 0.4999)


class TestLame:
    @pytest.mark.parametrize("E,nu,mu,lam", [
        (1.0, 0.3, 0.38461538461538464, 0.5769230769230769),
        (2.0, 0.25, 0.8, 0.8),
    ])
    def test_hand_values(self, E, nu, mu, lam):
        m = lame_from_E_nu(E, nu)
        assert m.mu == pytest.approx(mu, rel=1e-14)
        assert m.lam == pytest.approx(lam, rel=1e-14)

    def test_nearly_incompressible(self):
        m = lame_from_E_nu(1.0, 0.4999)
        # exact rationals: mu = 1/2.9998, lam = 0.4999/(1.4999 * 0.0002)
        assert m.mu == pytest.approx(1 / 2.9998, rel=1e-14)
        assert m.lam == pytest.approx(0.4999 / (1.4999 * 0.0002), rel=1e-12)
        assert m.lam == pytest.approx(1666.4, rel=1e-4)

    @pytest.mark.parametrize("E,nu", [(0.0, 0.3), (-1.0, 0.3), (1.0, 0.5), (1.0, 0.0), (1.0, -0.1), (np.nan, 0.3)])
    def test_rejects_out_of_range(self, E, nu):
        with pytest.raises(InvalidParameterError):
            lame_from_E_nu(E, nu)

    @given(E=st.floats(1e-3, 1e3), nu=poisson)
    def test_invariants(self, E, nu):
        m = lame_from_E_nu(E, nu)
        assert m.mu > 0 and m.lam > 0
        assert m.mu == pytest.approx(E / (2 * (1 + nu)), rel=1e-14)
        assert m.lam == pytest.approx(E * nu / ((1 + nu) * (1 - 2 * nu)), rel=1e-14)


class TestHooke:
    def test_identity(self, material):
        m = material
        np.testing.assert_allclose(apply_A(np.eye(2), m), np.eye(2) / (2 * m.lam + 2 * m.mu), rtol=1e-15)
        np.testing.assert_allclose(apply_Ainv(np.eye(2), m), (2 * m.mu + 2 * m.lam) * np.eye(2), rtol=1e-15)

    def test_rotation(self, material):
        np.testing.assert_allclose(apply_A(J, material), J / (2 * material.mu), rtol=1e-15)
        np.testing.assert_allclose(apply_Ainv(J, material), 2 * material.mu * J, rtol=1e-15)

    def test_diagonal(self, material):
        m, a, b = material, 0.7, -1.3
        expected = np.diag([2 * m.mu * a + m.lam * (a + b), 2 * m.mu * b + m.lam * (a + b)])
        np.testing.assert_allclose(apply_Ainv(np.diag([a, b]), m), expected, rtol=1e-15)

    def test_batched(self, material, rng):
        xi = rng.normal(size=(5, 7, 2, 2))
        out = apply_A(xi, material)
        assert out.shape == xi.shape
        np.testing.assert_allclose(out[3, 2], apply_A(xi[3, 2], material))

    @settings(max_examples=200)
    @given(xi=tensors, nu=poisson)
    def test_inverse_pair(self, xi, nu):
        m = lame_from_E_nu(1.0, nu)
        scale = max(np.abs(xi).max(), 1e-300)
        np.testing.assert_allclose(apply_A(apply_Ainv(xi, m), m), xi, atol=1e-13 * scale * (1 + m.lam))
        np.testing.assert_allclose(apply_Ainv(apply_A(xi, m), m), xi, atol=1e-13 * scale * (1 + m.lam))

    @given(xi=tensors, nu=poisson)
    def test_trace_and_symmetry(self, xi, nu):
        m = lame_from_E_nu(1.0, nu)
        out = apply_A(xi, m)
        scale = np.abs(xi).max() + 1.0
        assert np.trace(out) == pytest.approx(np.trace(xi) / (2 * m.lam + 2 * m.mu), abs=1e-12 * scale)
        sym, skew = xi + xi.T, xi - xi.T
        a_sym, a_skew = apply_A(sym, m), apply_A(skew, m)
        np.testing.assert_allclose(a_sym, a_sym.T, atol=1e-12 * scale)
        np.testing.assert_allclose(a_skew, -a_skew.T, atol=1e-12 * scale)
