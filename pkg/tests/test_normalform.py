import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, strategies as st

from sobolev_growth import normalform as nf
from sobolev_growth import resonance as res
from sobolev_growth.fourier import FourierField


def small_field(K, rng, amp=0.1, support=None):
    u = FourierField.random(K, rng, support=support or K // 4)
    return u * (amp / np.linalg.norm(u.coeffs))


def modes(K, values):
    c = np.zeros(2 * K + 1, dtype=complex)
    for k, v in values.items():
        c[k + K] = v
    return FourierField(c, K)


def gauge_pair(K, theta):
    n = 2 * K + 1
    return np.diag(np.concatenate([np.full(n, np.exp(1j * theta)), np.full(n, np.exp(-1j * theta))]))


class TestFlows:
    def test_constant_generator_matches_expm(self, rng):
        G = 0.3 * (rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6)))
        flow = nf.integrate_flow(lambda tau: G, 6)
        assert np.allclose(flow.forward, scipy.linalg.expm(G), atol=1e-11)
        assert np.allclose(flow.inverse, scipy.linalg.expm(-G), atol=1e-11)
        assert flow.identity_defect() < 1e-10

    def test_time_dependent_generator(self):
        # d/dtau Y = tau * A Y with A diagonal: Y(1) = exp(A / 2)
        A = np.diag([1.0, -0.5j, 0.25])
        flow = nf.integrate_flow(lambda tau: tau * A, 3)
        assert np.allclose(flow.forward, np.diag(np.exp(np.diag(A) / 2)), atol=1e-12)

    def test_dexp_right_against_finite_difference(self, rng):
        G = 0.4 * (rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5)))
        dG = rng.standard_normal((5, 5)) + 0j
        h = 1e-5
        fd = (scipy.linalg.expm(G + h * dG) - scipy.linalg.expm(G - h * dG)) / (2 * h) @ scipy.linalg.expm(-G)
        assert np.allclose(nf.dexp_right(G, dG), fd, atol=1e-8)

    def test_zero_field_gives_identity(self):
        u = FourierField.zeros(8)
        flow = nf.flow_outdiag(u, 0.5, 1.0)
        assert np.array_equal(flow.forward, np.eye(2 * 17))
        t = nf.flow_transport(u, 0.5)
        assert np.array_equal(t.forward, np.eye(17))

    def test_outdiag_flow_is_invertible(self, rng):
        flow = nf.flow_outdiag(small_field(16, rng), 0.5, 1.0)
        assert flow.identity_defect() < 1e-9


class TestGauge:
    @pytest.mark.parametrize("theta", [np.pi / 3, np.pi / 2])
    def test_generator_is_gauge_covariant(self, theta, rng):
        K = 12
        u = small_field(K, rng)
        G = nf.outdiag_generator(u, 0.5, 1.0)
        Gt = nf.outdiag_generator(u * np.exp(1j * theta), 0.5, 1.0)
        P = gauge_pair(K, theta)
        assert np.allclose(Gt, P @ G @ P.conj().T, atol=1e-14)

    @pytest.mark.parametrize("theta", [np.pi / 3, np.pi / 2])
    def test_flow_commutes_with_gauge(self, theta, rng):
        K = 12
        u = small_field(K, rng)
        F = nf.flow_outdiag(u, 0.5, 1.0).forward
        Ft = nf.flow_outdiag(u * np.exp(1j * theta), 0.5, 1.0).forward
        P = gauge_pair(K, theta)
        assert np.allclose(Ft, P @ F @ P.conj().T, atol=1e-12)


class TestTransport:
    @pytest.mark.parametrize("seed", range(5))
    def test_homological_identity(self, seed):
        rng = np.random.default_rng(seed)
        u = small_field(32, rng)
        assert nf.verify_transport_identity(u, 0.5) <= 1e-12 * max(1.0, np.sum(np.abs(u.coeffs) ** 2))

    @given(st.integers(-6, 6), st.floats(0.01, 0.3))
    def test_single_mode_has_trivial_transport(self, k, amp):
        u = modes(12, {k: amp})
        t = nf.flow_transport(u, 0.5)
        assert np.array_equal(t.forward, np.eye(25))

    def test_transport_flow_is_invertible(self, rng):
        t = nf.flow_transport(small_field(16, rng), 0.5)
        assert t.identity_defect() < 1e-9

    def test_large_beta_is_rejected(self):
        u = modes(16, {1: 40.0, 2: 40.0})
        with pytest.raises(ValueError):
            nf.flow_transport(u, 0.5)


class TestBlockDiagonalization:
    def test_richardson_recovers_quadratic_coefficient(self):
        val, err = nf.richardson_quadratic(lambda lam: np.array([3 * lam ** 2 + 5 * lam ** 4 - 7 * lam ** 6]))
        assert val[0] == pytest.approx(3.0, abs=1e-10)
        assert err < 1e-4

    def test_shell_fit_on_power_law(self):
        K = 256
        k = np.abs(np.arange(-K, K + 1)).astype(float)
        block = np.diag(np.maximum(k, 1.0) ** -1.5)
        c, n = nf.shell_norms(block, K, K / 8, K)
        assert nf.fit_slope(c, n) == pytest.approx(-1.5, abs=0.1)

    def test_fit_slope_of_empty_profile(self):
        assert nf.fit_slope(np.array([1.0, 2.0]), np.zeros(2)) == float("-inf")

    def test_zero_field_report(self):
        rep = nf.verify_block_diagonalization(FourierField.zeros(8), 0.5, 1.0)
        assert rep.slope == float("-inf") and rep.centers == []


class TestWeakNormalForm:
    @pytest.fixture(scope="class")
    @classmethod
    def q2(cls):
        return nf.build_Q2(res.x3_table(6), 0.5)

    def test_divides_nonresonant_entries(self, q2):
        X = res.x3_table(6)
        j1, j2, j3 = X.indices()
        k = j1 - j2 + j3
        w = lambda v: np.abs(v).astype(float) ** 0.5
        om = w(j1) - w(j2) + w(j3) - w(k)
        nz = q2.table.C != 0
        assert np.allclose(q2.table.C[nz] * 1j * om[nz], X.C[nz], atol=1e-15)

    def test_zero_on_resonant_and_inside_tuples(self, q2):
        C = q2.table.C
        J = 6
        assert C[1 + J, 1 + J, 1 + J] == 0          # all four indices inside
        assert C[1 + J, 1 + J, 5 + J] == 0          # paired (1, 1, 5, 5)
        assert C[3 + J, 3 + J, -2 + J] == 0         # paired with k = -2

    def test_example_divisor(self, q2):
        J = 6
        # (1, -1, 1 -> 3): one index outside the unit circle
        X = res.x3_table(6).C[1 + J, -1 + J, 1 + J]
        assert X != 0
        om = 1 - np.sqrt(3)
        assert q2.table.C[1 + J, -1 + J, 1 + J] == pytest.approx(X / (1j * om), rel=1e-14)

    def test_audited_minima_are_positive(self, q2):
        assert q2.min_divisor_class1 == pytest.approx(np.sqrt(3) - 1)
        assert q2.min_scaled_divisor_class2 > 0

    def test_rejects_non_symmetric(self):
        C = np.zeros((5, 5, 5), dtype=complex)
        C[0, 1, 2] = 1
        with pytest.raises(ValueError):
            nf.build_Q2(res.CubicTable(C, 2), 0.5)

    def test_newton_inversion(self, q2, rng):
        z = 0.05 * FourierField.random(6, rng).coeffs
        u, its = nf.invert_near_identity(q2.table, z)
        assert np.max(np.abs(u + q2.table.evaluate(u, 6) - z)) <= 1e-15
        assert its <= 6

    def test_jacobians_against_finite_differences(self, q2, rng):
        u = 0.1 * FourierField.random(6, rng).coeffs
        v = FourierField.random(6, rng).coeffs
        A, B = nf._cubic_jacobians(q2.table, u)
        h = 1e-6
        fd = (q2.table.evaluate(u + h * v, 6) - q2.table.evaluate(u - h * v, 6)) / (2 * h)
        assert np.allclose(A @ v + B @ np.conj(v), fd, atol=1e-9)

    @pytest.mark.parametrize("k,a", [(2, 0.3), (-3, 0.1j), (0, 0.5)])
    def test_renormalized_cubic_on_a_plane_wave(self, k, a):
        # the plane wave a e^{ikx} picks up the frequency shift |a|^2 k
        u = np.zeros(9, dtype=complex)
        u[4 + k] = a
        expected = np.zeros(9, dtype=complex)
        expected[4 + k] = -1j * k * abs(a) ** 2 * a
        assert np.allclose(nf.renormalized_cubic(u), expected, atol=1e-16)

    def test_transformed_field_is_linear_at_small_amplitude(self, q2, rng):
        z = FourierField.random(6, rng).coeffs
        lam = 1e-4
        lin = -1j * np.abs(np.arange(-6, 7)) ** 0.5 * z
        got = nf.transformed_field(q2.table, lam * z, 0.5) / lam
        assert np.allclose(got, lin, atol=1e-7)


class TestStrongLambda:
    @pytest.mark.parametrize("alpha", [0.3, 0.5])
    def test_only_resonant_term_remains(self, alpha):
        rep = nf.verify_strong_lambda(alpha, K=6)
        assert rep.passed
        assert max(rep.block0_residual, rep.block1_residual, rep.block2_residual) <= rep.tolerance

    def test_window_limit(self):
        with pytest.raises(ValueError):
            nf.verify_strong_lambda(0.5, K=10)
