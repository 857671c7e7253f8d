import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sobolev_growth import mourre as m
from sobolev_growth.fourier import FourierField, split_modes
from sobolev_growth.paradiff import quantize_bw
from sobolev_growth.symbols import SymbolGrid, SymbolLattice, eta_R, profile_t, profile_v

EPS, THETA, ALPHA, S = 0.5, 0.05, 0.5, 7.0


@pytest.fixture(scope="module")
def setup():
    return m.build_setup(EPS, THETA, ALPHA, S, EPS * 0.6, EPS * 0.6, m.minimal_K(m.radius(EPS, THETA, ALPHA)))


@pytest.fixture(scope="module")
def data():
    return m.build_wellprepared(EPS, THETA, ALPHA, S, 0.6, 0.6)


def sampled(values_fn, K):
    lat = SymbolLattice.for_truncation(K)
    X, XI = np.meshgrid(lat.x, lat.xi, indexing="ij")
    return SymbolGrid(values_fn(X, XI).astype(complex), lat, 1.0)


class TestBandedAssembly:
    @pytest.mark.parametrize("z1,zm1", [(0.3, 0.3), (0.2 + 0.1j, -0.4j)])
    def test_escape_operator_against_sampled_symbol(self, z1, zm1):
        K, R, s = 40, 6.0, 1.0
        band = m.escape_operator(z1, zm1, s, R, K).toarray()
        sym = sampled(lambda x, xi: profile_t(z1, zm1, x) * np.abs(xi) ** (2 * s) * eta_R(xi, R) ** 2, K)
        ref = quantize_bw(sym, K).matrix
        assert np.allclose(band, ref, atol=1e-10 * np.max(np.abs(ref)))

    def test_transport_operator_against_sampled_symbol(self):
        z1, zm1, K = 0.3, 0.25, 40
        band = m.transport_operator(z1, zm1, K).toarray()
        J1 = 0.5 * (z1 ** 2 + zm1 ** 2)
        sym = sampled(lambda x, xi: (J1 + profile_v(z1, zm1, x)) * xi, K)
        assert np.allclose(band, quantize_bw(sym, K).matrix, atol=1e-12)

    def test_constant_symbol(self):
        C = m.banded_bw({0: 2.0}, 5, lambda xi: xi ** 2).toarray()
        assert np.allclose(C, np.diag(2.0 * np.arange(-5, 6) ** 2))

    def test_empty_symbol(self):
        assert m.banded_bw({2: 0.0}, 3, lambda xi: xi).nnz == 0


class TestConstants:
    def test_radius_and_truncation(self, data):
        assert m.radius(EPS, THETA, ALPHA) == pytest.approx(2 ** 6.1)
        assert data.R == pytest.approx(68.59, abs=5e-3)
        assert data.N == 69
        assert m.minimal_K(data.R) == 217

    def test_nu0_and_horizon(self):
        assert m.nu0_of(0.6, 0.6) == pytest.approx(0.36)
        assert m.horizon(0.5, 0.36) == pytest.approx(math.log(2) / 0.09)

    def test_setup_rejects_small_truncation(self):
        with pytest.raises(ValueError, match="too small"):
            m.build_setup(EPS, THETA, ALPHA, S, 0.3, 0.3, 100)


class TestFunctional:
    def test_closed_form(self, data):
        assert data.A0 == pytest.approx(data.A0_closed_form, rel=1e-12)
        assert data.A0 > data.threshold

    def test_default_amplitude(self, data):
        rho_min = m.minimal_rho(EPS, THETA, 0.6, 0.6, data.N, S)
        assert data.rho == pytest.approx(2 * rho_min)
        assert data.A0 == pytest.approx(4 * data.threshold, rel=1e-12)

    @settings(max_examples=15)
    @given(st.floats(0.1, 10), st.floats(0, 2 * math.pi))
    def test_scaling_and_gauge(self, setup, data, lam, phase):
        z = split_modes(data.field.resize(setup.K)).normal
        a = m.a_functional(setup, z)
        assert m.a_functional(setup, z * (lam * np.exp(1j * phase))) == pytest.approx(lam ** 2 * a, rel=1e-12)

    def test_supported_above_radius(self, setup):
        A = setup.A_op.copy()
        A.eliminate_zeros()
        A = A.tocoo()
        mid = 0.5 * (A.row + A.col) - setup.K
        assert np.all(np.abs(mid) >= setup.R * (1 - 1e-12))

    def test_operator_is_self_adjoint(self, setup):
        A = setup.A_op.toarray()
        assert np.max(np.abs(A - A.conj().T)) <= 1e-12 * np.max(np.abs(A))

    def test_vanishes_without_second_mode(self):
        st_ = m.build_setup(EPS, THETA, ALPHA, S, 0.3, 0.0, 217)
        assert st_.A_op.nnz == 0

    def test_rejects_wrong_truncation(self, setup):
        with pytest.raises(ValueError):
            m.a_functional(setup, FourierField.zeros(10))


class TestWellPreparedRejections:
    def test_amplitudes_too_large(self):
        with pytest.raises(m.WellPreparedError):
            m.build_wellprepared(EPS, THETA, ALPHA, S, 0.8, 0.8)

    def test_nonpositive_nu0(self):
        with pytest.raises(m.WellPreparedError, match="nu0"):
            m.build_wellprepared(EPS, THETA, ALPHA, S, 0.9, 0.1)

    def test_amplitude_below_threshold(self, data):
        with pytest.raises(m.WellPreparedError, match="minimal passing rho"):
            m.build_wellprepared(EPS, THETA, ALPHA, S, 0.6, 0.6, rho=0.5 * data.rho)

    def test_truncation_too_small(self):
        with pytest.raises(ValueError):
            m.build_wellprepared(EPS, THETA, ALPHA, S, 0.6, 0.6, K=100)

    def test_field_layout(self, data):
        f = data.field
        N = data.N
        assert f[1] == EPS * 0.6 and f[-1] == EPS * 0.6
        assert f[3 * N] == data.rho and f[3 * N + 2] == 1j * data.rho
        assert np.count_nonzero(f.coeffs) == 4


class TestCommutator:
    def test_hermitian_and_bounded(self, setup):
        rep = m.check_positive_commutator(setup)
        assert rep.hermitian_defect <= 1e-12
        assert rep.constant <= 100
        assert rep.scale == pytest.approx(EPS ** 4 / setup.R)

    def test_upper_bound_constant_finite(self, setup):
        assert math.isfinite(m.check_upper_bound(setup).constant)

    @pytest.mark.parametrize("z1,zm1", [(0.3, 0.3), (0.25, 0.35), (0.3, 0.3j)])
    def test_bracket_decomposition(self, z1, zm1):
        rep = m.bracket_decomposition(z1, zm1, S, 20.0)
        assert rep.decomposition_defect <= 1e-12
        assert rep.a1_min >= -1e-13 and rep.a2_min >= -1e-13

    def test_zero_operators(self):
        st_ = m.build_setup(EPS, THETA, ALPHA, S, 0.0, 0.0, 217)
        assert m.check_positive_commutator(st_).min_gap == 0.0
        assert m.check_upper_bound(st_).constant == 0.0


class TestGrowth:
    def test_growth_before_saturation(self, data):
        st_ = m.build_setup(EPS, THETA, ALPHA, S, EPS * 0.6, EPS * 0.6, 1024)
        g = m.growth_experiment(st_, data, 0.01, horizon_T=2.0)
        assert g.passed
        assert g.rate_fit >= g.lower_rate
        assert g.C_meas == 0.0
        assert np.all(np.diff(g.A) > 0)

    def test_control_without_second_mode(self, data):
        st_ = m.build_setup(EPS, THETA, ALPHA, S, EPS * 0.6, 0.0, 1024)
        g = m.growth_experiment(st_, data, 0.01, horizon_T=2.0)
        assert np.all(np.asarray(g.A) == 0)
        assert np.allclose(g.Hs, g.Hs[0], rtol=1e-12)

    def test_horizon_limit(self, setup, data):
        with pytest.raises(ValueError, match="horizon"):
            m.growth_experiment(setup, data, 0.1, horizon_T=10.0)

    def test_outputs(self, setup, data, tmp_path):
        g = m.growth_experiment(setup, data, 0.1, horizon_T=0.5)
        g.to_csv(tmp_path / "g.csv")
        g.to_json(tmp_path / "g.json")
        rows = np.genfromtxt(tmp_path / "g.csv", delimiter=",", names=True)
        assert len(rows) == len(g.times)
        assert rows.dtype.names == ("t", "A", "Hs_norm", "lower_envelope")
