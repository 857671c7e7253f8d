import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sobolev_growth import dynamics as dyn
from sobolev_growth.fourier import FourierField, mass, momentum, sobolev_norm


def direct_cubic(c):
    """|u|^2 u_x by explicit triple convolution."""
    K = (len(c) - 1) // 2
    out = np.zeros_like(c)
    r = range(-K, K + 1)
    for j1, j2, j3 in itertools.product(r, repeat=3):
        k = j1 - j2 + j3
        if abs(k) <= K:
            out[k + K] += c[j1 + K] * np.conj(c[j2 + K]) * 1j * j3 * c[j3 + K]
    return out


def random_small(K, rng, target=0.1, s0=2.0):
    u = FourierField.random(K, rng)
    return u * (target / sobolev_norm(u, s0))


class TestCubicTerm:
    def test_matches_triple_convolution(self, rng):
        c = FourierField.random(5, rng).coeffs
        assert np.allclose(dyn.cubic_term(c), direct_cubic(c), atol=1e-14)

    @given(st.integers(-6, 6), st.complex_numbers(max_magnitude=2, allow_nan=False))
    def test_plane_wave(self, k, a):
        c = FourierField.from_modes({k: a}, 6).coeffs
        expected = np.zeros_like(c)
        expected[k + 6] = 1j * k * abs(a) ** 2 * a
        assert np.allclose(dyn.cubic_term(c), expected, atol=1e-13)

    def test_renormalized_rhs_against_main(self, rng):
        u = FourierField.random(8, rng)
        m, p = mass(u), momentum(u)
        diff = dyn.rhs_renormalized(u, 0.5).coeffs - dyn.rhs_main(u, 0.5).coeffs
        assert np.allclose(diff, -1j * m * u.modes * u.coeffs + 1j * p * u.coeffs, atol=1e-14)


class TestPlaneWaves:
    @pytest.mark.parametrize("kind,sign", [("main", -1), ("renormalized", 1)])
    @pytest.mark.parametrize("k", [1, 3, -2])
    def test_exact_orbit(self, kind, sign, k):
        a, alpha, T = 0.1, 0.5, 2.0
        u0 = FourierField.from_modes({k: a}, 16)
        traj = dyn.integrate(kind, u0, alpha, 1e-3, T, stride=500)
        omega = abs(k) ** alpha + sign * a ** 2 * k
        for t, u in zip(traj.times, traj.states):
            exact = FourierField.from_modes({k: a * np.exp(-1j * omega * t)}, 16)
            assert np.max(np.abs(u.coeffs - exact.coeffs)) <= 1e-12

    def test_zero_data_stays_zero(self):
        traj = dyn.integrate("main", FourierField.zeros(8), 0.5, 0.01, 1.0)
        assert all(not np.any(u.coeffs) for u in traj.states)

    def test_linear_regime(self, rng):
        # at amplitude 1e-8 the cubic term is below roundoff
        u0 = FourierField.random(16, rng) * 1e-8
        traj = dyn.integrate("main", u0, 0.5, 0.01, 1.0, stride=100)
        exact = np.exp(-1j * np.abs(u0.modes) ** 0.5 * 1.0) * u0.coeffs
        assert np.allclose(traj.states[-1].coeffs, exact, rtol=0, atol=1e-20)


class TestInvariants:
    @pytest.mark.parametrize("kind", ["main", "renormalized"])
    def test_mass_and_momentum(self, kind, rng):
        u0 = random_small(32, rng)
        traj = dyn.integrate(kind, u0, 0.5, 1e-3, 1.0, stride=250)
        m, p = traj.column("mass"), traj.column("momentum")
        assert np.max(np.abs(m - m[0])) <= 1e-12 * m[0]
        assert np.max(np.abs(p - p[0])) <= 1e-12 * max(abs(p[0]), m[0])

    @settings(max_examples=10)
    @given(st.floats(0, 2 * np.pi))
    def test_gauge_covariance(self, theta):
        u0 = random_small(12, np.random.default_rng(3))
        a = dyn.integrate("main", u0, 0.5, 1e-2, 0.3).states[-1].coeffs
        b = dyn.integrate("main", u0 * np.exp(1j * theta), 0.5, 1e-2, 0.3).states[-1].coeffs
        assert np.allclose(b, np.exp(1j * theta) * a, atol=1e-15)

    @settings(max_examples=10)
    @given(st.floats(0, 2 * np.pi))
    def test_translation_covariance(self, x0):
        u0 = random_small(12, np.random.default_rng(4))
        shift = np.exp(-1j * u0.modes * x0)
        a = dyn.integrate("renormalized", u0, 0.5, 1e-2, 0.3).states[-1].coeffs
        b = dyn.integrate("renormalized", FourierField(shift * u0.coeffs, 12), 0.5, 1e-2, 0.3).states[-1].coeffs
        assert np.allclose(b, shift * a, atol=1e-14)

    def test_renormalize_transform_maps_main_to_renormalized(self, rng):
        u0 = random_small(16, rng, 0.2)
        main = dyn.integrate("main", u0, 0.5, 1e-3, 1.0, stride=200)
        ren = dyn.integrate("renormalized", u0, 0.5, 1e-3, 1.0, stride=200)
        mapped = dyn.renormalize_transform(main)
        for a, b in zip(mapped.states, ren.states):
            assert np.max(np.abs(a.coeffs - b.coeffs)) <= 1e-10

    def test_one_step_matches_rhs(self, rng):
        u0 = random_small(16, rng, 0.3)
        errs = []
        for dt in (1e-3, 5e-4):
            u1 = dyn.integrate("renormalized", u0, 0.5, dt, dt).states[-1]
            errs.append(np.max(np.abs((u1.coeffs - u0.coeffs) / dt - dyn.rhs_renormalized(u0, 0.5).coeffs)))
        assert errs[1] == pytest.approx(errs[0] / 2, rel=0.05)


class TestSafety:
    def test_cfl_guard(self, rng):
        with pytest.raises(ValueError, match="step too large"):
            dyn.integrate("main", random_small(64, rng, 2.0), 0.5, 0.1, 1.0)

    def test_overflow_is_reported(self):
        u0 = FourierField.from_modes({1: 30.0, 2: 30.0, -3: 20.0}, 8)
        traj = dyn.integrate("main", u0, 0.5, 0.05, 50.0, check_cfl=False)
        assert traj.aborted is not None
        assert np.all(np.isfinite(traj.states[-1].coeffs))

    @pytest.mark.parametrize("args", [("main", -1.0, 1.0), ("main", 0.1, -1.0), ("cubic", 0.1, 1.0)])
    def test_bad_arguments(self, args):
        kind, dt, T = args
        with pytest.raises(ValueError):
            dyn.integrate(kind, FourierField.zeros(4), 0.5, dt, T)


class TestTrajectory:
    def test_monitor_columns(self, rng, tmp_path):
        traj = dyn.integrate("main", random_small(8, rng), 0.5, 0.01, 0.1, stride=5)
        assert traj.monitors_consistent()
        assert traj.times == pytest.approx([0.0, 0.05, 0.1])
        path = tmp_path / "m.csv"
        traj.to_csv(path)
        data = np.genfromtxt(path, delimiter=",", names=True)
        assert list(data.dtype.names) == list(dyn.MONITOR_COLUMNS)
        assert np.array_equal(data["Hs"], traj.column("Hs"))

    def test_split_monitors(self):
        u = FourierField.from_modes({1: 0.3, -1: 0.4, 2: 0.01}, 4)
        m = dyn.monitors(u, 7.0, 2.0)
        assert m["ztop_L2"] == pytest.approx(0.5)
        assert m["zperp_L2"] == pytest.approx(0.01)
        assert m["zperp_Hs0"] == pytest.approx(0.04)  # weight max(1, |k|)^s0

    def test_bootstrap_and_control_reports(self):
        u = FourierField.from_modes({1: 0.2, -1: 0.2, 3: 1e-4}, 8)
        traj = dyn.integrate("renormalized", u, 0.5, 1e-2, 1.0, stride=10)
        boot = dyn.bootstrap_check(traj, 0.5, 0.05, 2.0)
        assert boot.ztop_ok and boot.zperp_ok and boot.hs0_ok and boot.zperp_hs0_ok
        assert boot.interpolation_ok
        ctrl = dyn.monitor_long_time_controlled(traj, 0.5, 0.05, 7.0, 2.0)
        assert ctrl.small_initial_data
        assert ctrl.threshold == pytest.approx(0.5 ** -0.05)


class TestEffective:
    def test_rejects_tangential_modes(self):
        with pytest.raises(ValueError):
            dyn.propagate_effective(FourierField.from_modes({1: 0.1}, 16), 0.3, 0.3, 0.5, 7.0, 10.0, 0.1, 1.0)

    @pytest.mark.parametrize("sparse", [False, True])
    def test_conserves_mass(self, sparse, rng):
        z = FourierField.random(32, rng)
        z = FourierField(np.where(np.abs(z.modes) == 1, 0, z.coeffs), 32)
        traj = dyn.propagate_effective(z, 0.3, 0.3, 0.5, 7.0, 10.0, 0.05, 2.0, sparse=sparse)
        m = traj.column("mass")
        assert np.max(np.abs(m - m[0])) <= 1e-12 * m[0]

    def test_dense_and_sparse_agree(self, rng):
        z = FourierField.random(24, rng)
        z = FourierField(np.where(np.abs(z.modes) == 1, 0, z.coeffs), 24)
        a = dyn.propagate_effective(z, 0.3, 0.2, 0.5, 7.0, 10.0, 0.05, 1.0, sparse=False).states[-1]
        b = dyn.propagate_effective(z, 0.3, 0.2, 0.5, 7.0, 10.0, 0.05, 1.0, sparse=True).states[-1]
        assert np.allclose(a.coeffs, b.coeffs, atol=1e-12)

    def test_no_transport_keeps_every_norm(self, rng):
        z = FourierField.random(16, rng)
        z = FourierField(np.where(np.abs(z.modes) == 1, 0, z.coeffs), 16)
        traj = dyn.propagate_effective(z, 0.0, 0.0, 0.5, 7.0, 10.0, 0.1, 3.0)
        hs = traj.column("Hs")
        assert np.max(np.abs(hs - hs[0])) <= 1e-12 * hs[0]

    def test_perturbed_run_with_zero_perturbation(self, rng):
        z = FourierField.random(12, rng)
        z = FourierField(np.where(np.abs(z.modes) == 1, 0, z.coeffs), 12)
        zero = lambda t: np.zeros((25, 25))
        a = dyn.propagate_effective(z, 0.2, 0.1, 0.5, 7.0, 10.0, 0.01, 0.5, include_perturbations=True,
                                    perturbation=zero).states[-1]
        b = dyn.propagate_effective(z, 0.2, 0.1, 0.5, 7.0, 10.0, 0.01, 0.5).states[-1]
        assert np.allclose(a.coeffs, b.coeffs, atol=1e-9)

    def test_observers(self, rng):
        z = FourierField(np.zeros(17, dtype=complex), 8)
        traj = dyn.propagate_effective(z, 0.2, 0.1, 0.5, 7.0, 10.0, 0.1, 0.3, observers={"one": lambda v: 1.0})
        assert traj.column("one").tolist() == [1.0] * 4
