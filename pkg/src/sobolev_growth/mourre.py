"""Escape-function operator, positive commutator checks and growth measurement.

All three operators have symbols whose spatial part is a trigonometric
polynomial of degree two, so their Bony-Weyl matrices are banded and are
assembled directly from the band formula
``A[k, j] = chi(k - j, (k + j)/2) c_{k-j}((k + j)/2)``.  This keeps the
construction linear in ``K`` and independent of the sampled-symbol route in
:mod:`paradiff`, which the tests use as a cross-check.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import dynamics
from .fourier import FourierField, sobolev_norm, split_modes
from .paradiff import weighted_min_eigenvalue
from .symbols import (
    DEFAULT_CUTOFF,
    SymbolLattice,
    constants_J1_I1,
    eta_R,
    eta_prime,
    profile_t,
    profile_v,
)

DENSE_LIMIT = 1024


def radius(eps: float, theta: float, alpha: float) -> float:
    """``R = eps^{-(3 + theta)/(1 - alpha)}``."""
    return eps ** (-(3 + theta) / (1 - alpha))


def minimal_K(R: float) -> int:
    return 3 * math.ceil(R) + 2 + 8


def banded_bw(coeffs: dict, K: int, xi_factor) -> sp.csr_matrix:
    """Sparse Bony-Weyl matrix of ``sum_n c_n e^{inx} f(xi)``.

    ``coeffs`` maps spatial frequencies to constants and ``xi_factor`` maps
    midpoint frequencies to the common multiplier ``f``.
    """
    k = np.arange(-K, K + 1)
    rows, cols, vals = [], [], []
    for n, c in coeffs.items():
        if c == 0:
            continue
        j = k - n
        ok = np.abs(j) <= K
        kk, jj = k[ok], j[ok]
        mid = 0.5 * (kk + jj)
        v = c * DEFAULT_CUTOFF.chi(n, mid) * xi_factor(mid)
        rows.append(kk + K)
        cols.append(jj + K)
        vals.append(v)
    n = 2 * K + 1
    if not rows:
        return sp.csr_matrix((n, n), dtype=complex)
    return sp.csr_matrix((np.concatenate(vals).astype(complex),
                          (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))


def _t_coeffs(z1: complex, zm1: complex) -> dict:
    c = z1 * np.conj(zm1)
    return {2: 0.5j * c, -2: -0.5j * np.conj(c)}


def _v_coeffs(z1: complex, zm1: complex) -> dict:
    c = z1 * np.conj(zm1)
    return {2: c, -2: np.conj(c)}


def escape_operator(z1, zm1, s: float, R: float, K: int) -> sp.csr_matrix:
    w = lambda xi: np.abs(xi) ** (2 * s) * eta_R(xi, R) ** 2
    return banded_bw(_t_coeffs(z1, zm1), K, w)


def transport_operator(z1, zm1, K: int) -> sp.csr_matrix:
    J1, _ = constants_J1_I1(z1, zm1)
    coeffs = dict(_v_coeffs(z1, zm1))
    coeffs[0] = J1
    return banded_bw(coeffs, K, lambda xi: xi)


def weight_operator(s: float, R: float, K: int) -> sp.csr_matrix:
    return banded_bw({0: 1.0}, K, lambda xi: np.abs(xi) ** (2 * s) * eta_R(xi, R) ** 2)


@dataclass
class MourreSetup:
    """Operators on modes ``-K..K`` (sparse CSR)."""

    eps: float
    theta: float
    alpha: float
    s: float
    R: float
    K: int
    z1: complex
    zm1: complex
    A_op: sp.csr_matrix
    B_op: sp.csr_matrix
    C_op: sp.csr_matrix
    J1: float
    I1: float
    nu0: float

    @property
    def N(self) -> int:
        return math.ceil(self.R)


def build_setup(eps: float, theta: float, alpha: float, s: float, z1: complex, zm1: complex,
                K: int, R: float | None = None, check_K: bool = True) -> MourreSetup:
    R = radius(eps, theta, alpha) if R is None else R
    if check_K and K < minimal_K(R):
        raise ValueError(f"truncation K={K} too small for R={R:.4g}; need K >= {minimal_K(R)}")
    J1, I1 = constants_J1_I1(z1, zm1)
    nu0 = (2 * abs(z1) * abs(zm1) - J1) / eps ** 2
    return MourreSetup(
        eps, theta, alpha, s, R, K, complex(z1), complex(zm1),
        escape_operator(z1, zm1, s, R, K),
        transport_operator(z1, zm1, K),
        weight_operator(s, R, K),
        J1, I1, nu0,
    )


def _restrict(mat, pad: int):
    if pad == 0:
        return mat
    return mat[pad:-pad, pad:-pad]


def commutator_matrix(setup: MourreSetup, pad: int = 4) -> np.ndarray:
    """Dense ``i[A, B] - I1 C`` on ``-K..K``, assembled on ``K + pad`` so the
    truncation edge does not cut the products."""
    big = build_setup(setup.eps, setup.theta, setup.alpha, setup.s, setup.z1, setup.zm1,
                      setup.K + pad, R=setup.R, check_K=False)
    A, B, C = big.A_op, big.B_op, big.C_op
    comm = 1j * (A @ B - B @ A)
    M = _restrict(comm.toarray(), pad) - setup.I1 * _restrict(C.toarray(), pad)
    return M


@dataclass
class CommutatorReport:
    min_gap: float
    scale: float  # eps^4 / R
    constant: float  # measured C with min_gap >= -C eps^4 / R
    constant_z: float  # same against (|z1|^4 + |zm1|^4) / R
    hermitian_defect: float


def check_positive_commutator(setup: MourreSetup) -> CommutatorReport:
    M = commutator_matrix(setup)
    herm = float(np.max(np.abs(M - M.conj().T), initial=0.0))
    scale_h = float(np.max(np.abs(M), initial=0.0))
    if not np.any(M):
        return CommutatorReport(0.0, setup.eps ** 4 / setup.R, 0.0, 0.0, 0.0)
    lam = weighted_min_eigenvalue(M, setup.s)
    scale = setup.eps ** 4 / setup.R
    zscale = (abs(setup.z1) ** 4 + abs(setup.zm1) ** 4) / setup.R
    return CommutatorReport(
        min_gap=lam,
        scale=scale,
        constant=max(0.0, -lam) / scale,
        constant_z=max(0.0, -lam) / zscale if zscale > 0 else 0.0,
        hermitian_defect=herm / scale_h,
    )


@dataclass
class UpperBoundReport:
    min_gap: float
    scale: float
    constant: float


def check_upper_bound(setup: MourreSetup) -> UpperBoundReport:
    """``2|z1||zm1| C - A`` in the ``H^s``-weighted sense."""
    M = (2 * abs(setup.z1) * abs(setup.zm1) * setup.C_op - setup.A_op).toarray()
    scale = (abs(setup.z1) ** 2 + abs(setup.zm1) ** 2) / setup.R ** 2
    if not np.any(M):
        return UpperBoundReport(0.0, scale, 0.0)
    lam = weighted_min_eigenvalue(M, setup.s)
    return UpperBoundReport(lam, scale, max(0.0, -lam) / scale if scale > 0 else 0.0)


@dataclass
class SymbolPositivity:
    a1_min: float
    a2_min: float
    decomposition_defect: float  # relative, bracket vs I1 psi1^2 + a1 psi1^2 + a2 psi2^2


def bracket_decomposition(z1, zm1, s: float, R: float, M: int = 256) -> SymbolPositivity:
    """Pointwise ``a1, a2`` and the bracket identity on an ``x``-grid.

    The bracket ``{t(x)|xi|^{2s} eta_R^2, (J1 + v(x)) xi}`` is evaluated in
    closed form from ``d/dxi (|xi|^{2s} eta_R^2)`` and compared with the
    decomposition.
    """
    x = 2 * np.pi * np.arange(M) / M
    J1, I1 = constants_J1_I1(z1, zm1)
    c = z1 * np.conj(zm1)
    t = profile_t(z1, zm1, x)
    v = profile_v(z1, zm1, x)
    t_x = -2 * np.real(c * np.exp(2j * x))
    v_x = -4 * np.imag(c * np.exp(2j * x))
    a1 = t * v_x - v * t_x - J1 * t_x - I1 + (2 * s - 1) * t * v_x
    a2 = 2 * t * v_x
    xi = np.linspace(R, 2.5 * R, 301)
    e = eta_R(xi, R)
    ep = eta_prime(xi / R)
    psi1 = xi ** (2 * s) * e ** 2
    psi2 = xi ** (2 * s) * e * (xi / R) * ep
    dw = 2 * s * xi ** (2 * s - 1) * e ** 2 + xi ** (2 * s) * 2 * e * ep / R
    # {a, b} = d_xi a d_x b - d_x a d_xi b with a = t w(xi), b = (J1 + v) xi
    bracket = np.outer(t * v_x, dw * xi) - np.outer(t_x * (J1 + v), psi1)
    decomp = I1 * psi1[None, :] + np.outer(a1, psi1) + np.outer(a2, psi2)
    scale = float(np.max(np.abs(bracket)))
    return SymbolPositivity(float(a1.min()), float(a2.min()),
                            float(np.max(np.abs(bracket - decomp)) / scale) if scale else 0.0)


def a_functional(setup: MourreSetup, zeta: np.ndarray | FourierField) -> float:
    vec = zeta.coeffs if isinstance(zeta, FourierField) else np.asarray(zeta)
    Kz = (len(vec) - 1) // 2
    if Kz != setup.K:
        raise ValueError("field truncation differs from the setup")
    val = np.vdot(vec, setup.A_op @ vec)
    if abs(val.imag) > 1e-12 * max(abs(val), float(np.vdot(vec, vec).real)):
        raise ArithmeticError(f"A-functional has imaginary part {val.imag:.3e}")
    return float(val.real)


# ---------------------------------------------------------------------------
# well-prepared data


@dataclass
class WellPreparedData:
    eps: float
    theta: float
    alpha: float
    s: float
    rho1: float
    rhom1: float
    rho: float
    N: int
    R: float
    nu0: float
    field: FourierField
    A0: float
    A0_closed_form: float
    threshold: float


def nu0_of(rho1: float, rhom1: float) -> float:
    return 2 * rho1 * rhom1 - 0.5 * (rho1 ** 2 + rhom1 ** 2)


def a0_closed_form(eps, rho1, rhom1, rho, N, s) -> float:
    return eps ** 2 * rho1 * rhom1 * (3 * N + 1) ** (2 * s) * rho ** 2


def minimal_rho(eps, theta, rho1, rhom1, N, s) -> float:
    """Smallest ``rho`` with ``A(0) > eps^{3 - 3 theta}`` by the closed form."""
    return math.sqrt(eps ** (3 - 3 * theta) / (eps ** 2 * rho1 * rhom1 * (3 * N + 1) ** (2 * s)))


class WellPreparedError(ValueError):
    pass


def build_wellprepared(eps: float, theta: float, alpha: float, s: float, rho1: float, rhom1: float,
                       rho: float | None = None, K: int | None = None) -> WellPreparedData:
    if rho1 ** 2 + rhom1 ** 2 > 1:
        raise WellPreparedError("rho1^2 + rho_-1^2 must not exceed 1")
    nu0 = nu0_of(rho1, rhom1)
    if nu0 <= 0:
        raise WellPreparedError(f"nu0 = 2 rho1 rho_-1 - (rho1^2 + rho_-1^2)/2 = {nu0:.6g} is not positive")
    R = radius(eps, theta, alpha)
    N = math.ceil(R)
    rho_min = minimal_rho(eps, theta, rho1, rhom1, N, s)
    if rho is None:
        rho = 2 * rho_min
    K = minimal_K(R) if K is None else K
    if K < 3 * N + 2:
        raise ValueError(f"K={K} cannot hold the mode 3N+2={3 * N + 2}")
    field_ = FourierField.from_modes({1: eps * rho1, -1: eps * rhom1, 3 * N: rho, 3 * N + 2: 1j * rho}, K)
    setup = build_setup(eps, theta, alpha, s, eps * rho1, eps * rhom1, max(K, 3 * N + 3), R=R, check_K=False)
    zperp = split_modes(field_.resize(setup.K)).normal
    A0 = a_functional(setup, zperp)
    thr = eps ** (3 - 3 * theta)
    if not A0 > thr:
        raise WellPreparedError(f"initial functional too small: A(0) = {A0:.6g} <= eps^(3-3theta) = {thr:.6g}; "
                                f"minimal passing rho is {rho_min:.17g}")
    return WellPreparedData(eps, theta, alpha, s, rho1, rhom1, rho, N, R, nu0, field_, A0,
                            a0_closed_form(eps, rho1, rhom1, rho, N, s), thr)


# ---------------------------------------------------------------------------
# growth experiment


@dataclass
class GrowthResult:
    rate_fit: float
    lower_rate: float
    growth_factor: float
    window_start: float
    step_fraction: float
    C_meas: float
    times: list
    A: list
    Hs: list
    lower_envelope: list
    passed: bool
    details: dict = field(default_factory=dict)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "A", "Hs_norm", "lower_envelope"])
            for row in zip(self.times, self.A, self.Hs, self.lower_envelope):
                w.writerow([f"{v:.17g}" for v in row])

    def summary(self) -> dict:
        return {"rate_fit": self.rate_fit, "lower_rate": self.lower_rate, "pass": self.passed,
                "growth_factor": self.growth_factor, "step_fraction": self.step_fraction,
                "C_meas": self.C_meas, "window_start": self.window_start, **self.details}

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.summary(), fh, indent=2)


def horizon(eps: float, nu0: float) -> float:
    """``(T0 / eps^2) log(1/eps)`` with ``T0 = 1 / nu0``."""
    return math.log(1 / eps) / (nu0 * eps ** 2)


def growth_experiment(setup: MourreSetup, data: WellPreparedData, dt: float, horizon_T: float | None = None,
                      stride: int = 1, step_C: float = 1.0) -> GrowthResult:
    """Run the effective equation from ``z_perp(0)`` and measure ``A(t)``.

    The fitted rate is the least-squares slope of ``log A`` on the window that
    starts once ``A`` has grown by a factor ``e`` (or at ``t = 0`` when that
    happens after half the horizon).  The per-step audit counts steps with
    ``dA/dt >= eps^2 nu0 (A - step_C eps^{3 - 2 theta})``; the constant
    ``C_meas`` is the smallest value for which the audit holds on every step.
    """
    T_max = horizon(data.eps, data.nu0)
    T = T_max if horizon_T is None else horizon_T
    if T > T_max * (1 + 1e-12):
        raise ValueError(f"horizon {T} exceeds (T0/eps^2) log(1/eps) = {T_max}")
    zperp = split_modes(data.field.resize(setup.K)).normal
    Aop = setup.A_op
    traj = dynamics.propagate_effective(
        zperp, setup.z1, setup.zm1, setup.alpha, setup.s, setup.R, dt, T, stride=stride,
        sparse=setup.K > 600,
        observers={"A": lambda vec: float(np.vdot(vec, Aop @ vec).real)},
    )
    t = np.asarray(traj.times)
    A = np.asarray(traj.extra["A"])
    Hs = traj.column("Hs")
    eps, nu0, theta = data.eps, data.nu0, data.theta
    lower_rate = nu0 * eps ** 2
    floor = eps ** (3 - 2 * theta)
    env = A[0] * np.exp(lower_rate * t)
    start = 0.0
    crossed = np.flatnonzero(A >= math.e * A[0])
    if crossed.size and t[crossed[0]] <= t[-1] / 2:
        start = float(t[crossed[0]])
    win = (t >= start) & (A > 0)
    rate = float(np.polyfit(t[win], np.log(A[win]), 1)[0]) if win.sum() >= 2 else float("nan")
    dA = np.diff(A) / np.diff(t)
    Am = A[:-1]
    ok = dA >= lower_rate * (Am - step_C * floor)
    frac = float(np.mean(ok)) if ok.size else 1.0
    need = (Am - dA / lower_rate) / floor  # C making each step hold
    C_meas = float(max(0.0, np.max(need))) if need.size else 0.0
    growth = float(A[-1] / A[0]) if A[0] > 0 else float("nan")
    passed = rate >= 0.5 * lower_rate and growth >= 4 and frac >= 0.95
    return GrowthResult(rate, lower_rate, growth, start, frac, C_meas, t.tolist(), A.tolist(),
                        Hs.tolist(), env.tolist(), bool(passed),
                        {"horizon": T, "K": setup.K, "dt": dt, "A_max": float(A.max()),
                         "t_at_max": float(t[int(np.argmax(A))])})
