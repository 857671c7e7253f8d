"""Conjugation steps as matrix flows and checks of the homological identities.

Operators act on the pair ``U = (u, ubar)`` whose second half holds the
coefficients ``conj(u_{-k})``.  The linear part is
``L0 = diag(-i|D|^alpha, +i|D|^alpha)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import resonance as res
from .fourier import FourierField
from .paradiff import ParaOperator, pair_diag, pair_offdiag, pair_vector, quantize_bw
from .symbols import (
    SymbolGrid,
    SymbolLattice,
    beta2_coefficients,
    dx,
    g2_expansion,
    sym_beta2,
    sym_b,
    sym_resV,
    sym_underlineV,
)

FLOW_TOL = 1e-11
FLOW_STEPS = 16
MAX_HALVINGS = 8
LAMBDAS = (2.0 ** -4, 2.0 ** -5, 2.0 ** -6)


@dataclass(frozen=True, eq=False)
class FlowResult:
    """Time-one map of a linear matrix flow together with its inverse."""

    forward: np.ndarray
    inverse: np.ndarray
    generator_trace: list = field(default_factory=list)

    def identity_defect(self) -> float:
        n = self.forward.shape[0]
        return float(np.linalg.norm(self.forward @ self.inverse - np.eye(n), 2))

    def as_operator(self, K: int) -> ParaOperator:
        return ParaOperator(self.forward, K, 0.0, "flow")


def _rk4_flow(generator: Callable[[float], np.ndarray], n: int, steps: int,
              t0: float = 0.0, t1: float = 1.0) -> np.ndarray:
    h = (t1 - t0) / steps
    Y = np.eye(n, dtype=complex)
    t = t0
    for _ in range(steps):
        g0 = generator(t)
        gm = generator(t + h / 2)
        g1 = generator(t + h)
        k1 = g0 @ Y
        k2 = gm @ (Y + 0.5 * h * k1)
        k3 = gm @ (Y + 0.5 * h * k2)
        k4 = g1 @ (Y + h * k3)
        Y = Y + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
        t += h
    return Y


def integrate_flow(generator: Callable[[float], np.ndarray], n: int,
                   steps: int = FLOW_STEPS, tol: float = FLOW_TOL) -> FlowResult:
    """RK4 in ``tau`` on ``[0, 1]``; the step count doubles until two
    successive results agree to ``tol`` (relative, spectral norm)."""
    trace = []
    prev = _rk4_flow(generator, n, steps)
    for _ in range(MAX_HALVINGS):
        steps *= 2
        cur = _rk4_flow(generator, n, steps)
        change = float(np.linalg.norm(cur - prev, 2) / max(1.0, np.linalg.norm(cur, 2)))
        trace.append({"steps": steps, "change": change})
        if change < tol:
            inv = _rk4_flow(generator, n, steps, 1.0, 0.0)
            return FlowResult(cur, inv, trace)
        prev = cur
    raise RuntimeError(f"flow did not converge after {steps} steps (last change {trace[-1]['change']:.3e})")


# ---------------------------------------------------------------------------
# block-diagonalization


def _lattice(K: int) -> SymbolLattice:
    return SymbolLattice.for_truncation(K)


def outdiag_generator(u: FourierField, alpha: float, rho: float) -> np.ndarray:
    """Pair matrix of the out-diagonal generator built from ``g2``."""
    lat = _lattice(u.K)
    if not np.any(u.coeffs):
        return np.zeros((2 * (2 * u.K + 1),) * 2, dtype=complex)
    g2 = g2_expansion(u, alpha, rho, lat).total.grid()
    return pair_offdiag(g2, u.K)


def flow_outdiag(u: FourierField, alpha: float, rho: float) -> FlowResult:
    G = outdiag_generator(u, alpha, rho)
    return integrate_flow(lambda tau: G, G.shape[0])


def _dispersion(K: int, alpha: float) -> np.ndarray:
    return np.abs(np.arange(-K, K + 1)).astype(float) ** alpha


def linear_pair(K: int, alpha: float) -> np.ndarray:
    m = _dispersion(K, alpha)
    return np.diag(np.concatenate([-1j * m, 1j * m]))


def outdiag_quadratic(u: FourierField, weight_xi: bool = False) -> np.ndarray:
    """Pair matrix of the out-diagonal term ``Op(u u_x)``; with ``weight_xi``
    the symbol is multiplied by ``i xi`` (a first-order comparison baseline)."""
    lat = _lattice(u.K)
    b = sym_b(u, lat)
    if weight_xi:
        b = SymbolGrid(b.values * (1j * lat.xi)[None, :], lat, 1.0)
    return pair_offdiag(b, u.K)


def dexp_right(G: np.ndarray, dG: np.ndarray, tol: float = 1e-17, max_terms: int = 40) -> np.ndarray:
    """``(d/dt e^G) e^{-G} = sum_n ad_G^n(dG) / (n + 1)!`` summed to convergence."""
    total = dG.copy()
    term = dG
    scale = max(float(np.max(np.abs(dG))), 1e-300)
    for n in range(1, max_terms):
        term = (G @ term - term @ G) / (n + 1)
        total += term
        if np.max(np.abs(term)) <= tol * scale:
            return total
    raise RuntimeError("commutator series for the flow derivative did not converge")


def conjugated_outdiag(u: FourierField, alpha: float, rho: float) -> np.ndarray:
    """Upper-right block of ``Psi L Psi^{-1} + (d/dt Psi) Psi^{-1}``.

    ``L = L0 + Op_offdiag(u u_x)`` and the time derivative follows the
    linear evolution ``u_t = -i|D|^alpha u``.  ``Psi`` and its inverse come
    from the RK4 flow.  Because ``G`` is exactly quadratic in ``u``, its
    derivative along ``v`` is the polarization ``(G(u + v) - G(u - v)) / 2``,
    and the generator is constant in ``tau`` so the derivative of the
    time-one map is the commutator series of :func:`dexp_right`.
    """
    K = u.K
    G = outdiag_generator(u, alpha, rho)
    flow = integrate_flow(lambda tau: G, G.shape[0])
    v = FourierField(-1j * _dispersion(K, alpha) * u.coeffs, K)
    dG = 0.5 * (outdiag_generator(u + v, alpha, rho) - outdiag_generator(u - v, alpha, rho))
    L = linear_pair(K, alpha) + outdiag_quadratic(u)
    conj = flow.forward @ L @ flow.inverse + dexp_right(G, dG)
    N = 2 * K + 1
    return conj[:N, N:]


def richardson_quadratic(fn: Callable[[float], np.ndarray], lambdas=LAMBDAS):
    """Coefficient of ``lambda^2`` in an even series from samples at
    ``lambda, lambda/2, lambda/4``; returns ``(value, error_estimate)``."""
    f = [fn(lam) / lam ** 2 for lam in lambdas]
    r1 = [(4 * f[i + 1] - f[i]) / 3 for i in range(2)]
    r2 = (16 * r1[1] - r1[0]) / 15
    return r2, float(np.max(np.abs(r2 - r1[1])))


def shell_norms(block: np.ndarray, K: int, k_min: float, k_max: float, per_octave: int = 4):
    """Spectral norms of the row blocks ``k_lo <= |k| < k_hi`` on
    geometric shells between ``k_min`` and ``k_max``."""
    k = np.abs(np.arange(-K, K + 1))
    n_shells = int(round(per_octave * np.log2(k_max / k_min)))
    edges = k_min * 2.0 ** (np.arange(n_shells + 1) / per_octave)
    centers, norms = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        rows = (k >= lo) & ((k < hi) | ((hi >= k_max) & (k <= hi)))
        if not np.any(rows):
            continue
        centers.append(float(np.sqrt(lo * hi)))
        norms.append(float(np.linalg.norm(block[rows], 2)))
    return np.array(centers), np.array(norms)


def fit_slope(centers: np.ndarray, norms: np.ndarray) -> float:
    ok = norms > 0
    if ok.sum() < 2:
        return float("-inf")
    return float(np.polyfit(np.log(centers[ok]), np.log(norms[ok]), 1)[0])


@dataclass
class DecayReport:
    rho: float
    alpha: float
    K: int
    slope: float
    baseline_slope: float
    baseline_xi_weighted_slope: float
    fit_error: float
    centers: list
    norms: list
    baseline_norms: list
    baseline_xi_norms: list


def verify_block_diagonalization(u: FourierField, alpha: float, rho: float,
                                 k_range: tuple[float, float] | None = None,
                                 per_octave: int = 4) -> DecayReport:
    """Decay of the out-diagonal block after conjugation, fitted on shells.

    The quadratic part is isolated by rescaling ``u -> lambda u`` and
    Richardson elimination of the quartic remainder.
    """
    K = u.K
    k_min, k_max = k_range if k_range is not None else (K / 4, K)
    N = 2 * K + 1
    if not np.any(u.coeffs):
        return DecayReport(rho, alpha, K, float("-inf"), float("-inf"), float("-inf"), 0.0, [], [], [], [])
    block, err = richardson_quadratic(lambda lam: conjugated_outdiag(u * lam, alpha, rho))
    base = outdiag_quadratic(u)[:N, N:]
    base_xi = outdiag_quadratic(u, weight_xi=True)[:N, N:]
    c, nrm = shell_norms(block, K, k_min, k_max, per_octave)
    _, nb = shell_norms(base, K, k_min, k_max, per_octave)
    _, nbx = shell_norms(base_xi, K, k_min, k_max, per_octave)
    return DecayReport(
        rho=rho, alpha=alpha, K=K,
        slope=fit_slope(c, nrm),
        baseline_slope=fit_slope(c, nb),
        baseline_xi_weighted_slope=fit_slope(c, nbx),
        fit_error=err,
        centers=c.tolist(), norms=nrm.tolist(), baseline_norms=nb.tolist(), baseline_xi_norms=nbx.tolist(),
    )


# ---------------------------------------------------------------------------
# paracomposition


def transport_generator(beta_x: np.ndarray, beta_prime: np.ndarray, lat: SymbolLattice, K: int, tau: float) -> np.ndarray:
    den = 1.0 + tau * beta_prime
    if np.min(den) <= 0:
        raise ValueError(f"1 + tau * beta_x vanishes on the grid at tau={tau:.3f}")
    sym = SymbolGrid(np.outer(beta_x / den, 1j * lat.xi), lat, 1.0)
    return quantize_bw(sym, K).matrix


def flow_transport(u: FourierField, alpha: float) -> FlowResult:
    """Flow of ``Op(i beta2 / (1 + tau beta2_x) xi)`` over ``tau in [0, 1]``."""
    lat = _lattice(u.K)
    beta = sym_beta2(u, alpha, lat)
    b = beta.values[:, 0].real
    bp = dx(beta).values[:, 0].real
    if np.min(1.0 + bp) <= 0 or np.min(1.0 - bp) <= 0:
        raise ValueError("beta2 is too large: 1 + tau * beta2_x is not positive on the grid")
    n = 2 * u.K + 1
    if not np.any(b):
        eye = np.eye(n, dtype=complex)
        return FlowResult(eye, eye.copy(), [{"steps": 0, "change": 0.0}])
    cache: dict[float, np.ndarray] = {}

    def gen(tau):
        key = round(tau, 15)
        if key not in cache:
            cache[key] = transport_generator(b, bp, lat, u.K, tau)
        return cache[key]

    return integrate_flow(gen, n)


def verify_transport_identity(u: FourierField, alpha: float) -> float:
    """Max over the grid of ``2 beta2(-i Omega U, U) + underlineV - <V>``.

    ``beta2(W, U)`` is the symmetrized bilinear form, so
    ``2 beta2(-i Omega U, U)`` is ``B(-i|D|^a u, u) + B(u, -i|D|^a u)`` with
    ``B`` the sesquilinear sum over ``|j1| != |j2|``.
    """
    K = u.K
    lat = _lattice(K)
    w = -1j * _dispersion(K, alpha) * u.coeffs
    c = beta2_coefficients(w, u.coeffs, alpha, K) + beta2_coefficients(u.coeffs, w, alpha, K)
    n = np.arange(-2 * K, 2 * K + 1)
    hom = np.real(np.exp(1j * np.outer(lat.x, n)) @ c)
    val = hom + sym_underlineV(u, lat).values[:, 0].real - sym_resV(u, lat).values[:, 0].real
    return float(np.max(np.abs(val)))


# ---------------------------------------------------------------------------
# weak normal form on the smoothing part


@dataclass(frozen=True, eq=False)
class Q2Table:
    table: res.CubicTable
    alpha: float
    min_divisor_class1: float
    min_scaled_divisor_class2: float


def build_Q2(R2: res.CubicTable, alpha: float, audit: dict | None = None) -> Q2Table:
    """Divide by ``i omega`` on the non-resonant part of classes one and two.

    Divisors are compared against the audit minima for the same window; a
    division on a resonant tuple raises.
    """
    if not R2.symmetric():
        raise ValueError("R2 coefficients are not symmetric")
    J = R2.J
    audit = audit or res.audit_lower_bounds(max(J, 3), alpha)
    min1 = audit["min_bounds"]["class1_abs_omega"]
    min2s = audit["min_bounds"]["class2_scaled"]
    j1, j2, j3 = R2.indices()
    k = j1 - j2 + j3
    pw = lambda v: np.abs(v).astype(float) ** alpha
    om = pw(j1) - pw(j2) + pw(j3) - pw(k)
    cnt = res._outside_count(j1, j2, j3, k)
    paired = res._paired(j1, j2, j3, k)
    divide = ((cnt == 1) | ((cnt == 2) & ~paired)) & (np.abs(k) <= J) & (R2.C != 0)
    if np.any(np.abs(om[divide]) <= res.RESONANCE_TOL):
        bad = np.argwhere(divide & (np.abs(om) <= res.RESONANCE_TOL))[0] - J
        raise ZeroDivisionError(f"resonant divisor at tuple {tuple(bad)}")
    c1 = divide & (cnt == 1)
    if np.any(np.abs(om[c1]) < min1 * (1 - 1e-12)):
        raise ArithmeticError("class-one divisor below the audited minimum")
    c2 = divide & (cnt == 2)
    mx = np.maximum.reduce([np.maximum(1, np.abs(v)) for v in (j1, j2, j3, k)]).astype(float) ** (1 - alpha)
    if np.any(np.abs(om[c2]) * mx[c2] < min2s * (1 - 1e-12)):
        raise ArithmeticError("class-two divisor below the audited minimum")
    Q = np.zeros_like(R2.C)
    Q[divide] = R2.C[divide] / (1j * om[divide])
    return Q2Table(res.CubicTable(Q, J), alpha, min1, min2s)


def renormalized_cubic(coeffs: np.ndarray) -> np.ndarray:
    """Galerkin-truncated ``|v|^2 v_x - mass v_x + i momentum v`` on ``-K..K``,
    evaluated pseudospectrally on a padded grid."""
    K = (len(coeffs) - 1) // 2
    M = 4 * K + 4
    k = np.arange(-K, K + 1)
    hat = np.zeros(M, dtype=complex)
    hat[k % M] = coeffs
    hx = np.zeros(M, dtype=complex)
    hx[k % M] = 1j * k * coeffs
    v = np.fft.ifft(hat) * M
    vx = np.fft.ifft(hx) * M
    prod = np.fft.fft(np.abs(v) ** 2 * vx) / M
    out = prod[k % M]
    mass = float(np.sum(np.abs(coeffs) ** 2))
    mom = -float(np.sum(k * np.abs(coeffs) ** 2))
    return out - mass * 1j * k * coeffs + 1j * mom * coeffs


def _cubic_eval(table: res.CubicTable, coeffs: np.ndarray) -> np.ndarray:
    return table.evaluate(coeffs, K_out=(len(coeffs) - 1) // 2)


def _cubic_jacobians(table: res.CubicTable, u: np.ndarray):
    """Wirtinger derivatives ``dQ/du`` and ``dQ/d(conj u)`` as dense matrices."""
    J = table.J
    n = 2 * J + 1
    C3 = 3 * table.C
    j1, j2, j3 = table.indices()
    k = j1 - j2 + j3
    A = np.zeros((n, n), dtype=complex)
    B = np.zeros((n, n), dtype=complex)
    ok = np.abs(k) <= J
    ub = np.conj(u)
    # derivative in u_{j1} and u_{j3}
    d1 = C3 * ub[None, :, None] * u[None, None, :]
    d3 = C3 * u[:, None, None] * ub[None, :, None]
    d2 = C3 * u[:, None, None] * u[None, None, :]
    np.add.at(A, (k[ok] + J, j1[ok] + J), d1[ok])
    np.add.at(A, (k[ok] + J, j3[ok] + J), d3[ok])
    np.add.at(B, (k[ok] + J, j2[ok] + J), d2[ok])
    return A, B


def invert_near_identity(Q: res.CubicTable, z: np.ndarray, tol: float = 1e-15, max_iter: int = 12) -> tuple[np.ndarray, int]:
    """Solve ``z = u + Q(u)`` by Newton iteration from ``u = z``."""
    u = z.copy()
    n = len(z)
    for it in range(1, max_iter + 1):
        F = u + _cubic_eval(Q, u) - z
        if np.max(np.abs(F)) <= tol * max(1.0, np.max(np.abs(z))):
            return u, it - 1
        A, B = _cubic_jacobians(Q, u)
        big = np.block([[np.eye(n) + A, B], [np.conj(B), np.eye(n) + np.conj(A)]])
        d = np.linalg.solve(big, -np.concatenate([F, np.conj(F)]))
        u = u + d[:n]
    F = u + _cubic_eval(Q, u) - z
    if np.max(np.abs(F)) > 1e-12 * max(1.0, np.max(np.abs(z))):
        raise RuntimeError("Newton inversion did not converge")
    return u, max_iter


def transformed_field(Q: res.CubicTable, z: np.ndarray, alpha: float) -> np.ndarray:
    """``dF(u)[X(u)]`` at ``u = F^{-1}(z)`` with ``F(u) = u + Q(u)``, where
    ``X`` is the Galerkin-truncated renormalized vector field."""
    u, _ = invert_near_identity(Q, z)
    K = (len(z) - 1) // 2
    X = -1j * _dispersion(K, alpha) * u + renormalized_cubic(u)
    A, B = _cubic_jacobians(Q, u)
    return X + A @ X + B @ np.conj(X)


@dataclass
class StrongLambdaReport:
    K: int
    alpha: float
    block0_residual: float
    block1_residual: float
    block2_residual: float
    extraction_error: float
    newton_iterations: int
    passed: bool
    tolerance: float


def verify_strong_lambda(alpha: float, K: int = 8, seed: int = 0, n_samples: int = 3,
                         tolerance: float = 1e-8, amplitude: float = 0.05) -> StrongLambdaReport:
    """Cubic part of the field after the weak normal-form step.

    Work on the window ``|k| <= K < 10`` where every Bony-Weyl operator with
    nonzero spatial frequency vanishes (``chi(n, xi) = 0`` for ``|n| >= 1``
    and ``<xi> <= 10``), so the block-diagonalization and paracomposition
    steps are the identity and the whole cubic field is smoothing.  The
    cubic part is extracted by ``lambda``-scaling plus Richardson, then the
    classes are separated by scaling the normal modes by ``mu``.
    """
    if K >= 10:
        raise ValueError("the window must satisfy K < 10")
    X3 = res.x3_table(K)
    Q = build_Q2(X3, alpha).table
    rng = np.random.default_rng(seed)
    kk = np.arange(-K, K + 1)
    inside = np.abs(kk) == 1
    mus = np.array([0.0, 1.0, 2.0, 3.0])
    vander = np.vander(mus, 4, increasing=True)
    r0 = r1 = r2 = ext = 0.0
    its = 0
    linear = -1j * _dispersion(K, alpha)
    for _ in range(n_samples):
        z = amplitude * (rng.standard_normal(2 * K + 1) + 1j * rng.standard_normal(2 * K + 1)) / (1 + kk ** 2)
        zt, zp = np.where(inside, z, 0), np.where(inside, 0, z)
        cubic = []
        for mu in mus:
            zz = zt + mu * zp

            def sample(lam, zz=zz):
                return transformed_field(Q, lam * zz, alpha) - linear * lam * zz

            f = [sample(lam) / lam ** 3 for lam in LAMBDAS]
            g = [(4 * f[i + 1] - f[i]) / 3 for i in range(2)]
            best = (16 * g[1] - g[0]) / 15
            ext = max(ext, float(np.max(np.abs(best - g[1]))))
            cubic.append(best)
            its = max(its, invert_near_identity(Q, LAMBDAS[0] * zz)[1])
        coef = np.linalg.solve(vander, np.array(cubic))  # rows: mu^0 .. mu^3
        closed = np.zeros(2 * K + 1, dtype=complex)
        closed[K + 1] = -1j * abs(z[K + 1]) ** 2 * z[K + 1]
        closed[K - 1] = 1j * abs(z[K - 1]) ** 2 * z[K - 1]
        r0 = max(r0, float(np.max(np.abs(np.where(inside, coef[0], 0) - closed))))
        r1 = max(r1, float(np.max(np.abs(np.where(inside, coef[1], coef[0])))))
        r2 = max(r2, float(np.max(np.abs(np.where(inside, coef[2], coef[1])))))
    budget = max(tolerance, 100 * ext)
    passed = max(r0, r1, r2) <= budget
    return StrongLambdaReport(K, alpha, r0, r1, r2, ext, its, passed, budget)
