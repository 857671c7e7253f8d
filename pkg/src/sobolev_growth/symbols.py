"""Sampled symbols ``a(x, xi)`` and the explicit symbols of the construction.

Symbols live on a tensor grid: ``x_m = 2 pi m / M`` and ``xi`` on the
half-integer lattice ``{-Xi, -Xi + 1/2, ..., Xi}``.  Half-integers are
needed because Weyl quantization evaluates at the midpoint ``(k + j) / 2``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import expit

from .fourier import FourierField, bracket, mass

DELTA0 = 0.1


# ---------------------------------------------------------------------------
# lattice and sampled symbols


@dataclass(frozen=True)
class SymbolLattice:
    M: int
    Xi: int

    @classmethod
    def for_truncation(cls, K: int, Xi: int | None = None) -> "SymbolLattice":
        """Smallest admissible lattice for fields truncated at ``K``."""
        return cls(M=4 * K + 4, Xi=K if Xi is None else Xi)

    @property
    def x(self) -> np.ndarray:
        return 2 * np.pi * np.arange(self.M) / self.M

    @property
    def xi(self) -> np.ndarray:
        return np.arange(-2 * self.Xi, 2 * self.Xi + 1) / 2.0

    @property
    def n_xi(self) -> int:
        return 4 * self.Xi + 1

    @property
    def freqs(self) -> np.ndarray:
        """Integer spatial frequency attached to each FFT bin."""
        return np.fft.fftfreq(self.M, d=1.0 / self.M).round().astype(int)

    def xi_index(self, xi) -> np.ndarray:
        """Lattice position of half-integer frequencies (vectorized)."""
        idx = np.rint(2 * np.asarray(xi)).astype(int) + 2 * self.Xi
        if np.any(idx < 0) or np.any(idx >= self.n_xi):
            raise ValueError("frequency outside the symbol lattice")
        return idx

    def admits(self, K: int) -> bool:
        return self.M >= 4 * K + 4 and self.Xi >= K


@dataclass(frozen=True, eq=False)
class SymbolGrid:
    """Complex samples ``values[m, h] = a(x_m, xi_h)`` with a declared order."""

    values: np.ndarray
    lattice: SymbolLattice
    order: float = 0.0

    def __post_init__(self):
        v = np.array(self.values, dtype=complex)
        if v.shape != (self.lattice.M, self.lattice.n_xi):
            raise ValueError(f"values shape {v.shape} does not match lattice {self.lattice}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    # constructors -------------------------------------------------------
    @classmethod
    def from_function(cls, lattice: SymbolLattice, f: Callable, order: float = 0.0) -> "SymbolGrid":
        x = lattice.x[:, None]
        xi = lattice.xi[None, :]
        vals = np.broadcast_to(f(x, xi), (lattice.M, lattice.n_xi))
        return cls(vals, lattice, order)

    @classmethod
    def from_x_function(cls, lattice: SymbolLattice, values_x: np.ndarray, order: float = 0.0) -> "SymbolGrid":
        vals = np.broadcast_to(np.asarray(values_x)[:, None], (lattice.M, lattice.n_xi))
        return cls(vals, lattice, order)

    @classmethod
    def from_multiplier(cls, lattice: SymbolLattice, values_xi: np.ndarray, order: float = 0.0) -> "SymbolGrid":
        vals = np.broadcast_to(np.asarray(values_xi)[None, :], (lattice.M, lattice.n_xi))
        return cls(vals, lattice, order)

    @classmethod
    def from_hat(cls, lattice: SymbolLattice, hat: np.ndarray, order: float = 0.0) -> "SymbolGrid":
        """Inverse of :meth:`hat`: ``hat[m_bin, h]`` are spatial Fourier coefficients."""
        return cls(np.fft.ifft(hat, axis=0) * lattice.M, lattice, order)

    # views ------------------------------------------------------------------
    def hat(self) -> np.ndarray:
        """Spatial Fourier coefficients ``a_hat(n, xi)`` in FFT bin order."""
        return np.fft.fft(self.values, axis=0) / self.lattice.M

    def hat_at(self, n, xi) -> np.ndarray:
        """``a_hat(n, xi)`` for integer frequencies ``n`` and half-integers ``xi``."""
        h = self.hat()
        return h[np.asarray(n) % self.lattice.M, self.lattice.xi_index(xi)]

    def with_order(self, order: float) -> "SymbolGrid":
        return SymbolGrid(self.values, self.lattice, order)

    def conj_reflect(self) -> "SymbolGrid":
        """``conj(a(x, -xi))``, the symbol of the conjugated operator."""
        return SymbolGrid(np.conj(self.values[:, ::-1]), self.lattice, self.order)

    def reflect(self) -> "SymbolGrid":
        """``a(x, -xi)``."""
        return SymbolGrid(self.values[:, ::-1], self.lattice, self.order)

    def conj(self) -> "SymbolGrid":
        return SymbolGrid(np.conj(self.values), self.lattice, self.order)

    def real_defect(self) -> float:
        scale = max(float(np.max(np.abs(self.values))), 1e-300)
        return float(np.max(np.abs(self.values.imag))) / scale

    def mean_defect(self) -> float:
        """Largest spatial mean over xi rows relative to the maximum value."""
        scale = max(float(np.max(np.abs(self.values))), 1e-300)
        return float(np.max(np.abs(self.values.mean(axis=0)))) / scale

    # arithmetic -----------------------------------------------------------
    def _coerce(self, other):
        if isinstance(other, SymbolGrid):
            if other.lattice != self.lattice:
                raise ValueError("symbols live on different lattices")
            return other.values, other.order
        return other, 0.0

    def __add__(self, other):
        v, o = self._coerce(other)
        return SymbolGrid(self.values + v, self.lattice, max(self.order, o))

    __radd__ = __add__

    def __sub__(self, other):
        v, o = self._coerce(other)
        return SymbolGrid(self.values - v, self.lattice, max(self.order, o))

    def __neg__(self):
        return SymbolGrid(-self.values, self.lattice, self.order)

    def __mul__(self, other):
        v, o = self._coerce(other)
        return SymbolGrid(self.values * v, self.lattice, self.order + o)

    __rmul__ = __mul__

    def to_csv(self, path) -> None:
        """Dump as ``x_index, xi_times_2, re, im`` rows."""
        xi2 = np.rint(2 * self.lattice.xi).astype(int)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x_index", "xi_times_2", "re", "im"])
            for m in range(self.lattice.M):
                for h, k2 in enumerate(xi2):
                    v = self.values[m, h]
                    w.writerow([m, int(k2), f"{v.real:.17g}", f"{v.imag:.17g}"])


# ---------------------------------------------------------------------------
# derivatives on the lattice


def dx(a: SymbolGrid, times: int = 1) -> SymbolGrid:
    """Spectral ``d/dx``; the Nyquist bin is dropped."""
    if times == 0:
        return a
    n = a.lattice.freqs.astype(float)
    if a.lattice.M % 2 == 0:
        n[a.lattice.M // 2] = 0.0
    hat = a.hat() * (1j * n[:, None]) ** times
    return SymbolGrid.from_hat(a.lattice, hat, a.order)


def dxi(a: SymbolGrid, times: int = 1) -> SymbolGrid:
    """Centered differences of step 1/2 in xi (second order at the edges)."""
    v = a.values
    for _ in range(times):
        v = np.gradient(v, 0.5, axis=1, edge_order=2)
    return SymbolGrid(v, a.lattice, a.order - times)


def multiplier_derivative(values: np.ndarray, times: int) -> np.ndarray:
    v = np.asarray(values, dtype=complex)
    for _ in range(times):
        v = np.gradient(v, 0.5, edge_order=2)
    return v


# ---------------------------------------------------------------------------
# smooth steps and cutoffs


def eta(y):
    """Smooth step: 0 for y <= 1, 1 for y >= 2, exponential blend between."""
    y = np.asarray(y, dtype=float)
    out = np.where(y >= 2.0, 1.0, 0.0)
    inside = (y > 1.0) & (y < 2.0)
    if np.any(inside):
        yi = y[inside]
        # e^{-1/(y-1)} / (e^{-1/(y-1)} + e^{-1/(2-y)}) written as a logistic
        out = out.astype(float)
        out[inside] = expit(1.0 / (2.0 - yi) - 1.0 / (yi - 1.0))
    return out if out.shape else float(out)


def eta_prime(y):
    y = np.asarray(y, dtype=float)
    out = np.zeros_like(y)
    inside = (y > 1.0) & (y < 2.0)
    if np.any(inside):
        yi = y[inside]
        h = 1.0 / (2.0 - yi) - 1.0 / (yi - 1.0)
        dh = 1.0 / (2.0 - yi) ** 2 + 1.0 / (yi - 1.0) ** 2
        out[inside] = expit(h) * expit(-h) * dh
    return out if out.shape else float(out)


def eta_R(xi, R: float):
    if R < 1:
        raise ValueError("R must be at least 1")
    return eta(np.asarray(xi, dtype=float) / R)


def eta_blend(t):
    """The same step rescaled to switch on ``[1/2, 1]``."""
    return eta(2.0 * np.asarray(t, dtype=float))


@dataclass(frozen=True)
class CutoffFamily:
    delta0: float = DELTA0

    def __post_init__(self):
        if not 0 < self.delta0 <= 0.1:
            raise ValueError("delta0 must lie in (0, 1/10]")

    def chi(self, xi_prime, xi):
        t = np.abs(np.asarray(xi_prime, dtype=float)) / (self.delta0 * bracket(xi))
        return 1.0 - eta_blend(t)

    def chi_p(self, xi_primes, xi):
        """Multi-frequency cutoff; depends on the max norm of ``xi_primes``."""
        m = np.max(np.abs(np.asarray(xi_primes, dtype=float)), axis=-1)
        return self.chi(m, xi)


DEFAULT_CUTOFF = CutoffFamily()


def chi(xi_prime, xi):
    return DEFAULT_CUTOFF.chi(xi_prime, xi)


def chi_p(xi_primes, xi):
    return DEFAULT_CUTOFF.chi_p(xi_primes, xi)


# ---------------------------------------------------------------------------
# quadratic symbols built from a field


def _grid_values(u: FourierField, lattice: SymbolLattice):
    if not lattice.admits(u.K):
        raise ValueError(f"lattice {lattice} too small for truncation K={u.K}")
    ux = FourierField(1j * u.modes * u.coeffs, u.K)
    return u.on_grid(lattice.M), ux.on_grid(lattice.M)


def sym_underlineV(u: FourierField, lattice: SymbolLattice) -> SymbolGrid:
    """``|u|^2 - mass(u)``, a zero-average real function."""
    val, _ = _grid_values(u, lattice)
    return SymbolGrid.from_x_function(lattice, (np.abs(val) ** 2 - mass(u)).real + 0j)


def sym_underlined(u: FourierField, lattice: SymbolLattice) -> SymbolGrid:
    """Zero-average part of ``Im(u_x conj(u))``."""
    val, valx = _grid_values(u, lattice)
    d = np.imag(valx * np.conj(val))
    return SymbolGrid.from_x_function(lattice, d - d.mean() + 0j)


def sym_b(u: FourierField, lattice: SymbolLattice) -> SymbolGrid:
    """``u u_x``, the off-diagonal coefficient in the paralinearization."""
    val, valx = _grid_values(u, lattice)
    return SymbolGrid.from_x_function(lattice, val * valx)


def sym_resV(z: FourierField, lattice: SymbolLattice) -> SymbolGrid:
    """``2 Re sum_{n >= 1} z_n conj(z_{-n}) e^{2inx}``."""
    x = lattice.x
    n = np.arange(1, z.K + 1)
    c = z.coeffs[z.K + n] * np.conj(z.coeffs[z.K - n])
    vals = 2.0 * np.real(np.exp(2j * np.outer(x, n)) @ c)
    return SymbolGrid.from_x_function(lattice, vals + 0j)


def beta2_coefficients(u_first: np.ndarray, u_second: np.ndarray, alpha: float, K: int) -> np.ndarray:
    """Fourier coefficients (index ``n + 2K``) of the bilinear form
    ``sum_{|j1| != |j2|} a_{j1} conj(b_{j2}) e^{i(j1 - j2)x} / (i(|j1|^a - |j2|^a))``."""
    j = np.arange(-K, K + 1)
    pw = np.abs(j).astype(float) ** alpha
    den = 1j * (pw[:, None] - pw[None, :])
    mask = np.abs(j)[:, None] != np.abs(j)[None, :]
    prod = np.outer(u_first, np.conj(u_second))
    terms = np.where(mask, prod / np.where(mask, den, 1.0), 0.0)
    out = np.zeros(4 * K + 1, dtype=complex)
    diff = (j[:, None] - j[None, :]) + 2 * K
    np.add.at(out, diff.ravel(), terms.ravel())
    return out


def _x_function_from_coeffs(coeffs: np.ndarray, lattice: SymbolLattice) -> np.ndarray:
    Kc = (len(coeffs) - 1) // 2
    n = np.arange(-Kc, Kc + 1)
    hat = np.zeros(lattice.M, dtype=complex)
    np.add.at(hat, n % lattice.M, coeffs)
    return np.fft.ifft(hat) * lattice.M


def sym_beta2(u: FourierField, alpha: float, lattice: SymbolLattice) -> SymbolGrid:
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    c = beta2_coefficients(u.coeffs, u.coeffs, alpha, u.K)
    return SymbolGrid.from_x_function(lattice, _x_function_from_coeffs(c, lattice))


# ---------------------------------------------------------------------------
# out-diagonal homological equation


@dataclass(frozen=True, eq=False)
class PairMomentSymbol:
    """A 2-homogeneous symbol ``sum g_{j1 j2}(xi) u_{j1} u_{j2} e^{i(j1+j2)x}``
    whose coefficients have the form ``sum_d w^d G_d(j1 + j2, xi)`` with the
    pair weight ``w = |j1|^alpha + |j2|^alpha``.

    ``G[d, n + 2K, h]`` stores ``G_d``; ``S[d, n + 2K]`` stores the pair sums
    ``sum_{j1 + j2 = n} b_{j1 j2} u_{j1} u_{j2} w^d`` with the seed
    coefficient ``b_{j1 j2} = i (j1 + j2) / 2`` of ``u u_x`` folded in.
    """

    G: np.ndarray
    S: np.ndarray
    lattice: SymbolLattice
    order: float

    def hat_table(self) -> np.ndarray:
        """``a_hat(n, xi)`` for ``n = -2K..2K`` (rows) on the xi lattice."""
        d = self.G.shape[0]
        return np.einsum("dn,dnh->nh", self.S[:d], self.G)

    def grid(self) -> SymbolGrid:
        table = self.hat_table()
        K2 = (table.shape[0] - 1) // 2
        n = np.arange(-K2, K2 + 1)
        hat = np.zeros((self.lattice.M, self.lattice.n_xi), dtype=complex)
        np.add.at(hat, n % self.lattice.M, table)
        return SymbolGrid.from_hat(self.lattice, hat, self.order)


def pair_moments(u: FourierField, alpha: float, degree: int) -> np.ndarray:
    """``S[d, n + 2K] = sum_{j1 + j2 = n} (i n / 2) u_{j1} u_{j2} (|j1|^a + |j2|^a)^d``."""
    K = u.K
    pw = np.abs(u.modes).astype(float) ** alpha
    n = np.arange(-2 * K, 2 * K + 1)
    powers = [u.coeffs * pw ** a for a in range(degree + 1)]
    S = np.zeros((degree + 1, 4 * K + 1), dtype=complex)
    for d in range(degree + 1):
        acc = np.zeros(4 * K + 1, dtype=complex)
        for a in range(d + 1):
            acc += math.comb(d, a) * np.convolve(powers[a], powers[d - a])
        S[d] = 0.5j * n * acc
    return S


def _abs_power(xi: np.ndarray, alpha: float) -> np.ndarray:
    return np.abs(xi) ** alpha


def commutator_with_dispersion(G: np.ndarray, n: np.ndarray, disp_derivs: list, rho: int) -> np.ndarray:
    """``g # m + m # g - 2 g m`` for ``m = |xi|^alpha`` acting on coefficient rows.

    Only even orders survive the symmetric sum; each contributes
    ``2^{1-k}/k! n^k G (d/dxi)^k m``.
    """
    out = np.zeros_like(G)
    for k in range(2, rho + 1, 2):
        out += (2.0 ** (1 - k) / math.factorial(k)) * (n[None, :, None] ** k) * G * disp_derivs[k][None, None, :]
    return out


@dataclass(frozen=True, eq=False)
class G2Expansion:
    terms: list  # list of PairMomentSymbol, g^(1) ... g^(p)
    total: PairMomentSymbol
    residual: PairMomentSymbol
    p: int


def g2_expansion(u: FourierField, alpha: float, rho: float, lattice: SymbolLattice) -> G2Expansion:
    """Iterative solution of the out-diagonal homological equation."""
    if rho <= 0 or not 0 < alpha < 1:
        raise ValueError("need rho > 0 and alpha in (0, 1)")
    if not lattice.admits(u.K):
        raise ValueError("lattice too small for the field")
    p = max(1, math.ceil(rho / alpha - 1e-12))
    rho_c = math.ceil(rho)
    xi = lattice.xi
    m = _abs_power(xi, alpha)
    inv2m = np.where(xi == 0, 0.0, 1.0 / np.where(xi == 0, 1.0, 2.0 * m))  # guard xi = 0
    derivs = [multiplier_derivative(m, k) for k in range(rho_c + 1)]
    K = u.K
    n = np.arange(-2 * K, 2 * K + 1).astype(float)
    S = pair_moments(u, alpha, p)
    nn, nh = 4 * K + 1, lattice.n_xi

    G = np.zeros((1, nn, nh), dtype=complex)
    G[0] = -(1.0 / 1j) * inv2m[None, :]  # -b / (2 i |xi|^alpha), b carried by S_0
    terms = [PairMomentSymbol(G, S, lattice, -alpha)]
    for ell in range(2, p + 1):
        prev = terms[-1].G
        r = commutator_with_dispersion(prev, n, derivs, rho_c)
        new = np.zeros((prev.shape[0] + 1, nn, nh), dtype=complex)
        new[: prev.shape[0]] -= r
        new[1:] += prev  # f[g] raises the pair-weight degree by one
        new *= inv2m[None, None, :]
        terms.append(PairMomentSymbol(new, S, lattice, -ell * alpha))
    last = terms[-1].G
    res = np.zeros((last.shape[0] + 1, nn, nh), dtype=complex)
    res[: last.shape[0]] += 1j * commutator_with_dispersion(last, n, derivs, rho_c)
    res[1:] -= 1j * last
    dmax = p
    total = np.zeros((dmax, nn, nh), dtype=complex)
    for t in terms:
        total[: t.G.shape[0]] += t.G
    return G2Expansion(
        terms=terms,
        total=PairMomentSymbol(total, S, lattice, -alpha),
        residual=PairMomentSymbol(res, S, lattice, -p * alpha),
        p=p,
    )


def sym_g2(u: FourierField, alpha: float, rho: float, lattice: SymbolLattice):
    """Return ``(g2, r2)`` as sampled symbols of orders ``-alpha`` and ``-p alpha``."""
    exp = g2_expansion(u, alpha, rho, lattice)
    return exp.total.grid(), exp.residual.grid()


def decay_slope(residual: SymbolGrid, xi_min: float, xi_max: float) -> float:
    """Least-squares log-log slope of ``max_x |r(x, xi)|`` over ``xi_min <= xi <= xi_max``."""
    xi = residual.lattice.xi
    sel = (xi >= xi_min) & (xi <= xi_max)
    amp = np.max(np.abs(residual.values[:, sel]), axis=0)
    ok = amp > 0
    if ok.sum() < 2:
        return float("-inf")
    return float(np.polyfit(np.log(xi[sel][ok]), np.log(amp[ok]), 1)[0])


# ---------------------------------------------------------------------------
# Mourre symbols


def constants_J1_I1(z1: complex, zm1: complex) -> tuple[float, float]:
    a, b = abs(z1), abs(zm1)
    J1 = 0.5 * (a * a + b * b)
    I1 = 2 * a * b * (2 * a * b - J1)
    return J1, I1


def profile_t(z1: complex, zm1: complex, x: np.ndarray) -> np.ndarray:
    """``-Im(z1 conj(zm1) e^{2ix})``."""
    return -np.imag(z1 * np.conj(zm1) * np.exp(2j * x))


def profile_v(z1: complex, zm1: complex, x: np.ndarray) -> np.ndarray:
    """``2 Re(z1 conj(zm1) e^{2ix})``."""
    return 2.0 * np.real(z1 * np.conj(zm1) * np.exp(2j * x))


def sym_fv(z1: complex, zm1: complex, lattice: SymbolLattice) -> SymbolGrid:
    return SymbolGrid.from_x_function(lattice, profile_v(z1, zm1, lattice.x) + 0j)


def sym_ft(z1: complex, zm1: complex, lattice: SymbolLattice) -> SymbolGrid:
    return SymbolGrid.from_x_function(lattice, profile_t(z1, zm1, lattice.x) + 0j)


def sym_fa(s: float, R: float, z1: complex, zm1: complex, lattice: SymbolLattice) -> SymbolGrid:
    """Escape symbol ``t(x) |xi|^{2s} eta_R(xi)^2``."""
    if R < 1 or s <= 1:
        raise ValueError("need R >= 1 and s > 1")
    weight = np.abs(lattice.xi) ** (2 * s) * eta_R(lattice.xi, R) ** 2
    t = profile_t(z1, zm1, lattice.x)
    return SymbolGrid(np.outer(t, weight) + 0j, lattice, 2 * s)


def sym_transport(z1: complex, zm1: complex, lattice: SymbolLattice) -> SymbolGrid:
    """``(J1 + v(x)) xi``, the leading transport symbol of the effective equation."""
    J1, _ = constants_J1_I1(z1, zm1)
    v = profile_v(z1, zm1, lattice.x)
    return SymbolGrid(np.outer(J1 + v, lattice.xi) + 0j, lattice, 1.0)


def sym_weight(s: float, R: float, lattice: SymbolLattice) -> SymbolGrid:
    """``|xi|^{2s} eta_R(xi)^2``."""
    w = np.abs(lattice.xi) ** (2 * s) * eta_R(lattice.xi, R) ** 2
    return SymbolGrid.from_multiplier(lattice, w + 0j, 2 * s)
