"""Weyl and Bony-Weyl quantization as matrices on the truncated Fourier basis.

The matrix of ``Op(a)`` has entries ``A[k, j] = a_hat(k - j, (k + j) / 2)``;
the Bony-Weyl variant multiplies by ``chi(k - j, (k + j) / 2)`` so only
spatial frequencies small compared with the dual frequency survive.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.sparse.linalg import eigsh

from .fourier import bracket
from .symbols import DEFAULT_CUTOFF, CutoffFamily, SymbolGrid, dx, dxi

DENSE_EIGEN_LIMIT = 1025


@dataclass(frozen=True, eq=False)
class ParaOperator:
    """Dense matrix on modes ``-K..K`` with a declared order and provenance tag."""

    matrix: np.ndarray
    K: int
    order: float = 0.0
    provenance: str = "quantized symbol"

    def __post_init__(self):
        n = 2 * self.K + 1
        if self.matrix.shape != (n, n):
            raise ValueError(f"matrix shape {self.matrix.shape} does not match K={self.K}")

    @property
    def modes(self) -> np.ndarray:
        return np.arange(-self.K, self.K + 1)

    def apply(self, coeffs: np.ndarray) -> np.ndarray:
        return self.matrix @ coeffs

    def restrict(self, K: int) -> "ParaOperator":
        if K > self.K:
            raise ValueError("cannot restrict to a larger truncation")
        c = self.K - K
        sl = slice(c, c + 2 * K + 1)
        return ParaOperator(self.matrix[sl, sl], K, self.order, self.provenance)

    def __matmul__(self, other: "ParaOperator") -> "ParaOperator":
        return ParaOperator(self.matrix @ other.matrix, self.K, self.order + other.order, "composition")

    def __add__(self, other: "ParaOperator") -> "ParaOperator":
        return ParaOperator(self.matrix + other.matrix, self.K, max(self.order, other.order), self.provenance)

    def __sub__(self, other: "ParaOperator") -> "ParaOperator":
        return ParaOperator(self.matrix - other.matrix, self.K, max(self.order, other.order), self.provenance)

    def __rmul__(self, scalar: complex) -> "ParaOperator":
        return ParaOperator(scalar * self.matrix, self.K, self.order, self.provenance)

    def to_csv(self, path, tol: float = 0.0) -> None:
        """Dump nonzero entries as ``k, j, re, im`` rows."""
        rows, cols = np.nonzero(np.abs(self.matrix) > tol)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["k", "j", "re", "im"])
            for r, c in zip(rows, cols):
                v = self.matrix[r, c]
                w.writerow([r - self.K, c - self.K, f"{v.real:.17g}", f"{v.imag:.17g}"])


# ---------------------------------------------------------------------------
# quantization


def _index_grids(K: int):
    k = np.arange(-K, K + 1)
    return k[:, None], k[None, :]


def _check_lattice(a: SymbolGrid, K: int):
    lat = a.lattice
    if lat.Xi < K:
        raise ValueError(f"symbol lattice Xi={lat.Xi} is smaller than the truncation K={K}")
    if lat.M <= 4 * K:
        raise ValueError(f"x-grid with M={lat.M} aliases spatial frequencies up to 2K={2 * K}")


def weyl_entries(a: SymbolGrid, K: int) -> np.ndarray:
    """``a_hat(k - j, (k + j)/2)`` for ``k, j`` in ``-K..K``."""
    _check_lattice(a, K)
    kk, jj = _index_grids(K)
    hat = a.hat()
    lat = a.lattice
    return hat[(kk - jj) % lat.M, (kk + jj) + 2 * lat.Xi]


def bw_cutoff_matrix(K: int, cutoff: CutoffFamily = DEFAULT_CUTOFF) -> np.ndarray:
    kk, jj = _index_grids(K)
    return cutoff.chi(kk - jj, 0.5 * (kk + jj))


def quantize_weyl(a: SymbolGrid, K: int | None = None) -> ParaOperator:
    K = a.lattice.Xi if K is None else K
    return ParaOperator(weyl_entries(a, K), K, a.order, "quantized symbol")


def quantize_bw(a: SymbolGrid, K: int | None = None, cutoff: CutoffFamily = DEFAULT_CUTOFF) -> ParaOperator:
    K = a.lattice.Xi if K is None else K
    return ParaOperator(bw_cutoff_matrix(K, cutoff) * weyl_entries(a, K), K, a.order, "quantized symbol")


def quantize_multiplier(values, K: int, order: float = 0.0) -> ParaOperator:
    """Diagonal operator ``e^{ikx} -> m(k) e^{ikx}`` from a callable or array."""
    k = np.arange(-K, K + 1)
    diag = values(k) if callable(values) else np.asarray(values)
    return ParaOperator(np.diag(np.asarray(diag, dtype=complex)), K, order, "quantized symbol")


def band_ok(op: ParaOperator, delta0: float = DEFAULT_CUTOFF.delta0) -> bool:
    """True when every entry outside the frequency band is exactly zero."""
    kk, jj = _index_grids(op.K)
    lo = (1 - delta0) / (1 + delta0) * np.abs(kk)
    hi = (1 + delta0) / (1 - delta0) * np.abs(kk)
    inside = (np.abs(jj) >= lo - 1e-12) & (np.abs(jj) <= hi + 1e-12)
    return bool(np.all(op.matrix[~inside] == 0))


# pair operators acting on U = (u, ubar) -----------------------------------


def pair_diag(a: SymbolGrid, K: int, cutoff: CutoffFamily = DEFAULT_CUTOFF) -> np.ndarray:
    """``diag(Op(a), Op(conj(a(x,-xi))))`` on the ``(u, ubar)`` coefficient pair."""
    top = quantize_bw(a, K, cutoff).matrix
    bot = quantize_bw(a.conj_reflect(), K, cutoff).matrix
    z = np.zeros_like(top)
    return np.block([[top, z], [z, bot]])


def pair_offdiag(b: SymbolGrid, K: int, cutoff: CutoffFamily = DEFAULT_CUTOFF) -> np.ndarray:
    """``[[0, Op(b)], [Op(conj(b(x,-xi))), 0]]`` on the ``(u, ubar)`` pair."""
    top = quantize_bw(b, K, cutoff).matrix
    bot = quantize_bw(b.conj_reflect(), K, cutoff).matrix
    z = np.zeros_like(top)
    return np.block([[z, top], [bot, z]])


def pair_vector(coeffs: np.ndarray) -> np.ndarray:
    """Stack ``u`` with the coefficients of ``conj(u)``."""
    return np.concatenate([coeffs, np.conj(coeffs[::-1])])


# ---------------------------------------------------------------------------
# symbolic calculus


def compose_expansion(a: SymbolGrid, b: SymbolGrid, rho: int) -> SymbolGrid:
    """Truncated Moyal expansion ``a #_rho b`` with ``D_x = -i d/dx``."""
    if rho < 0:
        raise ValueError("rho must be nonnegative")
    out = a * b
    for k in range(1, int(rho) + 1):
        for ell in range(k + 1):
            beta = k - ell
            left = dxi(_Dx(a, beta), ell)
            right = dxi(_Dx(b, ell), beta)
            coef = 2.0 ** (-k) * (-1) ** beta / (math.factorial(ell) * math.factorial(beta))
            out = out + coef * SymbolGrid(left.values * right.values, a.lattice)
    return out.with_order(a.order + b.order)


def _Dx(a: SymbolGrid, times: int) -> SymbolGrid:
    if times == 0:
        return a
    d = dx(a, times)
    return SymbolGrid(d.values * (-1j) ** times, a.lattice, a.order)


def poisson_bracket(a: SymbolGrid, b: SymbolGrid) -> SymbolGrid:
    pb = dxi(a).values * dx(b).values - dx(a).values * dxi(b).values
    return SymbolGrid(pb, a.lattice, a.order + b.order - 1)


# ---------------------------------------------------------------------------
# norms and eigenvalues


def sobolev_weights(K: int, s: float) -> np.ndarray:
    return bracket(np.arange(-K, K + 1)) ** s


def operator_norm(matrix: np.ndarray, s_from: float, s_to: float) -> float:
    """Norm ``H^{s_from} -> H^{s_to}`` as the top singular value of ``D_{s_to} A D_{s_from}^{-1}``."""
    K = (matrix.shape[0] - 1) // 2
    w_to = sobolev_weights(K, s_to)
    w_from = sobolev_weights(K, s_from)
    scaled = (w_to[:, None] * matrix) / w_from[None, :]
    if not np.any(scaled):
        return 0.0
    return float(sla.svdvals(scaled)[0])


def hermitian_part(matrix: np.ndarray) -> np.ndarray:
    return 0.5 * (matrix + matrix.conj().T)


def min_eigenvalue(h: np.ndarray) -> float:
    """Smallest eigenvalue of a hermitian matrix (dense below the size limit)."""
    h = hermitian_part(h)
    if h.shape[0] <= DENSE_EIGEN_LIMIT:
        return float(np.linalg.eigvalsh(h)[0])
    return float(eigsh(h, k=1, which="SA", return_eigenvectors=False)[0])


def weighted_min_eigenvalue(matrix: np.ndarray, s: float) -> float:
    """Minimum of ``<M u, u> / ||u||_s^2`` over the truncated space."""
    K = (matrix.shape[0] - 1) // 2
    w = sobolev_weights(K, s)
    return min_eigenvalue((matrix / w[:, None]) / w[None, :])


# ---------------------------------------------------------------------------
# measured remainders and checks


def padded_radius(K: int, delta0: float = DEFAULT_CUTOFF.delta0) -> int:
    """Radius large enough that every intermediate mode of a product of two
    Bony-Weyl operators restricted to ``-K..K`` is retained."""
    return int(math.ceil(K * (1 + delta0) / (1 - delta0))) + 2


def remainder_norm(a: SymbolGrid, b: SymbolGrid, rho: int, K: int, s: float = 0.0,
                   shell: tuple[float, float] | None = None) -> float:
    """Norm of ``Op(a) Op(b) - Op(a #_rho b)`` from ``H^s`` to ``H^{s - (m + m') + rho}``.

    ``shell = (lo, hi)`` keeps only the output rows with ``lo <= |k| <= hi``,
    which isolates the high-frequency behaviour from the cutoff transition
    zone at low frequencies.
    """
    Kp = padded_radius(K)
    prod = quantize_bw(a, Kp).matrix @ quantize_bw(b, Kp).matrix
    c = Kp - K
    prod = prod[c:c + 2 * K + 1, c:c + 2 * K + 1]
    comp = quantize_bw(compose_expansion(a, b, rho), K).matrix
    diff = prod - comp
    s_to = s - (a.order + b.order) + rho
    if shell is None:
        return operator_norm(diff, s, s_to)
    k = np.abs(np.arange(-K, K + 1))
    rows = (k >= shell[0]) & (k <= shell[1])
    scaled = (sobolev_weights(K, s_to)[:, None] * diff) / sobolev_weights(K, s)[None, :]
    scaled = scaled[rows]
    return float(sla.svdvals(scaled)[0]) if np.any(scaled) else 0.0


def w3_norm(values_x: np.ndarray) -> float:
    """``sum_{k <= 3} sup |d^k a|`` by spectral differentiation on the grid."""
    M = len(values_x)
    n = np.fft.fftfreq(M, d=1.0 / M)
    hat = np.fft.fft(values_x)
    total = 0.0
    for k in range(4):
        total += float(np.max(np.abs(np.fft.ifft(hat * (1j * n) ** k))))
    return total


@dataclass
class GardingReport:
    min_quadform: float
    bound_scale: float  # ||a||_{W^{3,inf}} / R^2
    constant: float  # measured C with min_quadform >= -C * bound_scale
    R: float


def garding_check(a_x: np.ndarray, psi: np.ndarray, R: float, s: float, lattice, K: int) -> GardingReport:
    """Lower bound of ``<Op(a psi^2) u, u>`` relative to ``||u||_s^2``.

    ``a_x`` holds the nonnegative function on the x-grid and ``psi`` the
    multiplier on the xi lattice (order ``s``, supported in ``[R, inf)``).
    """
    a_x = np.real_if_close(np.asarray(a_x))
    if np.any(np.asarray(a_x).real < -1e-14):
        raise ValueError("the function a(x) must be nonnegative")
    sym = SymbolGrid(np.outer(a_x, np.asarray(psi) ** 2) + 0j, lattice, 2 * s)
    op = quantize_bw(sym, K).matrix
    lam = weighted_min_eigenvalue(op, s)
    scale = w3_norm(np.asarray(a_x, dtype=complex)) / R ** 2
    const = max(0.0, -lam) / scale if scale > 0 else 0.0
    return GardingReport(lam, scale, const, R)


@dataclass
class AdjointDiagnostics:
    conjugation_defect: float
    adjoint_defect: float
    hermitian_defect: float
    skew_defect: float
    details: dict = field(default_factory=dict)


def reality_and_adjoint_checks(a: SymbolGrid, K: int) -> AdjointDiagnostics:
    """Compare ``conj(A)`` and ``A*`` with the quantizations of the reflected symbols."""
    A = quantize_bw(a, K).matrix
    J = np.eye(2 * K + 1)[::-1]
    conj_op = J @ np.conj(A) @ J  # u -> conj(A conj(u))
    ref_conj = quantize_bw(a.conj_reflect(), K).matrix
    ref_adj = quantize_bw(a.conj(), K).matrix
    scale = max(float(np.max(np.abs(A))), 1e-300)
    return AdjointDiagnostics(
        conjugation_defect=float(np.max(np.abs(conj_op - ref_conj))) / scale,
        adjoint_defect=float(np.max(np.abs(A.conj().T - ref_adj))) / scale,
        hermitian_defect=float(np.max(np.abs(A - A.conj().T))) / scale,
        skew_defect=float(np.max(np.abs(A + A.conj().T))) / scale,
    )
