"""Four-wave index sets, resonance classification and cubic projections.

Tuples are ``((j1, j2, j3, j4), (s1, s2, s3, s4))`` with zero momentum
``sum s_a j_a = 0`` and zero gauge charge ``sum s_a = 0``.  The distinguished
set of modes is ``{-1, +1}``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Iterator

import mpmath
import numpy as np

from . import kernels

LAMBDA = frozenset({-1, 1})
RESONANCE_TOL = 1e-12
RECHECK_DIGITS = 50
SIGN_PATTERNS = tuple(p for p in itertools.product((1, -1), repeat=4) if sum(p) == 0)


@dataclass(frozen=True)
class IndexTuple:
    j: tuple[int, int, int, int]
    sigma: tuple[int, int, int, int]

    @property
    def momentum_ok(self) -> bool:
        return sum(s * j for s, j in zip(self.sigma, self.j)) == 0

    @property
    def gauge_ok(self) -> bool:
        return sum(self.sigma) == 0

    @property
    def in_P4(self) -> bool:
        return self.momentum_ok and self.gauge_ok

    @property
    def n_outside(self) -> int:
        return sum(1 for j in self.j if j not in LAMBDA)


@dataclass(frozen=True)
class ResonanceTag:
    n_outside: int
    resonant: bool


def enumerate_P4(J: int) -> Iterator[IndexTuple]:
    """Every tuple with ``|j_a| <= J`` in the momentum/gauge set, once each."""
    if J < 1:
        raise ValueError("J must be at least 1")
    rng = range(-J, J + 1)
    for sigma in SIGN_PATTERNS:
        s4 = sigma[3]
        for j1, j2, j3 in itertools.product(rng, rng, rng):
            rest = sigma[0] * j1 + sigma[1] * j2 + sigma[2] * j3
            j4 = -rest * s4
            if -J <= j4 <= J:
                yield IndexTuple((j1, j2, j3, j4), sigma)


def omega_sum(t: IndexTuple, alpha: float) -> float:
    return float(sum(s * abs(j) ** alpha for s, j in zip(t.sigma, t.j)))


def omega_sum_exact(t: IndexTuple, alpha, digits: int = RECHECK_DIGITS):
    with mpmath.workdps(digits):
        a = mpmath.mpf(alpha) if not isinstance(alpha, str) else mpmath.mpf(alpha)
        return sum(s * mpmath.power(abs(j), a) for s, j in zip(t.sigma, t.j))


def is_paired(t: IndexTuple) -> bool:
    """True for permutations of ``((k, k, l, l), (+, -, +, -))``."""
    plus = [j for j, s in zip(t.j, t.sigma) if s > 0]
    minus = [j for j, s in zip(t.j, t.sigma) if s < 0]
    return sorted(plus) == sorted(minus)


def classify(t: IndexTuple, alpha: float) -> ResonanceTag:
    if not t.in_P4:
        raise ValueError(f"{t} is not a momentum/gauge admissible tuple")
    n = t.n_outside
    if n == 0:
        return ResonanceTag(0, True)
    if n == 1:
        return ResonanceTag(1, False)
    if n == 2:
        return ResonanceTag(2, is_paired(t))
    if is_paired(t):
        return ResonanceTag(n, True)
    return ResonanceTag(n, abs(omega_sum(t, alpha)) <= RESONANCE_TOL)


def case2_gap(j3: int, alpha: float) -> float:
    """``| |j3 + 2|^alpha - |j3|^alpha |``, the Case II frequency gap."""
    return abs(abs(j3 + 2) ** alpha - abs(j3) ** alpha)


def _pattern_label(j) -> str:
    t = IndexTuple(tuple(int(v) for v in j), (1, -1, 1, -1))
    outside = [v for v in t.j if v not in LAMBDA]
    if t.n_outside == 1:
        return f"one outside index {outside[0]}"
    if t.n_outside == 2:
        inside_pos = [i for i, v in enumerate(t.j) if v in LAMBDA]
        same_sign = (inside_pos[0] % 2) == (inside_pos[1] % 2)
        return ("Case I (inside indexes share a sign)" if same_sign
                else "Case II (inside indexes of opposite sign)") + f", outside {outside}"
    return f"{t.n_outside} outside"


def audit_lower_bounds(J: int, alpha: float, backend: Callable | None = None) -> dict:
    """Exhaustive audit of the frequency gaps on canonical tuples.

    Canonical tuples carry signs ``(+, -, +, -)``; every admissible tuple is
    a permutation of one of them and classification is permutation
    invariant, so the minima are the minima over the whole set.
    """
    if J < 1:
        raise ValueError("the audit needs J >= 1")
    sweep = backend or kernels.sweep_canonical
    raw = sweep(J, alpha, RESONANCE_TOL)
    # high-precision recheck of near-zero sums with three or more outside indexes
    exact_zero = 0
    for cand in raw["candidates"]:
        val = omega_sum_exact(IndexTuple(tuple(cand), (1, -1, 1, -1)), alpha)
        if abs(val) < mpmath.mpf(10) ** (-(RECHECK_DIGITS - 5)):
            exact_zero += 1
    bound1 = 2 ** alpha - 1

    def finite(v):  # the sweep reports 1e300 for an empty class
        return None if v >= 1e300 else v

    report = {
        "J": J,
        "alpha": alpha,
        "backend": getattr(sweep, "__module__", str(sweep)),
        "counts_by_outside": raw["counts"],
        "resonant_by_outside": raw["resonant_counts"],
        "class1_resonances": raw["resonant_counts"][1],
        "class2_nonstructural_resonances": raw["class2_anomalies"],
        "min_bounds": {
            "class1_abs_omega": finite(raw["min_class1"]),
            "class1_proof_bound": bound1,
            "class2_abs_omega": finite(raw["min_class2"]),
            "class2_scaled": finite(raw["min_class2_scaled"]),
        },
        "attaining": {
            "class1": list(raw["argmin_class1"]),
            "class1_pattern": _pattern_label(raw["argmin_class1"]),
            "class2": list(raw["argmin_class2"]),
            "class2_scaled": list(raw["argmin_class2_scaled"]),
            "class2_scaled_pattern": _pattern_label(raw["argmin_class2_scaled"]),
        },
        "high_outside": {
            "integrable": raw["integrable_high"],
            "nonintegrable_near_zero": raw["nonintegrable_high"],
            "rechecked": len(raw["candidates"]),
            "rechecked_exact_zero": exact_zero,
        },
    }
    report["class1_bound_holds"] = raw["min_class1"] >= bound1 - 1e-15
    report["class2_bound_positive"] = raw["min_class2_scaled"] > 0
    return report


# ---------------------------------------------------------------------------
# cubic coefficient tables


def x3_canonical(j1, j2, j3):
    """Coefficient of ``u_{j1} conj(u_{j2}) u_{j3} e^{ikx}`` per sign pattern
    (the field sums three patterns, hence the 1/6)."""
    j1, j2, j3 = (np.asarray(v) for v in (j1, j2, j3))
    ne12 = (j1 != j2).astype(float)
    ne32 = (j3 != j2).astype(float)
    return (1j / 6) * (j3 * ne12 + j1 * ne32 - j2 * ((1 - ne12) + (1 - ne32)))


def x3_coefficients(j: tuple[int, int, int], k: int, sigma: tuple[int, int, int], out_sign: int = 1) -> complex:
    """Symmetrized coefficient ``X^{sigma, out_sign}_{j, k}`` of the cubic field.

    Any permutation of the pattern ``(+, -, +)`` with output ``+`` maps to the
    canonical ordering; the mirrored pattern with output ``-`` is its conjugate.
    """
    t = IndexTuple((j[0], j[1], j[2], k), (sigma[0], sigma[1], sigma[2], -out_sign))
    if not t.in_P4:
        return 0j
    if sorted(sigma) == [-1, 1, 1] and out_sign == 1:
        plus = [ji for ji, s in zip(j, sigma) if s > 0]
        minus = [ji for ji, s in zip(j, sigma) if s < 0]
        return complex(x3_canonical(plus[0], minus[0], plus[1]))
    if sorted(sigma) == [-1, -1, 1] and out_sign == -1:
        return complex(np.conj(x3_coefficients(j, k, tuple(-s for s in sigma), 1)))
    return 0j


@dataclass(frozen=True, eq=False)
class CubicTable:
    """Coefficients ``C[j1, j2, j3]`` (offset ``J``) of the ``+`` component
    ``X(U)^+_k = 3 sum C u_{j1} conj(u_{j2}) u_{j3}``, ``k = j1 - j2 + j3``.
    The ``-`` component follows from the reality relation."""

    C: np.ndarray
    J: int

    def __post_init__(self):
        n = 2 * self.J + 1
        if self.C.shape != (n, n, n):
            raise ValueError("table shape does not match J")

    def symmetric(self, tol: float = 1e-14) -> bool:
        return bool(np.max(np.abs(self.C - self.C.transpose(2, 1, 0)), initial=0.0) <= tol)

    def indices(self):
        g = np.arange(-self.J, self.J + 1)
        return np.meshgrid(g, g, g, indexing="ij")

    def evaluate(self, coeffs: np.ndarray, K_out: int | None = None) -> np.ndarray:
        """``X(U)^+`` as a coefficient vector over ``-K_out..K_out``."""
        J = self.J
        K = (len(coeffs) - 1) // 2
        u = np.zeros(2 * J + 1, dtype=complex)
        m = min(J, K)
        u[J - m:J + m + 1] = coeffs[K - m:K + m + 1]
        K_out = 3 * J if K_out is None else K_out
        out = np.zeros(2 * K_out + 1, dtype=complex)
        j1, j2, j3 = self.indices()
        k = j1 - j2 + j3
        vals = 3 * self.C * u[:, None, None] * np.conj(u)[None, :, None] * u[None, None, :]
        sel = np.abs(k) <= K_out
        np.add.at(out, k[sel] + K_out, vals[sel])
        return out


def x3_table(J: int) -> CubicTable:
    g = np.arange(-J, J + 1)
    j1, j2, j3 = np.meshgrid(g, g, g, indexing="ij")
    return CubicTable(x3_canonical(j1, j2, j3).astype(complex), J)


# selectors: boolean masks on canonical (j1, j2, j3, k = j1 - j2 + j3)


def _outside_count(j1, j2, j3, k):
    return sum((np.abs(v) != 1).astype(int) for v in (j1, j2, j3, k))


def _paired(j1, j2, j3, k):
    return ((j1 == j2) & (j3 == k)) | ((j1 == k) & (j2 == j3))


def selector_P(n: int):
    return lambda j1, j2, j3, k: _outside_count(j1, j2, j3, k) == n


def selector_R(n: int, alpha: float | None = None):
    """Resonant tuples with exactly ``n`` outside indexes."""
    def sel(j1, j2, j3, k):
        cnt = _outside_count(j1, j2, j3, k)
        if n == 0:
            return cnt == 0
        if n == 1:
            return np.zeros_like(cnt, dtype=bool)
        if n == 2:
            return (cnt == 2) & _paired(j1, j2, j3, k)
        if alpha is None:
            raise ValueError("resonances with three or more outside indexes need alpha")
        pw = lambda v: np.abs(v).astype(float) ** alpha
        om = pw(j1) - pw(j2) + pw(j3) - pw(k)
        return (cnt == n) & (_paired(j1, j2, j3, k) | (np.abs(om) <= RESONANCE_TOL))
    return sel


def selector_all(j1, j2, j3, k):
    return np.ones(np.shape(j1), dtype=bool)


def selector_none(j1, j2, j3, k):
    return np.zeros(np.shape(j1), dtype=bool)


def selector_protected():
    """Union of the resonant sets with at most two outside indexes and all
    tuples with three or four outside indexes."""
    def sel(j1, j2, j3, k):
        cnt = _outside_count(j1, j2, j3, k)
        return (cnt == 0) | ((cnt == 2) & _paired(j1, j2, j3, k)) | (cnt >= 3)
    return sel


def project_cubic(table: CubicTable, selector) -> CubicTable:
    if not table.symmetric():
        raise ValueError("coefficient table is not symmetric under exchange of the two u slots")
    j1, j2, j3 = table.indices()
    mask = selector(j1, j2, j3, j1 - j2 + j3)
    return CubicTable(np.where(mask, table.C, 0), table.J)


def proj_x3_closed_form(coeffs: np.ndarray, n: int, K_out: int) -> np.ndarray:
    """Closed forms of the resonant projections of the cubic field."""
    out = np.zeros(2 * K_out + 1, dtype=complex)
    if n != 0:
        return out
    K = (len(coeffs) - 1) // 2
    u1, um1 = coeffs[K + 1], coeffs[K - 1]
    out[K_out + 1] = -1j * abs(u1) ** 2 * u1
    out[K_out - 1] = 1j * abs(um1) ** 2 * um1
    return out
