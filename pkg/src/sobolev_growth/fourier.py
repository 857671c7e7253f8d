"""Truncated Fourier fields on the circle.

A field is stored densely as the coefficient vector ``(u_{-K}, ..., u_K)``
of ``u(x) = sum_k u_k e^{ikx}``.  Everything downstream (symbols,
operators, integrators) works on this basis.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

TANGENTIAL_MODES = (-1, 1)


def bracket(k):
    """Japanese bracket ``max(1, |k|)``; the zero mode keeps weight one."""
    return np.maximum(1.0, np.abs(np.asarray(k, dtype=float)))


@dataclass(frozen=True, eq=False)
class FourierField:
    """Immutable dense coefficient vector over ``k = -K..K``."""

    coeffs: np.ndarray
    K: int

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=complex)
        if self.K < 0 or c.shape != (2 * self.K + 1,):
            raise ValueError(f"coefficient vector of length {c.shape} does not match K={self.K}")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    # construction -----------------------------------------------------
    @classmethod
    def zeros(cls, K: int) -> "FourierField":
        return cls(np.zeros(2 * K + 1, dtype=complex), K)

    @classmethod
    def from_modes(cls, modes: Mapping[int, complex], K: int) -> "FourierField":
        c = np.zeros(2 * K + 1, dtype=complex)
        for k, val in modes.items():
            if abs(k) > K:
                raise ValueError(f"mode {k} outside truncation K={K}")
            c[k + K] += val
        return cls(c, K)

    @classmethod
    def random(cls, K: int, rng: np.random.Generator, decay: float = 2.0,
               support: int | None = None) -> "FourierField":
        """Gaussian coefficients with spectrum ``<k>^{-decay}``."""
        k = np.arange(-K, K + 1)
        c = (rng.standard_normal(2 * K + 1) + 1j * rng.standard_normal(2 * K + 1)) * bracket(k) ** (-decay)
        if support is not None:
            c[np.abs(k) > support] = 0.0
        return cls(c, K)

    # views --------------------------------------------------------------
    @property
    def modes(self) -> np.ndarray:
        return np.arange(-self.K, self.K + 1)

    def __getitem__(self, k: int) -> complex:
        if abs(k) > self.K:
            return 0j
        return complex(self.coeffs[k + self.K])

    def __add__(self, other: "FourierField") -> "FourierField":
        _check_same(self, other)
        return FourierField(self.coeffs + other.coeffs, self.K)

    def __sub__(self, other: "FourierField") -> "FourierField":
        _check_same(self, other)
        return FourierField(self.coeffs - other.coeffs, self.K)

    def __mul__(self, scalar: complex) -> "FourierField":
        return FourierField(self.coeffs * scalar, self.K)

    __rmul__ = __mul__

    def conj_coeffs(self) -> np.ndarray:
        """Coefficients of the conjugate function: ``(ubar)_k = conj(u_{-k})``."""
        return np.conj(self.coeffs[::-1])

    def resize(self, K: int) -> "FourierField":
        """Zero-pad or truncate to a new radius."""
        out = np.zeros(2 * K + 1, dtype=complex)
        m = min(K, self.K)
        out[K - m:K + m + 1] = self.coeffs[self.K - m:self.K + m + 1]
        return FourierField(out, K)

    def on_grid(self, n_points: int) -> np.ndarray:
        """Values at ``x_m = 2 pi m / n_points``."""
        return to_grid(self.coeffs, n_points)

    # serialization --------------------------------------------------------
    def to_json(self) -> str:
        return json.dumps(field_to_triples(self))

    @classmethod
    def from_json(cls, text: str, K: int | None = None) -> "FourierField":
        return triples_to_field(json.loads(text), K)


def _check_same(a: FourierField, b: FourierField):
    if a.K != b.K:
        raise ValueError(f"truncation mismatch: {a.K} vs {b.K}")


def to_grid(coeffs: np.ndarray, n_points: int) -> np.ndarray:
    K = (len(coeffs) - 1) // 2
    if n_points < 2 * K + 1:
        raise ValueError("grid too coarse for the truncation")
    buf = np.zeros(n_points, dtype=complex)
    k = np.arange(-K, K + 1)
    buf[k % n_points] = coeffs
    return np.fft.ifft(buf) * n_points


def from_grid(values: np.ndarray, K: int) -> np.ndarray:
    n = len(values)
    hat = np.fft.fft(values) / n
    k = np.arange(-K, K + 1)
    return hat[k % n]


def field_to_triples(u: FourierField) -> list[list[float]]:
    return [[int(k), float(c.real), float(c.imag)] for k, c in zip(u.modes, u.coeffs) if c != 0]


def triples_to_field(triples: Iterable, K: int | None = None) -> FourierField:
    triples = [(int(k), float(re), float(im)) for k, re, im in triples]
    if K is None:
        K = max((abs(k) for k, _, _ in triples), default=0)
    return FourierField.from_modes({k: complex(re, im) for k, re, im in triples}, K)


# ---------------------------------------------------------------------------
# norms and conserved quantities


def sobolev_norm(u: FourierField, s: float) -> float:
    if not np.isfinite(s):
        raise ValueError("Sobolev index must be finite")
    w = bracket(u.modes) ** (2 * s)
    return float(np.sqrt(np.sum(w * np.abs(u.coeffs) ** 2)))


def mass(u: FourierField) -> float:
    return float(np.sum(np.abs(u.coeffs) ** 2))


def momentum(u: FourierField) -> float:
    return float(-np.sum(u.modes * np.abs(u.coeffs) ** 2))


# ---------------------------------------------------------------------------
# tangential / normal splitting


@dataclass(frozen=True)
class ModeSplit:
    tangential: FourierField
    normal: FourierField

    def reconstruct(self) -> FourierField:
        return self.tangential + self.normal


def tangential_mask(K: int) -> np.ndarray:
    k = np.arange(-K, K + 1)
    return np.isin(k, TANGENTIAL_MODES)


def split_modes(z: FourierField) -> ModeSplit:
    if z.K < 1:
        raise ValueError("splitting needs K >= 1")
    mask = tangential_mask(z.K)
    top = np.where(mask, z.coeffs, 0)
    perp = np.where(mask, 0, z.coeffs)
    return ModeSplit(FourierField(top, z.K), FourierField(perp, z.K))


# ---------------------------------------------------------------------------
# symmetry actions


def translate(u: FourierField, shift: float) -> FourierField:
    return FourierField(u.coeffs * np.exp(1j * u.modes * shift), u.K)


def gauge(u: FourierField, theta: float) -> FourierField:
    return FourierField(u.coeffs * np.exp(1j * theta), u.K)
