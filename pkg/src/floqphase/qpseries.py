"""Algebra of quasi-periodic exponential sums.

A :class:`QPSeries` represents

    f(t) = sum_{n, k} c[n, k] * exp(i * (k * omega + n * nu) * t)

where ``omega`` is the drive (fundamental) frequency and ``nu`` a second,
generally incommensurate frequency, e.g. the quasienergy of a Floquet
solution.  Frequencies are keyed by the integer pair ``(n, k)`` rather than
by their floating value, so products never merge terms by accident and sums
never drift when ``nu / omega`` is irrational.

Coefficients live on a dense centred grid, ``coeffs[n + N, k + K]``.  The
series for the evolution operator of a driven two-level system only has
``n`` in ``{-1, +1}``; products of a handful of them stay small.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import convolve2d

__all__ = [
    "FrequencyMismatchError",
    "QPSeries",
    "SecularSeries",
    "qp_combine",
    "qp_antiderivative",
    "qp_evaluate",
    "DROP_THRESHOLD",
    "ZERO_THRESHOLD",
]

#: Coefficients smaller than this fraction of the largest one are dropped.
DROP_THRESHOLD = 1e-14
#: Frequencies with modulus at or below this are integrated as exact zeros.
ZERO_THRESHOLD = 1e-12

_TWO_PI = 2.0 * np.pi


class FrequencyMismatchError(ValueError):
    """Raised when combining series built on different frequency units."""


def _same_freq(x: float, y: float) -> bool:
    return math.isclose(x, y, rel_tol=1e-12, abs_tol=0.0)


def _phase(freq: float, t: np.ndarray) -> np.ndarray:
    # reduce freq*t modulo 2*pi before multiplying by the harmonic index
    return np.mod(freq * t, _TWO_PI)


@dataclass(frozen=True, eq=False)
class QPSeries:
    """Finite quasi-periodic sum with exact integer frequency keys.

    Parameters
    ----------
    coeffs : array_like, shape (2N+1, 2K+1)
        Complex coefficients; ``coeffs[n + N, k + K]`` multiplies
        ``exp(i (k omega + n nu) t)``.
    omega : float
        Fundamental frequency, must be positive.
    nu : float
        Secondary frequency unit. Irrelevant when ``N == 0``.
    cutoff : int
        Largest ``|k|`` kept. Harmonics beyond it are discarded on
        construction and their mass is added to ``residual``.
    residual : float
        Upper bound on the sup-norm error introduced by truncations so far.
    """

    coeffs: np.ndarray
    omega: float
    nu: float = 0.0
    cutoff: int = 64
    residual: float = 0.0
    drop_threshold: float = field(default=DROP_THRESHOLD, repr=False)

    def __post_init__(self):
        if not self.omega > 0:
            raise ValueError(f"omega must be positive, got {self.omega!r}")
        if self.cutoff < 0:
            raise ValueError("cutoff must be non-negative")
        c = np.atleast_2d(np.asarray(self.coeffs, dtype=complex))
        if c.shape[0] % 2 == 0 or c.shape[1] % 2 == 0:
            raise ValueError(f"coefficient grid must have odd extents, got {c.shape}")
        c, dropped = _canonical(c, self.cutoff, self.drop_threshold)
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "residual", float(self.residual) + dropped)

    # construction helpers

    @classmethod
    def zero(cls, omega: float, nu: float = 0.0, cutoff: int = 64) -> QPSeries:
        return cls(np.zeros((1, 1), complex), omega, nu, cutoff)

    @classmethod
    def constant(cls, value: complex, omega: float, nu: float = 0.0, cutoff: int = 64) -> QPSeries:
        return cls(np.array([[value]], complex), omega, nu, cutoff)

    @classmethod
    def from_terms(cls, terms, omega: float, nu: float = 0.0, cutoff: int = 64) -> QPSeries:
        """Build a series from ``(n, k, c)`` triples; repeated keys are summed."""
        terms = list(terms)
        if not terms:
            return cls.zero(omega, nu, cutoff)
        N = max(abs(int(n)) for n, _, _ in terms)
        K = max(abs(int(k)) for _, k, _ in terms)
        c = np.zeros((2 * N + 1, 2 * K + 1), complex)
        for n, k, v in terms:
            c[int(n) + N, int(k) + K] += v
        return cls(c, omega, nu, cutoff)

    @classmethod
    def from_harmonics(cls, harmonics, n: int, omega: float, nu: float = 0.0,
                       cutoff: int = 64) -> QPSeries:
        """Series ``exp(i n nu t) * sum_k h[k] exp(i k omega t)``.

        ``harmonics`` has odd length ``2K+1`` and is indexed from ``-K``.
        """
        h = np.asarray(harmonics, complex)
        if h.ndim != 1 or h.size % 2 == 0:
            raise ValueError("harmonics must be a 1-d array of odd length")
        N = abs(int(n))
        c = np.zeros((2 * N + 1, h.size), complex)
        c[int(n) + N] = h
        return cls(c, omega, nu, cutoff)

    def _like(self, coeffs, residual=None, cutoff=None) -> QPSeries:
        return QPSeries(coeffs, self.omega, self.nu,
                        self.cutoff if cutoff is None else cutoff,
                        self.residual if residual is None else residual,
                        self.drop_threshold)

    # shape and term access

    @property
    def n_max(self) -> int:
        return self.coeffs.shape[0] // 2

    @property
    def k_max(self) -> int:
        return self.coeffs.shape[1] // 2

    def is_zero(self) -> bool:
        return not np.any(self.coeffs)

    def terms(self):
        """Stored nonzero terms as a list of ``(n, k, c)``."""
        N, K = self.n_max, self.k_max
        nz = np.argwhere(self.coeffs != 0)
        return [(int(i - N), int(j - K), complex(self.coeffs[i, j])) for i, j in nz]

    def coefficient(self, n: int, k: int) -> complex:
        N, K = self.n_max, self.k_max
        if abs(n) > N or abs(k) > K:
            return 0j
        return complex(self.coeffs[n + N, k + K])

    def frequency_grid(self) -> np.ndarray:
        """Angular frequency ``k omega + n nu`` for every grid cell."""
        n = np.arange(-self.n_max, self.n_max + 1)[:, None]
        k = np.arange(-self.k_max, self.k_max + 1)[None, :]
        return k * self.omega + n * self.nu

    def l1_norm(self) -> float:
        return float(np.abs(self.coeffs).sum())

    # evaluation

    def __call__(self, t):
        t_arr = np.asarray(t, dtype=float)
        scalar = t_arr.ndim == 0
        tt = np.atleast_1d(t_arr).ravel()
        n = np.arange(-self.n_max, self.n_max + 1)
        k = np.arange(-self.k_max, self.k_max + 1)
        en = np.exp(1j * n[:, None] * _phase(self.nu, tt)[None, :]) if self.n_max else None
        ek = np.exp(1j * k[:, None] * _phase(self.omega, tt)[None, :])
        if en is None:
            out = self.coeffs[0] @ ek
        else:
            out = np.einsum("nk,nj,kj->j", self.coeffs, en, ek)
        if scalar:
            return complex(out[0])
        return out.reshape(t_arr.shape)

    # algebra

    def _check_compatible(self, other: QPSeries):
        if not _same_freq(self.omega, other.omega):
            raise FrequencyMismatchError(
                f"fundamental frequencies differ: {self.omega!r} vs {other.omega!r}")
        if self.n_max and other.n_max and not _same_freq(self.nu, other.nu):
            raise FrequencyMismatchError(
                f"secondary frequency units differ: {self.nu!r} vs {other.nu!r}")

    def _nu_with(self, other: QPSeries) -> float:
        return self.nu if self.n_max else other.nu

    def __add__(self, other):
        if not isinstance(other, QPSeries):
            other = QPSeries.constant(complex(other), self.omega, self.nu, self.cutoff)
        self._check_compatible(other)
        N = max(self.n_max, other.n_max)
        K = max(self.k_max, other.k_max)
        c = _pad(self.coeffs, N, K) + _pad(other.coeffs, N, K)
        return QPSeries(c, self.omega, self._nu_with(other), max(self.cutoff, other.cutoff),
                        self.residual + other.residual, self.drop_threshold)

    __radd__ = __add__

    def __neg__(self):
        return self._like(-self.coeffs)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, QPSeries):
            return self.multiply(other)
        other = complex(other)
        return self._like(self.coeffs * other, residual=self.residual * abs(other))

    __rmul__ = __mul__

    def multiply(self, other: QPSeries, cutoff: int | None = None) -> QPSeries:
        """Product series, truncated back to ``cutoff`` harmonics.

        The full product has ``|k| <= K_a + K_b``; harmonics above ``cutoff``
        (default: the larger input cutoff) are dropped and their l1 mass is
        recorded in ``residual``.
        """
        self._check_compatible(other)
        cutoff = max(self.cutoff, other.cutoff) if cutoff is None else cutoff
        c = convolve2d(self.coeffs, other.coeffs)
        res = (self.residual * other.l1_norm() + other.residual * self.l1_norm()
               + self.residual * other.residual)
        return QPSeries(c, self.omega, self._nu_with(other), cutoff, res, self.drop_threshold)

    def conj(self) -> QPSeries:
        """Series of the complex conjugate function."""
        return self._like(np.conj(self.coeffs[::-1, ::-1]))

    def derivative(self) -> QPSeries:
        return self._like(1j * self.frequency_grid() * self.coeffs,
                          residual=self.residual * (self.cutoff * self.omega + self.n_max * abs(self.nu)))

    def antiderivative(self, zero_threshold: float = ZERO_THRESHOLD) -> SecularSeries:
        """Antiderivative vanishing at ``t = 0``.

        A term ``c exp(i l t)`` with ``|l| > zero_threshold`` integrates to
        ``c / (i l) * (exp(i l t) - 1)``; the remaining terms are summed into
        the coefficient of the linear (secular) part.
        """
        if not zero_threshold > 0:
            raise ValueError("zero_threshold must be positive")
        lam = self.frequency_grid()
        zero = np.abs(lam) <= zero_threshold
        secular = complex(self.coeffs[zero].sum())
        c = np.zeros_like(self.coeffs)
        c[~zero] = self.coeffs[~zero] / (1j * lam[~zero])
        c[self.n_max, self.k_max] -= c.sum()
        osc = self._like(c, residual=0.0)
        return SecularSeries(osc, secular)

    def max_abs_imag_part(self, t) -> float:
        return float(np.max(np.abs(np.imag(self(t)))))

    def __repr__(self):
        return (f"QPSeries(terms={len(self.terms())}, omega={self.omega!r}, nu={self.nu!r}, "
                f"cutoff={self.cutoff}, residual={self.residual:.3g})")


@dataclass(frozen=True)
class SecularSeries:
    """``oscillatory(t) + secular * t``: the antiderivative of a QPSeries."""

    oscillatory: QPSeries
    secular: complex = 0j

    def __call__(self, t):
        return self.oscillatory(t) + self.secular * np.asarray(t, dtype=float)

    def derivative(self) -> QPSeries:
        return self.oscillatory.derivative() + self.secular


def _pad(c: np.ndarray, N: int, K: int) -> np.ndarray:
    n0, k0 = c.shape[0] // 2, c.shape[1] // 2
    return np.pad(c, ((N - n0, N - n0), (K - k0, K - k0)))


def _canonical(c: np.ndarray, cutoff: int, drop: float):
    """Truncate to ``|k| <= cutoff``, zero tiny coefficients, trim borders."""
    dropped = 0.0
    K = c.shape[1] // 2
    if K > cutoff:
        cut = K - cutoff
        dropped += float(np.abs(c[:, :cut]).sum() + np.abs(c[:, -cut:]).sum())
        c = c[:, cut:-cut]
    c = c.copy()
    scale = np.abs(c).max() if c.size else 0.0
    if scale == 0.0:
        return np.zeros((1, 1), complex), dropped
    small = np.abs(c) < drop * scale
    dropped += float(np.abs(c[small]).sum())
    c[small] = 0
    rows = np.flatnonzero(np.any(c != 0, axis=1))
    cols = np.flatnonzero(np.any(c != 0, axis=0))
    N, K = c.shape[0] // 2, c.shape[1] // 2
    n_keep = max(abs(rows[0] - N), abs(rows[-1] - N))
    k_keep = max(abs(cols[0] - K), abs(cols[-1] - K))
    return c[N - n_keep:N + n_keep + 1, K - k_keep:K + k_keep + 1], dropped


def qp_combine(a: QPSeries, b: QPSeries, op: str) -> QPSeries:
    """Add or multiply two series built on the same frequencies."""
    if op == "add":
        return a + b
    if op == "mul":
        return a.multiply(b)
    raise ValueError(f"unknown op {op!r}; expected 'add' or 'mul'")


def qp_antiderivative(a: QPSeries, zero_threshold: float = ZERO_THRESHOLD) -> SecularSeries:
    return a.antiderivative(zero_threshold)


def qp_evaluate(a: QPSeries | SecularSeries, t):
    return a(t)
