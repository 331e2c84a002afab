"""Quasi-periodic evolution operator of a periodically driven two-level system.

The Hamiltonian (rotated frame) is ``H(t) = eps * sx + f(t) * sz`` with
``f(t) = F0 + A cos(omega t)``.  Its propagator has the SU(2) form

    U(t) = [[ U11,        U12       ],
            [-conj(U12),  conj(U11) ]]

where ``U11`` and ``U12`` only contain the frequencies ``k omega -+ Omega``.
Here the Floquet mode and its quasienergy ``Omega`` come from the truncated
Hill matrix, i.e. the Fourier-space eigenproblem

    (Omega - m omega) c_m = (eps sx + F0 sz) c_m + (A / 2) sz (c_{m-1} + c_{m+1}).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .qpseries import QPSeries

__all__ = [
    "Drive",
    "TwoLevelParams",
    "FloquetSolution",
    "ResonanceError",
    "ConvergenceError",
    "solve_floquet",
    "evolution_operator_at",
    "unitarity_defect",
    "rabi_period",
    "hamiltonian",
    "SIGMA_X",
    "SIGMA_Y",
    "SIGMA_Z",
]

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)

DEFAULT_CUTOFF = 32
MAX_CUTOFF = 256
EPSILON_WARN = 0.5


class ResonanceError(ArithmeticError):
    """The Floquet problem is (numerically) degenerate for these parameters."""


class ConvergenceError(ArithmeticError):
    """The truncated Fourier representation did not reach the requested accuracy."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class Drive:
    """Periodic field ``f(t) = F0 + A cos(omega t)``."""

    omega: float
    F0: float = 0.0
    A: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.omega) and self.omega > 0):
            raise ValueError(f"omega must be positive and finite, got {self.omega!r}")
        if not (math.isfinite(self.F0) and math.isfinite(self.A)):
            raise ValueError("drive amplitudes must be finite")

    @property
    def period(self) -> float:
        """Drive period ``t_omega = 2 pi / omega``."""
        return 2.0 * np.pi / self.omega

    def fourier(self) -> dict[int, float]:
        return {-1: self.A / 2, 0: self.F0, 1: self.A / 2}

    def __call__(self, t):
        return self.F0 + self.A * np.cos(self.omega * np.asarray(t, dtype=float))

    def integral(self, t):
        """``int_0^t f``."""
        t = np.asarray(t, dtype=float)
        return self.F0 * t + self.A / self.omega * np.sin(self.omega * t)


@dataclass(frozen=True)
class TwoLevelParams:
    epsilon: float
    drive: Drive

    def __post_init__(self):
        if not math.isfinite(self.epsilon):
            raise ValueError("epsilon must be finite")
        if abs(self.epsilon) > EPSILON_WARN:
            warnings.warn(f"|epsilon| = {abs(self.epsilon)} is outside the validated range "
                          f"(<= {EPSILON_WARN})", stacklevel=3)

    @classmethod
    def make(cls, epsilon: float, omega: float, F0: float = 0.0, A: float = 1.0) -> TwoLevelParams:
        return cls(epsilon, Drive(omega, F0, A))

    @property
    def omega(self) -> float:
        return self.drive.omega

    @property
    def t_omega(self) -> float:
        return self.drive.period


def hamiltonian(params: TwoLevelParams, t: float) -> np.ndarray:
    """Rotated-frame Hamiltonian ``eps sx + f(t) sz``."""
    return params.epsilon * SIGMA_X + float(params.drive(t)) * SIGMA_Z


@dataclass(frozen=True, eq=False)
class FloquetSolution:
    """Quasi-periodic representation of the propagator of one driven qubit.

    Attributes
    ----------
    omega_rabi : float
        Quasienergy ``Omega >= 0`` (first Brillouin zone).
    U11, U12 : QPSeries
        Matrix elements; series unit ``nu = omega_rabi`` with ``n = -1, +1``.
    residual : float
        Max of ``| |U11|^2 + |U12|^2 - 1 |`` over one drive period. The defect
        is periodic, so this bounds it for all times.
    """

    omega_rabi: float
    U11: QPSeries
    U12: QPSeries
    params: TwoLevelParams
    cutoff: int
    residual: float
    backend: str = "hill_matrix"
    mode: np.ndarray | None = None

    @property
    def omega(self) -> float:
        return self.params.omega

    @property
    def epsilon(self) -> float:
        return self.params.epsilon

    @property
    def t_omega(self) -> float:
        return self.params.t_omega


def _hill_matrix(params: TwoLevelParams, M: int) -> np.ndarray:
    d = params.drive
    m = np.arange(-M, M + 1)
    block = params.epsilon * SIGMA_X + d.F0 * SIGMA_Z
    K = np.kron(np.diag(m * d.omega), np.eye(2)) + np.kron(np.eye(2 * M + 1), block)
    K += np.kron(np.eye(2 * M + 1, k=1) + np.eye(2 * M + 1, k=-1), 0.5 * d.A * SIGMA_Z)
    return K


def _floquet_mode(params: TwoLevelParams, M: int):
    """Quasienergy ``>= 0`` and Fourier coefficients ``c[m, s]`` of one Floquet mode."""
    K = _hill_matrix(params, M)
    lam, vec = np.linalg.eigh(K)
    i = int(np.argmin(np.abs(lam)))
    q = float(lam[i])
    # below the eigenvalue accuracy the quasienergy is indistinguishable from 0
    if abs(q) <= 8 * np.finfo(float).eps * np.abs(lam).max():
        q = 0.0
    c = vec[:, i].reshape(2 * M + 1, 2)
    if q < 0:
        # i sigma_y conj(phi) solves the same equation with quasienergy -q
        c = np.stack([np.conj(c[::-1, 1]), -np.conj(c[::-1, 0])], axis=1)
        q = -q
    return q, c, lam


def _assemble(params: TwoLevelParams, M: int, q: float, c: np.ndarray):
    omega = params.omega
    u1, u2 = c[:, 0], c[:, 1]
    a, b = u1.sum(), u2.sum()
    norm = abs(a) ** 2 + abs(b) ** 2
    cut = 2 * M
    # exp(-i q t) u1(t) conj(a) + exp(+i q t) conj(u2(t)) b
    U11 = (QPSeries.from_harmonics(u1 * np.conj(a) / norm, -1, omega, q, cut)
           + QPSeries.from_harmonics(np.conj(u2[::-1]) * b / norm, +1, omega, q, cut))
    U12 = (QPSeries.from_harmonics(u1 * np.conj(b) / norm, -1, omega, q, cut)
           - QPSeries.from_harmonics(np.conj(u2[::-1]) * a / norm, +1, omega, q, cut))
    return U11, U12, norm


def _defect_over_period(U11: QPSeries, U12: QPSeries, omega: float, samples: int = 257) -> float:
    t = np.linspace(0.0, 2 * np.pi / omega, samples)
    return float(np.max(np.abs(np.abs(U11(t)) ** 2 + np.abs(U12(t)) ** 2 - 1.0)))


def _equation_residual(sol: FloquetSolution, samples: int = 65) -> float:
    """max |i dU/dt - H U| over one period, from the analytic derivative."""
    t = np.linspace(0.0, sol.t_omega, samples)
    d11, d12 = sol.U11.derivative()(t), sol.U12.derivative()(t)
    u11, u12 = sol.U11(t), sol.U12(t)
    f = sol.params.drive(t)
    eps = sol.epsilon
    # first row of i U' = H U with U21 = -conj(U12)
    r1 = 1j * d11 - (f * u11 - eps * np.conj(u12))
    r2 = 1j * d12 - (f * u12 + eps * np.conj(u11))
    return float(max(np.abs(r1).max(), np.abs(r2).max()))


def _solve_hill(params: TwoLevelParams, M: int) -> FloquetSolution:
    q, c, lam = _floquet_mode(params, M)
    U11, U12, _ = _assemble(params, M, q, c)
    residual = _defect_over_period(U11, U12, params.omega)
    return FloquetSolution(q, U11, U12, params, M, residual, "hill_matrix", c)


def solve_floquet(params: TwoLevelParams, M: int | None = None, backend: str = "hill_matrix",
                  tol: float = 1e-8) -> FloquetSolution:
    """Quasi-periodic evolution operator of ``eps sx + f(t) sz``.

    Parameters
    ----------
    params : TwoLevelParams
    M : int, optional
        Harmonic cutoff of the Hill matrix. When omitted, start at 32 and
        double while the unitarity residual improves by at least 10x, up to 256.
    backend : {"hill_matrix"}
        Only the Fourier-space eigen-decomposition is available; the
        epsilon power series is not implemented.
    tol : float
        Accepted residual of ``i U' = H U`` over one period.

    Raises
    ------
    ResonanceError
        The solution is inaccurate and the two quasienergies collide
        (``2 Omega`` is a multiple of ``omega``).
    ConvergenceError
        The solution is inaccurate at the largest cutoff tried.
    """
    if backend in ("hill", "hill_matrix"):
        pass
    elif backend in ("series", "epsilon_series"):
        raise NotImplementedError("the epsilon power-series backend is not available; use 'hill_matrix'")
    else:
        raise ValueError(f"unknown backend {backend!r}")

    if M is not None:
        if M < 8:
            raise ValueError(f"cutoff M must be >= 8, got {M}")
        sol = _solve_hill(params, M)
    else:
        M = DEFAULT_CUTOFF
        sol = _solve_hill(params, M)
        while M < MAX_CUTOFF:
            nxt = _solve_hill(params, 2 * M)
            improved = nxt.residual <= sol.residual / 10
            if nxt.residual < sol.residual:
                sol = nxt
            if not improved:
                break
            M *= 2

    err = _equation_residual(sol)
    if not err <= tol:
        omega = params.omega
        gap = min(abs(2 * sol.omega_rabi - n * omega) for n in range(2))
        if gap < 1e-6 * omega:
            raise ResonanceError(
                f"quasienergies collide at (epsilon={params.epsilon}, omega={omega}); "
                f"equation residual {err:.3g}")
        raise ConvergenceError(
            f"Fourier cutoff {sol.cutoff} gives equation residual {err:.3g} > {tol:g} "
            f"at (epsilon={params.epsilon}, omega={params.omega})", err)
    return sol


def evolution_operator_at(sol: FloquetSolution, t) -> np.ndarray:
    """Propagator matrix; shape (2, 2) for scalar ``t`` or (len(t), 2, 2)."""
    u11, u12 = sol.U11(t), sol.U12(t)
    U = np.array([[u11, u12], [-np.conj(u12), np.conj(u11)]])
    return np.moveaxis(U, (0, 1), (-2, -1))


def unitarity_defect(sol: FloquetSolution, t):
    """``N(t) = |U11(t)|^2 + |U12(t)|^2 - 1``."""
    n = np.abs(sol.U11(t)) ** 2 + np.abs(sol.U12(t)) ** 2 - 1.0
    return float(n) if np.ndim(n) == 0 else n


def rabi_period(sol: FloquetSolution) -> float:
    """``T_Omega = 2 pi / Omega``."""
    if sol.omega_rabi <= 0:
        raise ZeroDivisionError("Rabi frequency is zero; the period is undefined")
    return 2.0 * np.pi / sol.omega_rabi
