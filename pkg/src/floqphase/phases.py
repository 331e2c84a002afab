"""Total, dynamical and geometric phases of one driven two-level system.

Conventions
-----------
* total phase ``arg <psi(0)|psi(t)>``, principal value in ``(-pi, pi]``;
* dynamical phase ``i int_0^t <psi|psi'> dt = int_0^t <psi|H|psi> dt``;
* geometric phase: total minus dynamical, stored without re-wrapping.

The dynamical phase is assembled from the analytic antiderivatives of the
matrix elements ``a11``, ``a12`` of ``U^dag dU/dt``, never from quadrature
of the oscillatory integrand.
"""

from __future__ import annotations

import math
import os
import weakref
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .floquet import FloquetSolution, TwoLevelParams, evolution_operator_at, solve_floquet
from .qpseries import QPSeries, ZERO_THRESHOLD

__all__ = [
    "InitialState",
    "PhaseReport",
    "OverlapDerivative",
    "UndefinedPhaseError",
    "ROTATION",
    "overlap_derivative",
    "total_phase",
    "dynamical_phase",
    "dynamical_phase_as_printed",
    "phase_report",
    "sweep_grid",
    "SweepPoint",
    "principal",
    "default_grid",
]

#: ``R_y(pi/2) = exp(-i pi sy / 4)``, lab frame -> rotated frame.
ROTATION = np.array([[1.0, -1.0], [1.0, 1.0]], dtype=complex) / np.sqrt(2.0)

REALITY_TOL = 1e-8
OVERLAP_FLOOR = 1e-12


class UndefinedPhaseError(ArithmeticError):
    """The overlap whose argument is requested vanishes."""


def principal(x):
    """Map angles to ``(-pi, pi]``."""
    y = np.pi - np.mod(np.pi - np.asarray(x, dtype=float), 2 * np.pi)
    return float(y) if np.ndim(y) == 0 else y


@dataclass(frozen=True)
class InitialState:
    """Rotated-frame amplitudes ``psi_2(0) = (alpha, beta)``."""

    alpha: complex
    beta: complex

    def __post_init__(self):
        norm = abs(self.alpha) ** 2 + abs(self.beta) ** 2
        if abs(norm - 1.0) > 1e-12:
            raise ValueError(f"initial state must be normalised, |alpha|^2 + |beta|^2 = {norm!r}")

    @classmethod
    def from_lab(cls, c0: complex, c1: complex) -> InitialState:
        a, b = ROTATION @ np.array([c0, c1], dtype=complex)
        return cls(complex(a), complex(b))

    @classmethod
    def ground(cls) -> InitialState:
        """Lab-frame ``|0>``, i.e. ``alpha = beta = 1/sqrt(2)``."""
        return cls.from_lab(1, 0)

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.alpha, self.beta], dtype=complex)

    @property
    def lab(self) -> np.ndarray:
        return ROTATION.conj().T @ self.vector

    def with_global_phase(self, chi: float) -> InitialState:
        z = np.exp(1j * chi)
        return InitialState(self.alpha * z, self.beta * z)


@dataclass(frozen=True)
class PhaseReport:
    total: float
    dynamical: float
    geometric: float
    dyn_imag_residue: float
    eval_time: float
    suspect: bool = False


@dataclass(frozen=True)
class OverlapDerivative:
    """``U^dag U' = [[a11, a12], [-conj(a12), conj(a11)]]``."""

    a11: QPSeries
    a12: QPSeries

    def matrix(self, t) -> np.ndarray:
        a11, a12 = self.a11(t), self.a12(t)
        m = np.array([[a11, a12], [-np.conj(a12), np.conj(a11)]])
        return np.moveaxis(m, (0, 1), (-2, -1))

    def max_real_a11(self, t) -> float:
        return float(np.max(np.abs(np.real(self.a11(t)))))


def overlap_derivative(sol: FloquetSolution) -> OverlapDerivative:
    u, v = sol.U11, sol.U12
    du, dv = u.derivative(), v.derivative()
    a11 = u.conj() * du + v * dv.conj()
    a12 = u.conj() * dv - v * du.conj()
    return OverlapDerivative(a11, a12)


def total_phase(sol: FloquetSolution, state: InitialState, t: float) -> float:
    """``arg <psi(0)|U(t) psi(0)>`` from the real/imaginary parts of U11, U12.

    The combination is written in terms of the lab-frame amplitudes
    ``(a, b)`` of ``psi(0)``::

        Re U11 + i(-2 Re(a* b) Im U11 + 2 Im(a* b) Re U12 + (2|a|^2 - 1) Im U12)
    """
    a, b = state.lab
    u11, u12 = sol.U11(t), sol.U12(t)
    ab = np.conj(a) * b
    z = u11.real + 1j * (-2 * ab.real * u11.imag + 2 * ab.imag * u12.real
                         + (2 * abs(a) ** 2 - 1) * u12.imag)
    if abs(z) < OVERLAP_FLOOR:
        raise UndefinedPhaseError(f"overlap vanishes at t={t}: |<psi(0)|psi(t)>| = {abs(z):.3g}")
    return principal(np.angle(z))


def _integrals(sol: FloquetSolution, t, od: OverlapDerivative | None = None):
    od = od or _overlap_cache(sol)
    return (od.a11.antiderivative(ZERO_THRESHOLD)(t),
            od.a12.antiderivative(ZERO_THRESHOLD)(t))


_DERIVATIVES: weakref.WeakKeyDictionary = weakref.WeakKeyDictionary()


def _overlap_cache(sol: FloquetSolution) -> OverlapDerivative:
    od = _DERIVATIVES.get(sol)
    if od is None:
        od = _DERIVATIVES[sol] = overlap_derivative(sol)
    return od


def dynamical_phase(sol: FloquetSolution, state: InitialState, t: float) -> tuple[float, float]:
    """Dynamical phase and the magnitude of its discarded imaginary part.

    ``i int_0^t <psi_2(0)| U^dag U' |psi_2(0)>`` expanded in the analytic
    antiderivatives ``I11``, ``I12`` of ``a11``, ``a12``::

        i (|alpha|^2 I11 + |beta|^2 conj(I11) + 2i Im(conj(alpha) beta I12))
    """
    i11, i12 = _integrals(sol, t)
    al, be = state.alpha, state.beta
    s = abs(al) ** 2 * i11 + abs(be) ** 2 * np.conj(i11) + 2j * np.imag(np.conj(al) * be * i12)
    val = 1j * s
    return float(np.real(val)), float(abs(np.imag(val)))


def dynamical_phase_as_printed(sol: FloquetSolution, state: InitialState, t: float) -> complex:
    """Literal transcription of the closed form as usually printed, with lab amplitudes.

    Kept for comparison only: it does not reproduce ``i int <psi|psi'>``
    (for ``epsilon = 0`` it returns ``(A/omega) sin(omega t)`` instead of 0).
    """
    i11, i12 = _integrals(sol, t)
    a, b = state.lab
    ab = np.conj(a) * b
    return (abs(a) ** 2 * (-i11.imag + 1j * i12.real)
            - 2j * ab.real * i11.real - 2j * ab.imag * i12.imag
            + abs(b) ** 2 * (-i11.imag - 1j * i12.real))


def phase_report(sol: FloquetSolution, state: InitialState | None = None, t: float | None = None,
                 reality_tol: float = REALITY_TOL) -> PhaseReport:
    """Total, dynamical and geometric phase at ``t`` (default ``t_omega = 2 pi / omega``)."""
    state = state or InitialState.ground()
    t = sol.t_omega if t is None else float(t)
    tot = total_phase(sol, state, t)
    dyn, residue = dynamical_phase(sol, state, t)
    return PhaseReport(tot, dyn, tot - dyn, residue, t, residue > reality_tol)


def default_grid():
    """epsilon = 0.01..0.40 (step 0.01), omega = 1.0..10.0 (step 0.5)."""
    eps = np.round(np.arange(1, 41) * 0.01, 10)
    omegas = np.round(1.0 + 0.5 * np.arange(19), 10)
    return eps, omegas


@dataclass(frozen=True)
class SweepPoint:
    epsilon: float
    omega: float
    report: PhaseReport | None
    omega_rabi: float = math.nan
    residual: float = math.nan
    cutoff: int = 0
    error: str | None = None


def _sweep_one(args) -> SweepPoint:
    eps, omega, state, F0, A, cutoff = args
    try:
        sol = solve_floquet(TwoLevelParams.make(eps, omega, F0, A), cutoff)
        rep = phase_report(sol, state)
        return SweepPoint(eps, omega, rep, sol.omega_rabi, sol.residual, sol.cutoff)
    except (ArithmeticError, ValueError) as exc:
        return SweepPoint(eps, omega, None, error=f"{type(exc).__name__}: {exc}")


def sweep_grid(eps_range, omega_range, state: InitialState | None = None, F0: float = 0.0,
               A: float = 1.0, cutoff: int | None = None, workers: int | None = None):
    """Phase reports over the epsilon x omega grid, epsilon varying fastest.

    Each point is evaluated at its own ``t_omega``. Failures are recorded on
    the point and never abort the sweep.
    """
    eps_range = np.atleast_1d(np.asarray(eps_range, dtype=float))
    omega_range = np.atleast_1d(np.asarray(omega_range, dtype=float))
    if eps_range.size == 0 or omega_range.size == 0:
        raise ValueError("sweep ranges must be non-empty")
    if np.any(omega_range <= 0):
        raise ValueError("omega values must be positive")
    state = state or InitialState.ground()
    jobs = [(float(e), float(w), state, F0, A, cutoff) for w in omega_range for e in eps_range]
    workers = workers or int(os.environ.get("FLOQPHASE_WORKERS", "1"))
    if workers <= 1:
        return [_sweep_one(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_sweep_one, jobs, chunksize=8))


def propagated_overlap(sol: FloquetSolution, state: InitialState, t) -> complex:
    """``<psi_2(0)|U(t) psi_2(0)>`` by direct matrix-vector products."""
    psi = state.vector
    return complex(psi.conj() @ evolution_operator_at(sol, t) @ psi)
