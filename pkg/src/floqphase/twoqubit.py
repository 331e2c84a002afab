"""Two driven qubits coupled through ``kappa v(t) sx (x) sx`` (rotated frame).

The coupling is treated in the interaction picture to first order in
``kappa``::

    U_I(t) = 1 - i kappa V1(t),   V1(t) = int_0^t v(s) K(s) ds,
    K(s) = (U_a^dag sx U_a)(s) (x) (U_b^dag sx U_b)(s),

with ``U_a^dag sx U_a = [[V11, V12], [conj(V12), -V11]]`` built from the
quasi-periodic series of each subsystem. For ``v = delta(t - t0)`` the
integral collapses to ``V1(t) = K(t0)`` for ``t >= t0``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import minimize_scalar

from .floquet import FloquetSolution, TwoLevelParams, evolution_operator_at, solve_floquet
from .phases import (ROTATION, InitialState, PhaseReport, UndefinedPhaseError, _overlap_cache,
                     dynamical_phase, principal)
from .qpseries import QPSeries, ZERO_THRESHOLD

__all__ = [
    "Delta",
    "Periodic",
    "CompositeParams",
    "DysonKernel",
    "GateReport",
    "RecurrenceNotFound",
    "BASIS_STATES",
    "dyson_kernel",
    "v1_operator",
    "ui_first_order",
    "composite_phases",
    "survival_probability",
    "composite_rabi",
    "gate_extract",
    "conditional_phase",
    "b_form",
    "basis_vector",
    "CompositeSystem",
]

BASIS_STATES = ("00", "01", "10", "11")
KAPPA_WARN = 0.2
B_FORM_TOL = 0.01


class RecurrenceNotFound(RuntimeError):
    def __init__(self, message, horizon):
        super().__init__(message)
        self.horizon = horizon


@dataclass(frozen=True)
class Delta:
    """``v(t) = delta(t - t0)``."""

    t0: float

    def __post_init__(self):
        if not self.t0 > 0:
            raise ValueError(f"t0 must be positive, got {self.t0!r}")


@dataclass(frozen=True)
class Periodic:
    """``v(t) = sum_n c_n exp(i n omega t)``; must be real, so ``c_{-n} = conj(c_n)``."""

    omega: float
    coefficients: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.omega > 0:
            raise ValueError("omega must be positive")
        for n, c in self.coefficients.items():
            if abs(np.conj(c) - self.coefficients.get(-n, 0)) > 1e-14:
                raise ValueError("coefficients must describe a real function")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return np.real(sum(c * np.exp(1j * n * self.omega * t) for n, c in self.coefficients.items()))


@dataclass(frozen=True)
class CompositeParams:
    sys_a: TwoLevelParams
    sys_b: TwoLevelParams
    kappa: float = 0.0
    interaction: Delta | Periodic | None = None

    def __post_init__(self):
        if not math.isfinite(self.kappa):
            raise ValueError("kappa must be finite")
        if abs(self.kappa) > KAPPA_WARN:
            warnings.warn(f"kappa = {self.kappa} is above the first-order range (<= {KAPPA_WARN})",
                          stacklevel=3)

    @classmethod
    def reference(cls, omega_b: float = 2.0, kappa: float = 0.1, t0: float | None = 0.5,
              omega_a: float = 1.0, eps_a: float = 0.01, eps_b: float = 0.01) -> CompositeParams:
        """Parameters of the delta-coupled example (F0 = 0, A = 1 for both drives)."""
        inter = Delta(t0) if t0 is not None else None
        return cls(TwoLevelParams.make(eps_a, omega_a), TwoLevelParams.make(eps_b, omega_b),
                   kappa, inter)

    def with_kappa(self, kappa: float) -> CompositeParams:
        return CompositeParams(self.sys_a, self.sys_b, kappa, self.interaction)

    def uncoupled(self) -> CompositeParams:
        return CompositeParams(self.sys_a, self.sys_b, 0.0, None)

    @property
    def t_omega(self) -> float:
        """Time unit ``2 pi / omega_a``."""
        return self.sys_a.t_omega


def basis_vector(label: str) -> np.ndarray:
    """Rotated-frame vector of the lab computational basis state ``label``."""
    if label not in BASIS_STATES:
        raise ValueError(f"basis state must be one of {BASIS_STATES}, got {label!r}")
    a = ROTATION[:, int(label[0])]
    b = ROTATION[:, int(label[1])]
    return np.kron(a, b)


def _factor_states(label: str) -> tuple[InitialState, InitialState]:
    bits = [int(c) for c in label]
    return tuple(InitialState(*ROTATION[:, bit]) for bit in bits)


def _sx_heisenberg(sol: FloquetSolution) -> tuple[QPSeries, QPSeries]:
    u, v = sol.U11, sol.U12
    V11 = -(u.conj() * v.conj()) - u * v
    V12 = u.conj() * u.conj() - v * v
    return V11, V12


@dataclass(frozen=True, eq=False)
class DysonKernel:
    """Series of ``U^dag sx U`` for both subsystems and the 4x4 integrand."""

    V11_a: QPSeries
    V12_a: QPSeries
    V11_b: QPSeries
    V12_b: QPSeries

    @staticmethod
    def _block(v11, v12):
        m = np.array([[v11, v12], [np.conj(v12), -v11]])
        return np.moveaxis(m, (0, 1), (-2, -1))

    def factors(self, t):
        return (self._block(self.V11_a(t), self.V12_a(t)),
                self._block(self.V11_b(t), self.V12_b(t)))

    def matrix(self, t) -> np.ndarray:
        """``(U_a^dag sx U_a)(t) (x) (U_b^dag sx U_b)(t)``; shape (4, 4) or (n, 4, 4)."""
        ma, mb = self.factors(t)
        out = np.einsum("...ij,...kl->...ikjl", ma, mb)
        return out.reshape(out.shape[:-4] + (4, 4))


def dyson_kernel(sol_a: FloquetSolution, sol_b: FloquetSolution) -> DysonKernel:
    return DysonKernel(*_sx_heisenberg(sol_a), *_sx_heisenberg(sol_b))


def v1_operator(kernel: DysonKernel, interaction, t: float, tol: float = 1e-10) -> np.ndarray:
    """Integrated interaction ``V1(t) = int_0^t v(s) K(s) ds``."""
    if interaction is None:
        return np.zeros((4, 4), complex)
    if isinstance(interaction, Delta):
        if t < interaction.t0:
            return np.zeros((4, 4), complex)
        return kernel.matrix(interaction.t0)
    if isinstance(interaction, Periodic):
        if t <= 0:
            return np.zeros((4, 4), complex)

        def rhs(s, y):
            return (interaction(s) * kernel.matrix(s)).ravel()

        res = solve_ivp(rhs, (0.0, t), np.zeros(16, complex), method="DOP853",
                        rtol=tol, atol=tol * 1e-2)
        if not res.success:
            raise ArithmeticError(f"quadrature of V1 failed: {res.message}")
        return res.y[:, -1].reshape(4, 4)
    raise TypeError(f"unsupported interaction {interaction!r}")


def ui_first_order(kernel: DysonKernel, interaction, kappa: float, t: float) -> np.ndarray:
    """``1 - i kappa V1(t)`` (not unitary; the defect is O(kappa^2))."""
    return np.eye(4) - 1j * kappa * v1_operator(kernel, interaction, t)


@dataclass(frozen=True)
class GateReport:
    phases: tuple[float, float, float, float]
    is_B_form: bool
    b_phi: float | None
    conditional_phase: float
    eval_time: float
    tolerance: float = B_FORM_TOL


class CompositeSystem:
    """Floquet solutions of both subsystems plus the first-order Dyson machinery.

    Solving the two Floquet problems is the expensive step; build one of
    these and reuse it for many basis states or evaluation times.
    """

    def __init__(self, params: CompositeParams, cutoff: int | None = None):
        self.params = params
        self.sol_a = solve_floquet(params.sys_a, cutoff)
        self.sol_b = solve_floquet(params.sys_b, cutoff)
        self.kernel = dyson_kernel(self.sol_a, self.sol_b)

    def with_kappa(self, kappa: float) -> CompositeSystem:
        other = object.__new__(CompositeSystem)
        other.params = self.params.with_kappa(kappa)
        other.sol_a, other.sol_b, other.kernel = self.sol_a, self.sol_b, self.kernel
        return other

    def with_interaction(self, interaction) -> CompositeSystem:
        other = self.with_kappa(self.params.kappa)
        p = self.params
        other.params = CompositeParams(p.sys_a, p.sys_b, p.kappa, interaction)
        return other

    # propagators

    def free_propagator(self, t) -> np.ndarray:
        ua = evolution_operator_at(self.sol_a, t)
        ub = evolution_operator_at(self.sol_b, t)
        out = np.einsum("...ij,...kl->...ikjl", ua, ub)
        return out.reshape(out.shape[:-4] + (4, 4))

    def v1(self, t: float) -> np.ndarray:
        return v1_operator(self.kernel, self.params.interaction, t)

    def first_order_propagator(self, t: float) -> np.ndarray:
        """``U_a (x) U_b (1 - i kappa V1)``."""
        return self.free_propagator(t) @ ui_first_order(self.kernel, self.params.interaction,
                                                        self.params.kappa, t)

    # overlaps and phases

    def overlap(self, label: str, t: float) -> complex:
        """First-order ``<psi(0)|psi(t)>``: product of subsystem overlaps minus the kappa term."""
        psi = basis_vector(label)
        sa, sb = _factor_states(label)
        za = sa.vector.conj() @ evolution_operator_at(self.sol_a, t) @ sa.vector
        zb = sb.vector.conj() @ evolution_operator_at(self.sol_b, t) @ sb.vector
        z = za * zb
        if self.params.kappa != 0 and self.params.interaction is not None:
            w = psi.conj() @ self.free_propagator(t) @ self.v1(t) @ psi
            z = z - 1j * self.params.kappa * w
        return complex(z)

    def overlaps(self, label: str, times) -> np.ndarray:
        """Vectorised :meth:`overlap` for a delta coupling or none."""
        times = np.asarray(times, dtype=float)
        inter = self.params.interaction
        if inter is not None and not isinstance(inter, Delta):
            return np.array([self.overlap(label, t) for t in times])
        psi = basis_vector(label)
        sa, sb = _factor_states(label)
        ua = evolution_operator_at(self.sol_a, times)
        ub = evolution_operator_at(self.sol_b, times)
        z = (np.einsum("i,nij,j->n", sa.vector.conj(), ua, sa.vector)
             * np.einsum("i,nij,j->n", sb.vector.conj(), ub, sb.vector))
        if self.params.kappa != 0 and inter is not None:
            phi = self.kernel.matrix(inter.t0) @ psi
            w = np.einsum("i,nij,j->n", psi.conj(), self.free_propagator(times), phi)
            z = z - 1j * self.params.kappa * np.where(times >= inter.t0, w, 0)
        return z

    def survival(self, label: str, times) -> np.ndarray:
        return np.abs(self.overlaps(label, times)) ** 2

    def _generator_integral(self, bra: np.ndarray, ket: np.ndarray, t0: float, t: float) -> complex:
        """``int_t0^t <bra|(A_a (x) 1 + 1 (x) A_b)(s)|ket> ds`` with ``A = U^dag U'``, analytically."""
        P = bra.reshape(2, 2).conj()
        F = ket.reshape(2, 2)
        # <bra|(A_a (x) 1)|ket> = sum_ij A_a[i, j] Ma[i, j], likewise for b
        Ma = P @ F.T
        Mb = P.T @ F
        total = 0j
        for sol, M in ((self.sol_a, Ma), (self.sol_b, Mb)):
            od = _overlap_cache(sol)
            series = (od.a11 * M[0, 0] + od.a12 * M[0, 1]
                      - od.a12.conj() * M[1, 0] + od.a11.conj() * M[1, 1])
            F_int = series.antiderivative(ZERO_THRESHOLD)
            total += F_int(t) - F_int(t0)
        return complex(total)

    def _correction_integral(self, label: str, t: float) -> tuple[complex, complex]:
        """``int <psi|A V1|psi>`` and ``int <psi|V1 A|psi>`` for the delta coupling.

        Both vanish before the kick; afterwards ``V1 = K(t0)`` is constant.
        Anti-self-adjointness of ``A`` makes the second the negative
        conjugate of the first; computing both measures that numerically.
        """
        t0 = self.params.interaction.t0
        if t <= t0:
            return 0j, 0j
        psi = basis_vector(label)
        phi = self.kernel.matrix(t0) @ psi
        return self._generator_integral(psi, phi, t0, t), self._generator_integral(phi, psi, t0, t)

    def _correction_periodic(self, label: str, t: float, tol: float = 1e-10) -> tuple[complex, complex]:
        psi = basis_vector(label)
        inter = self.params.interaction
        oda, odb = _overlap_cache(self.sol_a), _overlap_cache(self.sol_b)

        def rhs(s, y):
            V = y[:16].reshape(4, 4)
            ga, gb = oda.matrix(s), odb.matrix(s)
            G = np.kron(ga, np.eye(2)) + np.kron(np.eye(2), gb)
            dV = inter(s) * self.kernel.matrix(s)
            return np.concatenate([dV.ravel(), [psi.conj() @ G @ V @ psi]])

        res = solve_ivp(rhs, (0.0, t), np.zeros(17, complex), method="DOP853", rtol=tol, atol=tol * 1e-2)
        if not res.success:
            raise ArithmeticError(res.message)
        V = res.y[:16, -1].reshape(4, 4)
        return complex(res.y[16, -1]), complex(psi.conj() @ V @ psi)

    def third_term(self, label: str, t: float) -> float:
        """``int_0^t <psi|dV1/dt|psi>`` of the first-order dynamical phase.

        For the delta coupling ``V1`` is constant once the kick has happened,
        so the term is 0 by construction and is never integrated.
        """
        inter = self.params.interaction
        if inter is None or isinstance(inter, Delta):
            return 0.0
        return float(np.real(self._correction_periodic(label, t)[1]))

    def phases(self, label: str, t: float) -> PhaseReport:
        """Total, dynamical and geometric phase of a lab basis state, to first order in kappa."""
        z = self.overlap(label, t)
        if abs(z) < 1e-12:
            raise UndefinedPhaseError(f"overlap vanishes at t={t}")
        total = principal(np.angle(z))
        sa, sb = _factor_states(label)
        da, ra = dynamical_phase(self.sol_a, sa, t)
        db, rb = dynamical_phase(self.sol_b, sb, t)
        dyn, residue = da + db, ra + rb
        kappa, inter = self.params.kappa, self.params.interaction
        if kappa != 0 and inter is not None:
            if isinstance(inter, Delta):
                corr, rev = self._correction_integral(label, t)
                # i * (i kappa) * (rev - corr) is real when rev = -conj(corr)
                residue += abs(kappa * np.imag(corr - rev))
                third = self.third_term(label, t)
            else:
                corr, third = self._correction_periodic(label, t)
                residue += abs(np.imag(third)) * abs(kappa)
                third = float(np.real(third))
            dyn += 2 * kappa * corr.real + kappa * third
        return PhaseReport(total, dyn, total - dyn, residue, float(t), residue > 1e-8)


def composite_phases(params: CompositeParams, basis_state: str, t: float,
                     system: CompositeSystem | None = None) -> PhaseReport:
    system = system or CompositeSystem(params)
    return system.phases(basis_state, t)


def survival_probability(params: CompositeParams, basis_state: str, t,
                         system: CompositeSystem | None = None):
    """``|<psi(0)|U(t) psi(0)>|^2`` to first order; values outside [-kappa^2, 1+kappa^2] warn."""
    system = system or CompositeSystem(params)
    p = system.survival(basis_state, np.atleast_1d(t))
    k2 = params.kappa ** 2
    if np.any(p > 1 + k2 + 1e-12) or np.any(p < -k2):
        warnings.warn("survival probability left [-kappa^2, 1 + kappa^2]; first-order truncation "
                      "is unreliable here", stacklevel=2)
    p = np.clip(p, 0.0, 1.0)
    return float(p[0]) if np.ndim(t) == 0 else p


def common_period(params: CompositeParams, max_den: int = 16) -> float:
    """Smallest common period of both drives, or ``t_omega_a`` if incommensurate."""
    wa, wb = params.sys_a.omega, params.sys_b.omega
    r = Fraction(wb / wa).limit_denominator(max_den)
    if abs(float(r) - wb / wa) > 1e-12 * wb / wa:
        return params.sys_a.t_omega
    # wb / wa = p / q  ->  common period 2 pi q / wa
    return 2 * np.pi * r.denominator / wa


def composite_rabi(params: CompositeParams, basis_state: str = "00", horizon: float | None = None,
                   system: CompositeSystem | None = None):
    """Rabi frequency of the composite system from its survival probability.

    The survival probability is sampled stroboscopically at multiples of the
    common drive period, which removes the micromotion, up to ``horizon``
    (default 4000 ``t_omega_a``). A zero-padded FFT of the Hann-windowed
    samples locates the dominant slow frequency ``nu`` (coarse scan), which
    is then refined by maximising the windowed Fourier amplitude on the
    continuum. The window suppresses leakage from the weaker frequencies of
    the partner subsystem, which would otherwise bias ``nu``. A Rabi
    oscillation ``P ~ cos^2(Omega t)`` beats at ``nu = 2 Omega``, so
    ``Omega = nu / 2`` and ``T_Omega = 2 pi / Omega`` is one full cycle of
    the propagator (two recurrences of ``P``).

    Returns
    -------
    (Omega, T_Omega)

    Raises
    ------
    RecurrenceNotFound
        The survival probability is flat, or its dominant frequency does not
        complete two oscillations within the horizon.
    """
    system = system or CompositeSystem(params)
    tau = common_period(params)
    horizon = 4000 * params.t_omega if horizon is None else float(horizon)
    n = int(horizon // tau)
    if n < 8:
        raise RecurrenceNotFound(f"horizon {horizon:g} holds fewer than 8 drive periods", horizon)
    times = tau * np.arange(1, n + 1)
    x = system.survival(basis_state, times)
    x = x - x.mean()
    if np.max(np.abs(x)) < 1e-13:
        raise RecurrenceNotFound(f"survival probability is constant up to {horizon:g}", horizon)
    x = x * np.hanning(n)

    pad = 16 * n
    spec = np.abs(np.fft.rfft(x, pad))
    nus = 2 * np.pi * np.fft.rfftfreq(pad, d=tau)
    lowest = 4 * np.pi / times[-1]  # two full oscillations inside the horizon
    spec[nus < lowest] = 0.0
    j = int(np.argmax(spec))
    if spec[j] == 0.0:
        raise RecurrenceNotFound(f"no survival recurrence within horizon {horizon:g}", horizon)

    def power(nu):
        return -abs(np.exp(-1j * nu * times) @ x)

    dnu = nus[1] - nus[0]
    res = minimize_scalar(power, bounds=(max(nus[j] - dnu, lowest), nus[j] + dnu), method="bounded",
                          options={"xatol": 1e-12 * nus[j]})
    nu = float(res.x) if res.fun <= power(nus[j]) else float(nus[j])
    omega = nu / 2
    return omega, 2 * np.pi / omega


def gate_extract(params: CompositeParams, t: float | None = None,
                 system: CompositeSystem | None = None, tol: float = B_FORM_TOL) -> GateReport:
    """Total phases of the four basis states and the conditional-phase verdict.

    ``t`` defaults to the composite recurrence time from :func:`composite_rabi`.
    """
    system = system or CompositeSystem(params)
    if t is None:
        _, t = composite_rabi(params, system=system)
    ph = tuple(system.phases(label, t).total for label in BASIS_STATES)
    is_b = b_form(ph, tol)
    return GateReport(ph, is_b, ph[0] if is_b else None, conditional_phase(ph), float(t), tol)


def conditional_phase(phases) -> float:
    """``phi00 - phi01 - phi10 + phi11``, blind to global and single-qubit phases."""
    p00, p01, p10, p11 = phases
    return p00 - p01 - p10 + p11


def b_form(phases, tol: float = B_FORM_TOL) -> bool:
    """Whether ``diag(exp(i phi))`` is ``B(phi) = diag(e^{i phi}, 1, 1, e^{-i phi})`` within ``tol``."""
    p00, p01, p10, p11 = phases
    return bool(abs(principal(p01)) <= tol and abs(principal(p10)) <= tol
                and abs(principal(p11 + p00)) <= tol)
