"""Brute-force reference propagators.

Adaptive DOP853 integration of the Schroedinger equation for the full
propagator matrix, used to check the quasi-periodic pipeline. The drive
term ``f(t) sz`` is removed exactly by the diagonal frame
``W(t) = exp(-i sz int_0^t f)``, so the integrator only resolves the slow
``eps`` coupling and ``U(t) = W(t) U_W(t)``. The delta
interaction of the composite system is applied as the exact unitary kick
``exp(-i kappa sx (x) sx)`` at ``t0``, never as a narrow pulse.

Alongside ``U`` the integrators accumulate

    G(t) = int_0^t U^dag(s) H(s) U(s) ds,

so the dynamical phase ``i int <psi|psi'> = int <psi|H|psi>`` of any initial
state is ``<psi0|G(t)|psi0>``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .floquet import SIGMA_X, SIGMA_Z, TwoLevelParams

__all__ = [
    "OracleConfig",
    "OracleRun",
    "IntegrationError",
    "integrate_single",
    "integrate_composite",
    "kick_operator",
    "closed_form_diagonal",
]

XX = np.kron(SIGMA_X, SIGMA_X)


class IntegrationError(RuntimeError):
    pass


@dataclass(frozen=True)
class OracleConfig:
    rel_tol: float = 1e-12
    abs_tol: float = 1e-14
    max_step: float | None = None

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.max_step is not None and not self.max_step > 0:
            raise ValueError("max_step must be positive")

    def step_for(self, t_omega: float) -> float:
        cap = t_omega / 20
        return cap if self.max_step is None else min(self.max_step, cap)


@dataclass(frozen=True)
class OracleRun:
    """Sampled propagators ``U[j] = U(t[j])`` and energy integrals ``G[j]``."""

    t: np.ndarray
    U: np.ndarray
    G: np.ndarray

    def state(self, psi0) -> np.ndarray:
        return self.U @ np.asarray(psi0, complex)

    def overlap(self, psi0) -> np.ndarray:
        psi0 = np.asarray(psi0, complex)
        return np.einsum("i,jik,k->j", psi0.conj(), self.U, psi0)

    def dynamical_phase(self, psi0) -> np.ndarray:
        psi0 = np.asarray(psi0, complex)
        return np.einsum("i,jik,k->j", psi0.conj(), self.G, psi0)

    def unitarity_defect(self) -> np.ndarray:
        d = self.U.shape[-1]
        UU = np.einsum("jki,jkl->jil", self.U.conj(), self.U)
        return np.abs(UU - np.eye(d)).max(axis=(1, 2))


def kick_operator(kappa: float) -> np.ndarray:
    """``exp(-i kappa sx (x) sx) = cos(kappa) 1 - i sin(kappa) sx (x) sx``."""
    return np.cos(kappa) * np.eye(4) - 1j * np.sin(kappa) * XX


def closed_form_diagonal(params: TwoLevelParams, t) -> np.ndarray:
    """Exact propagator for ``epsilon = 0``: ``exp(-i sz int_0^t f)``."""
    if params.epsilon != 0:
        raise ValueError("closed form only exists for epsilon = 0")
    phi = np.asarray(params.drive.integral(t), dtype=float)
    U = np.zeros(phi.shape + (2, 2), complex)
    U[..., 0, 0] = np.exp(-1j * phi)
    U[..., 1, 1] = np.exp(1j * phi)
    return U


def _propagate(gen, energy, dim, U0, G0, t_start, t_stop, t_eval, cfg, max_step):
    """Integrate ``U' = -i gen(t) U`` and ``G' = U^dag energy(t) U``.

    Returns the samples on ``t_eval`` and the state at ``t_stop``.
    """
    n = dim * dim

    def rhs(t, y):
        U = y[:n].reshape(dim, dim)
        return np.concatenate([(-1j * gen(t) @ U).ravel(), (U.conj().T @ energy(t) @ U).ravel()])

    y0 = np.concatenate([np.ravel(U0), np.ravel(G0)]).astype(complex)
    if t_stop == t_start:
        return np.repeat(y0[:, None], len(t_eval), axis=1), y0
    extra = not (len(t_eval) and t_eval[-1] == t_stop)
    t_all = np.append(t_eval, t_stop) if extra else t_eval
    res = solve_ivp(rhs, (t_start, t_stop), y0, method="DOP853", t_eval=t_all,
                    rtol=cfg.rel_tol, atol=cfg.abs_tol, max_step=max_step)
    if not res.success:
        raise IntegrationError(res.message)
    return (res.y[:, :-1] if extra else res.y), res.y[:, -1]


def _frame_phase(params: TwoLevelParams, t):
    # W(t) = diag(exp(-i theta), exp(i theta))
    return np.exp(-1j * params.drive.integral(t))


def _frame_generator(params: TwoLevelParams, t):
    """``eps W^dag sx W`` and the frame energy ``W^dag H W``."""
    w = _frame_phase(params, t)
    off = params.epsilon * np.conj(w) ** 2
    gen = np.array([[0, off], [np.conj(off), 0]])
    return gen, gen + float(params.drive(t)) * SIGMA_Z


def _grid(t_end, t_eval):
    if not t_end > 0:
        raise ValueError(f"t_end must be positive, got {t_end!r}")
    if t_eval is None:
        return np.linspace(0.0, t_end, 101)
    t_eval = np.asarray(t_eval, dtype=float)
    if np.any(np.diff(t_eval) < 0) or t_eval.min() < 0 or t_eval.max() > t_end:
        raise ValueError("t_eval must be sorted and lie in [0, t_end]")
    return t_eval


def _unpack(ys, dim):
    n = dim * dim
    U = ys[:n].T.reshape(-1, dim, dim)
    G = ys[n:].T.reshape(-1, dim, dim)
    return U, G


def integrate_single(params: TwoLevelParams, t_end: float, cfg: OracleConfig | None = None,
                     t_eval=None) -> OracleRun:
    """Propagator of ``eps sx + f(t) sz`` sampled on ``t_eval`` (default 101 points)."""
    cfg = cfg or OracleConfig()
    t_eval = _grid(t_end, t_eval)
    eps, drive = params.epsilon, params.drive

    def rhs(t, y):
        # y = (U_W row-major, G row-major); generator [[0, c], [conj c, 0]]
        u00, u01, u10, u11 = y[0], y[1], y[2], y[3]
        c = eps * np.exp(2j * drive.integral(t))
        cc = np.conj(c)
        f = drive.F0 + drive.A * np.cos(drive.omega * t)
        # rows of H_W U_W, with H_W = gen + f sz
        h0 = (c * u10 + f * u00, c * u11 + f * u01)
        h1 = (cc * u00 - f * u10, cc * u01 - f * u11)
        g = [np.conj(u00) * h0[0] + np.conj(u10) * h1[0],
             np.conj(u00) * h0[1] + np.conj(u10) * h1[1],
             np.conj(u01) * h0[0] + np.conj(u11) * h1[0],
             np.conj(u01) * h0[1] + np.conj(u11) * h1[1]]
        return np.array([-1j * c * u10, -1j * c * u11, -1j * cc * u00, -1j * cc * u01] + g)

    y0 = np.array([1, 0, 0, 1, 0, 0, 0, 0], dtype=complex)
    extra = not (len(t_eval) and t_eval[-1] == t_end)
    t_all = np.append(t_eval, t_end) if extra else t_eval
    res = solve_ivp(rhs, (0.0, t_end), y0, method="DOP853", t_eval=t_all, rtol=cfg.rel_tol,
                    atol=cfg.abs_tol, max_step=cfg.step_for(params.t_omega))
    if not res.success:
        raise IntegrationError(res.message)
    ys = res.y[:, :-1] if extra else res.y
    UW, G = _unpack(ys, 2)
    w = _frame_phase(params, t_eval)
    U = UW * np.stack([w, np.conj(w)], axis=-1)[:, :, None]
    return OracleRun(t_eval, U, G)


def composite_hamiltonian(params, t: float) -> np.ndarray:
    """4x4 rotated-frame Hamiltonian of two driven qubits without the coupling term."""
    a, b = params.sys_a, params.sys_b
    ha = a.epsilon * SIGMA_X + a.drive(t) * SIGMA_Z
    hb = b.epsilon * SIGMA_X + b.drive(t) * SIGMA_Z
    return np.kron(ha, np.eye(2)) + np.kron(np.eye(2), hb)


def _composite_frame(params, t):
    # diagonal of W_a (x) W_b, shape (4,) or (4, n)
    wa, wb = _frame_phase(params.sys_a, t), _frame_phase(params.sys_b, t)
    da, db = np.array([wa, np.conj(wa)]), np.array([wb, np.conj(wb)])
    return (da[:, None] * db[None, :]).reshape((4,) + np.shape(wa))


def integrate_composite(params, t_end: float, cfg: OracleConfig | None = None,
                        t_eval=None, method: str = "factorized") -> OracleRun:
    """Propagator of the two-qubit system, with the exact kick for a delta coupling.

    Samples at ``t >= t0`` are taken after the kick. The impulsive energy of
    the kick does not enter ``G``.

    ``method="factorized"`` integrates each qubit on its own: away from
    ``t0`` the Hamiltonian is ``H_a (x) 1 + 1 (x) H_b``, so with
    ``U0 = U_a (x) U_b`` and ``W = U0(t0)^dag K U0(t0)``::

        U(t) = U0(t) W,   G(t) = G0(t0) + W^dag (G0(t) - G0(t0)) W.

    ``method="full"`` integrates the 4x4 equation directly (slower; used to
    cross-check the factorisation).
    """
    from .twoqubit import Delta

    cfg = cfg or OracleConfig()
    t_eval = _grid(t_end, t_eval)
    inter = params.interaction
    kicked = inter is not None and params.kappa != 0
    if kicked:
        if not isinstance(inter, Delta):
            raise NotImplementedError("the oracle only handles no interaction or a delta kick")
        if not 0 < inter.t0 < t_end:
            raise ValueError(f"kick time t0={inter.t0} must lie in (0, t_end={t_end})")
    if method == "full":
        return _integrate_composite_full(params, t_end, cfg, t_eval, kicked)
    if method != "factorized":
        raise ValueError(f"unknown method {method!r}")

    grid = np.union1d(t_eval, [inter.t0]) if kicked else t_eval
    ra = integrate_single(params.sys_a, t_end, cfg, grid)
    rb = integrate_single(params.sys_b, t_end, cfg, grid)
    eye = np.eye(2)
    U0 = np.einsum("nij,nkl->nikjl", ra.U, rb.U).reshape(-1, 4, 4)
    G0 = (np.einsum("nij,kl->nikjl", ra.G, eye) + np.einsum("ij,nkl->nikjl", eye, rb.G)).reshape(-1, 4, 4)
    idx = np.searchsorted(grid, t_eval)
    U0, G0 = U0[idx], G0[idx]
    if not kicked:
        return OracleRun(t_eval, U0, G0)
    j0 = int(np.searchsorted(grid, inter.t0))
    Ua0 = np.kron(ra.U[j0], rb.U[j0])
    Ga0 = np.kron(ra.G[j0], eye) + np.kron(eye, rb.G[j0])
    W = Ua0.conj().T @ kick_operator(params.kappa) @ Ua0
    after = t_eval >= inter.t0
    U = U0.copy()
    G = G0.copy()
    U[after] = U0[after] @ W
    G[after] = Ga0 + W.conj().T @ (G0[after] - Ga0) @ W
    return OracleRun(t_eval, U, G)


def _integrate_composite_full(params, t_end, cfg, t_eval, kicked) -> OracleRun:
    step = cfg.step_for(min(params.sys_a.t_omega, params.sys_b.t_omega))
    eye = np.eye(2)

    def parts(t):
        ga, ea = _frame_generator(params.sys_a, t)
        gb, eb = _frame_generator(params.sys_b, t)
        return np.kron(ga, eye) + np.kron(eye, gb), np.kron(ea, eye) + np.kron(eye, eb)

    def gen(t):
        return parts(t)[0]

    def energy(t):
        return parts(t)[1]

    def to_lab(ts, UW):
        return _composite_frame(params, ts).T[:, :, None] * UW

    if not kicked:
        ys, _ = _propagate(gen, energy, 4, np.eye(4), np.zeros((4, 4)), 0.0, t_end, t_eval, cfg, step)
        UW, G = _unpack(ys, 4)
        return OracleRun(t_eval, to_lab(t_eval, UW), G)

    t0 = params.interaction.t0
    before = t_eval[t_eval < t0]
    after = t_eval[t_eval >= t0]
    ys1, y_t0 = _propagate(gen, energy, 4, np.eye(4), np.zeros((4, 4)), 0.0, t0, before, cfg, step)
    U0, G0 = y_t0[:16].reshape(4, 4), y_t0[16:].reshape(4, 4)
    w0 = _composite_frame(params, t0)
    U0 = (np.conj(w0)[:, None] * kick_operator(params.kappa) * w0[None, :]) @ U0
    ys2, _ = _propagate(gen, energy, 4, U0, G0, t0, t_end, after, cfg, step)
    U1, G1 = _unpack(ys1, 4)
    U2, G2 = _unpack(ys2, 4)
    UW = np.concatenate([U1, U2])
    return OracleRun(t_eval, to_lab(t_eval, UW), np.concatenate([G1, G2]))
