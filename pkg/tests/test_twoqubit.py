import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from conftest import reference_oracle, reference_system
from floqphase.floquet import SIGMA_X, TwoLevelParams, evolution_operator_at, solve_floquet
from floqphase.oracle import integrate_single
from floqphase.phases import phase_report
from floqphase.twoqubit import (BASIS_STATES, CompositeParams, CompositeSystem, Delta, Periodic,
                                RecurrenceNotFound, b_form, basis_vector, common_period, composite_phases,
                                composite_rabi, conditional_phase, dyson_kernel, gate_extract,
                                survival_probability, ui_first_order, v1_operator)
from floqphase.twoqubit import _factor_states

XX = np.kron(SIGMA_X, SIGMA_X)
T0 = 0.5


def hermitian_defect(m):
    return np.max(np.abs(m - np.conj(np.swapaxes(m, -1, -2))))


@pytest.fixture(scope="module")
def uncoupled():
    return CompositeSystem(CompositeParams.reference(kappa=0.0, t0=None))


class TestParams:
    def test_delta_needs_positive_time(self):
        with pytest.raises(ValueError):
            Delta(0.0)

    def test_periodic_must_be_real(self):
        with pytest.raises(ValueError):
            Periodic(1.0, {1: 0.5j, -1: 0.5j})
        v = Periodic(2.0, {0: 0.1, 1: 0.25, -1: 0.25})
        assert v(0.0) == pytest.approx(0.6)

    def test_large_kappa_warns(self):
        with pytest.warns(UserWarning):
            CompositeParams.reference(kappa=0.3)

    def test_basis_vectors_are_rotated_per_factor(self):
        np.testing.assert_allclose(basis_vector("00"), np.full(4, 0.5))
        np.testing.assert_allclose(basis_vector("11"), [0.5, -0.5, -0.5, 0.5])
        with pytest.raises(ValueError):
            basis_vector("02")

    def test_common_period(self):
        assert common_period(CompositeParams.reference(omega_b=2.0)) == pytest.approx(2 * np.pi)
        assert common_period(CompositeParams.reference(omega_b=1.5)) == pytest.approx(4 * np.pi)


class TestKernel:
    def test_origin(self, uncoupled):
        assert uncoupled.kernel.V11_a(0.0) == pytest.approx(0, abs=1e-12)
        assert uncoupled.kernel.V12_b(0.0) == pytest.approx(1, abs=1e-12)
        np.testing.assert_allclose(uncoupled.kernel.matrix(0.0), XX, atol=1e-12)

    def test_zero_epsilon_closed_form(self):
        p = TwoLevelParams.make(0.0, 2.0)
        sol = solve_floquet(p)
        k = dyson_kernel(sol, sol)
        t = np.linspace(0, 9, 31)
        np.testing.assert_allclose(k.V12_a(t), np.exp(2j * np.sin(2 * t) / 2), atol=1e-12)
        assert np.max(np.abs(k.V11_a(t))) <= 1e-12

    def test_heisenberg_sigma_x(self, uncoupled):
        t = np.linspace(0, 300, 11)
        ua = evolution_operator_at(uncoupled.sol_a, t)
        ub = evolution_operator_at(uncoupled.sol_b, t)
        xa = np.conj(np.swapaxes(ua, 1, 2)) @ SIGMA_X @ ua
        xb = np.conj(np.swapaxes(ub, 1, 2)) @ SIGMA_X @ ub
        expect = np.einsum("nij,nkl->nikjl", xa, xb).reshape(-1, 4, 4)
        np.testing.assert_allclose(uncoupled.kernel.matrix(t), expect, atol=1e-8)

    def test_self_adjoint(self, uncoupled):
        t = np.random.default_rng(2).uniform(0, 1000, 25)
        assert hermitian_defect(uncoupled.kernel.matrix(t)) <= 1e-10

    def test_matches_oracle_at_kick(self, uncoupled):
        p = uncoupled.params
        ua = integrate_single(p.sys_a, T0, t_eval=[T0]).U[0]
        ub = integrate_single(p.sys_b, T0, t_eval=[T0]).U[0]
        ref = np.kron(ua.conj().T @ SIGMA_X @ ua, ub.conj().T @ SIGMA_X @ ub)
        assert np.max(np.abs(uncoupled.kernel.matrix(T0) - ref)) <= 1e-7


class TestV1:
    def test_delta_before_kick(self, uncoupled):
        np.testing.assert_array_equal(v1_operator(uncoupled.kernel, Delta(T0), 0.3), np.zeros((4, 4)))

    def test_delta_after_kick_is_constant(self, uncoupled):
        k = uncoupled.kernel
        np.testing.assert_array_equal(v1_operator(k, Delta(T0), 2.0), v1_operator(k, Delta(T0), 900.0))
        np.testing.assert_array_equal(v1_operator(k, Delta(T0), 2.0), k.matrix(T0))

    def test_early_kick(self, uncoupled):
        np.testing.assert_allclose(v1_operator(uncoupled.kernel, Delta(1e-12), 1.0), XX, atol=1e-10)

    def test_no_interaction(self, uncoupled):
        np.testing.assert_array_equal(v1_operator(uncoupled.kernel, None, 1.0), np.zeros((4, 4)))

    def test_periodic_quadrature(self, uncoupled):
        v = Periodic(1.0, {1: 0.5, -1: 0.5})
        V = v1_operator(uncoupled.kernel, v, 3.0)
        assert hermitian_defect(V) <= 1e-10
        # compare one entry with adaptive quadrature
        f = lambda s: v(s) * uncoupled.kernel.matrix(s)[0, 3]
        ref = quad(lambda s: f(s).real, 0, 3, epsabs=1e-12)[0] + 1j * quad(lambda s: f(s).imag, 0, 3,
                                                                           epsabs=1e-12)[0]
        assert abs(V[0, 3] - ref) <= 1e-9


class TestFirstOrderPropagator:
    def test_zero_coupling(self, uncoupled):
        np.testing.assert_array_equal(ui_first_order(uncoupled.kernel, Delta(T0), 0.0, 5.0), np.eye(4))

    @pytest.mark.parametrize("kappa", [0.2, 0.1, 0.01])
    def test_unitarity_defect_is_second_order(self, uncoupled, kappa):
        U = ui_first_order(uncoupled.kernel, Delta(T0), kappa, 50.0)
        assert np.linalg.norm(U.conj().T @ U - np.eye(4), 2) <= 2 * kappa ** 2 + 1e-8

    def test_eigenvalue_moduli(self, uncoupled):
        kappa = 0.15
        V = v1_operator(uncoupled.kernel, Delta(T0), 10.0)
        lam = np.linalg.eigvalsh(V)
        mu = np.linalg.eigvals(ui_first_order(uncoupled.kernel, Delta(T0), kappa, 10.0))
        np.testing.assert_allclose(np.sort(np.abs(mu)), np.sort(np.sqrt(1 + kappa ** 2 * lam ** 2)),
                                   atol=1e-12)
        assert np.all(np.abs(mu) >= 1 - 1e-12)

    def test_distance_to_exact_kick_is_second_order(self, reference):
        system, _, T = reference
        exact0 = reference_oracle(2.0, 0.0, (T,)).U[0]
        dist = []
        for kappa in (0.1, 0.05):
            exact = reference_oracle(2.0, kappa, (T,)).U[0]
            u_exact = exact0.conj().T @ exact  # interaction-picture propagator
            u_first = ui_first_order(system.kernel, Delta(T0), kappa, T)
            dist.append(np.max(np.abs(u_first - u_exact)))
        assert dist[0] <= 0.1 ** 2
        assert 3.0 <= dist[0] / dist[1] <= 5.0


class TestCompositePhases:
    @pytest.mark.parametrize("label", BASIS_STATES)
    def test_uncoupled_is_a_sum(self, uncoupled, label):
        sa, sb = _factor_states(label)
        for t in (1.0, uncoupled.params.t_omega, 700.0):
            rep = uncoupled.phases(label, t)
            ra, rb = phase_report(uncoupled.sol_a, sa, t), phase_report(uncoupled.sol_b, sb, t)
            tot = np.angle(np.exp(1j * (ra.total + rb.total)))
            assert abs(np.angle(np.exp(1j * (rep.total - tot)))) <= 1e-10
            assert rep.dynamical == pytest.approx(ra.dynamical + rb.dynamical, abs=1e-10)

    def test_zero_kappa_with_a_kick_scheduled(self, uncoupled):
        kicked = uncoupled.with_interaction(Delta(T0))
        assert kicked.phases("01", 300.0) == uncoupled.phases("01", 300.0)

    def test_function_form(self, uncoupled):
        rep = composite_phases(uncoupled.params, "10", 40.0, system=uncoupled)
        assert rep == uncoupled.phases("10", 40.0)

    @pytest.mark.parametrize("kappa", [1e-3, 1e-4])
    def test_small_kappa_limit(self, uncoupled, reference, kappa):
        _, _, T = reference
        coupled = uncoupled.with_interaction(Delta(T0)).with_kappa(kappa)
        for t in (uncoupled.params.t_omega, T):
            for label in BASIS_STATES:
                a, b = coupled.phases(label, t), uncoupled.phases(label, t)
                assert abs(a.total - b.total) <= 10 * kappa
                assert abs(a.dynamical - b.dynamical) <= 10 * kappa
                assert abs(a.geometric - b.geometric) <= 10 * kappa

    def test_uncoupled_antisymmetry(self, uncoupled, reference):
        _, _, T = reference
        ph = {label: uncoupled.phases(label, T).total for label in BASIS_STATES}
        assert ph["11"] == pytest.approx(-ph["00"], abs=1e-8)
        assert ph["10"] == pytest.approx(-ph["01"], abs=1e-8)

    def test_total_phase_near_exact_kick(self, reference):
        system, _, T = reference
        run = reference_oracle(2.0, 0.1, (T,))
        ref = np.angle(run.overlap(basis_vector("00"))[0])
        assert abs(system.phases("00", T).total - ref) <= 0.02

    def test_correction_is_real(self, reference):
        system, _, T = reference
        for label in BASIS_STATES:
            rep = system.phases(label, T)
            assert rep.dyn_imag_residue <= 1e-8
            assert rep.geometric == rep.total - rep.dynamical

    def test_third_term_short_circuits_for_delta(self, reference, monkeypatch):
        system, _, T = reference

        def boom(*args, **kwargs):
            raise AssertionError("delta coupling must not integrate the third term")

        monkeypatch.setattr(CompositeSystem, "_correction_periodic", boom)
        assert system.third_term("00", T) == 0.0
        system.phases("00", T)

    def test_third_term_quadrature_double_check(self, reference):
        system, _, _ = reference
        psi = basis_vector("00")
        h = 1e-4

        def rate(s):
            d = system.v1(s + h) - system.v1(s - h)
            return (psi.conj() @ d @ psi).real / (2 * h)

        val = quad(rate, T0 + 2 * h, 40.0, limit=200)[0]
        assert abs(val) <= 1e-10

    def test_periodic_coupling_runs(self, uncoupled):
        v = Periodic(1.0, {1: 0.5, -1: 0.5})
        system = uncoupled.with_interaction(v).with_kappa(0.05)
        rep = system.phases("00", 4.0)
        assert rep.dyn_imag_residue <= 1e-8
        assert system.third_term("00", 4.0) != 0.0

    def test_vectorised_overlaps(self, reference):
        system, _, _ = reference
        t = np.array([0.2, 3.0, 77.0])
        np.testing.assert_allclose(system.overlaps("01", t), [system.overlap("01", x) for x in t], atol=1e-14)


class TestSurvival:
    def test_initially_one(self, reference):
        system, _, _ = reference
        assert survival_probability(system.params, "00", 0.0, system=system) == pytest.approx(1.0, abs=1e-12)

    def test_uncoupled_factorises(self, uncoupled):
        t = np.linspace(0, 500, 23)
        sa, sb = _factor_states("01")
        pa = np.abs([total_overlap(uncoupled.sol_a, sa, x) for x in t]) ** 2
        pb = np.abs([total_overlap(uncoupled.sol_b, sb, x) for x in t]) ** 2
        p = survival_probability(uncoupled.params, "01", t, system=uncoupled)
        np.testing.assert_allclose(p, pa * pb, atol=1e-12)


def total_overlap(sol, state, t):
    return state.vector.conj() @ evolution_operator_at(sol, t) @ state.vector


class TestRabi:
    def test_identical_factors(self):
        p = CompositeParams(TwoLevelParams.make(0.05, 2.0), TwoLevelParams.make(0.05, 2.0))
        omega, T = composite_rabi(p, "00")
        single = solve_floquet(p.sys_a).omega_rabi
        assert omega == pytest.approx(single, rel=0.01)
        assert T * omega == pytest.approx(2 * np.pi, rel=1e-15)

    def test_reference_frequency(self, reference):
        _, omega, T = reference
        assert 0.0017 <= omega <= 0.0027
        assert T * omega == pytest.approx(2 * np.pi, rel=1e-15)

    def test_flat_survival(self):
        p = CompositeParams(TwoLevelParams.make(0.0, 1.0), TwoLevelParams.make(0.0, 2.0))
        with pytest.raises(RecurrenceNotFound) as info:
            composite_rabi(p)
        assert info.value.horizon == pytest.approx(4000 * 2 * np.pi)

    def test_short_horizon(self, reference):
        system, _, _ = reference
        with pytest.raises(RecurrenceNotFound):
            composite_rabi(system.params, horizon=20.0, system=system)


class TestGate:
    def test_equal_frequencies_uncoupled(self):
        system, _, T = reference_system(1.0, 0.1)
        g = gate_extract(system.params.uncoupled(), T, system=system.with_kappa(0.0))
        assert g.phases == pytest.approx((0.027, 0.0, 0.0, -0.027), abs=5e-4)
        assert g.is_B_form
        assert g.b_phi == pytest.approx(0.027, abs=5e-4)
        assert g.eval_time == T

    def test_reference_coupled_values(self):
        ph = (-0.116, 0.151, 0.151, -0.116)
        assert conditional_phase(ph) == pytest.approx(-0.534)
        assert not b_form(ph)

    def test_different_frequencies_uncoupled(self):
        system, _, T = reference_system(5.0, 0.1)
        g = gate_extract(system.params, T, system=system.with_kappa(0.0))
        assert g.phases == pytest.approx((-1.816, 1.843, -1.843, 1.816), abs=5e-4)
        assert not g.is_B_form
        assert g.b_phi is None

    def test_default_time_is_the_recurrence(self, reference):
        system, _, T = reference
        assert gate_extract(system.params, system=system).eval_time == T


angles = st.floats(-3, 3, allow_nan=False)


@settings(max_examples=50, deadline=None)
@given(st.tuples(angles, angles, angles, angles), angles, angles, angles)
def test_conditional_phase_ignores_local_phases(ph, g, a, b):
    # phi_ij -> phi_ij + g + a * i + b * j
    shifted = (ph[0] + g, ph[1] + g + b, ph[2] + g + a, ph[3] + g + a + b)
    assert conditional_phase(shifted) == pytest.approx(conditional_phase(ph), abs=1e-12)
