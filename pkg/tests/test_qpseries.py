import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from floqphase.qpseries import (FrequencyMismatchError, QPSeries, SecularSeries, qp_antiderivative,
                                qp_combine, qp_evaluate)

OMEGA = 2.0
NU = 0.37 * np.sqrt(2.0)


def random_series(rng, n_terms, omega=OMEGA, nu=NU, K=6, N=2):
    ks = rng.integers(-K, K + 1, n_terms)
    ns = rng.integers(-N, N + 1, n_terms)
    cs = rng.normal(size=n_terms) + 1j * rng.normal(size=n_terms)
    return QPSeries.from_terms(zip(ns, ks, cs), omega, nu)


def brute(terms, omega, nu, t):
    t = np.asarray(t, dtype=float)
    return sum(c * np.exp(1j * (k * omega + n * nu) * t) for n, k, c in terms)


coeff = st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False)
term = st.tuples(st.integers(-2, 2), st.integers(-8, 8), coeff)
series = st.lists(term, max_size=8).map(lambda ts: QPSeries.from_terms(ts, OMEGA, NU))
times = st.floats(0, 200, allow_nan=False)


class TestConstruction:
    def test_evaluation_is_the_sum_of_terms(self):
        terms = [(1, 0, 0.5), (-1, 2, 1j), (0, -3, 2 - 1j)]
        s = QPSeries.from_terms(terms, OMEGA, NU)
        t = np.linspace(0, 30, 17)
        np.testing.assert_allclose(s(t), brute(terms, OMEGA, NU, t), atol=1e-13)

    def test_repeated_keys_merge(self):
        s = QPSeries.from_terms([(0, 1, 1.0), (0, 1, 2.0)], OMEGA)
        assert len(s.terms()) == 1
        assert s.coefficient(0, 1) == 3.0

    def test_cutoff_truncates_and_records_mass(self):
        s = QPSeries.from_terms([(0, 0, 1.0), (0, 5, 0.25)], OMEGA, cutoff=3)
        assert s.k_max <= 3
        assert s.residual == pytest.approx(0.25)

    def test_tiny_coefficients_are_dropped(self):
        s = QPSeries.from_terms([(0, 0, 1.0), (0, 1, 1e-16)], OMEGA)
        assert s.coefficient(0, 1) == 0

    def test_nonpositive_omega_rejected(self):
        with pytest.raises(ValueError):
            QPSeries.zero(0.0)


class TestCombine:
    def test_opposite_frequencies_cancel_to_a_constant(self):
        up = QPSeries.from_terms([(1, 0, 1.0)], OMEGA, NU)
        down = QPSeries.from_terms([(-1, 0, 1.0)], OMEGA, NU)
        prod = qp_combine(up, down, "mul")
        assert prod.terms() == [(0, 0, 1.0)]
        assert prod.frequency_grid()[prod.n_max, prod.k_max] == 0.0

    def test_additive_inverse_is_empty(self):
        c = 0.3 - 0.8j
        a = QPSeries.from_terms([(0, 1, c)], OMEGA)
        b = QPSeries.from_terms([(0, 1, -c)], OMEGA)
        s = qp_combine(a, b, "add")
        assert s.is_zero
        assert s.terms() == []

    def test_random_products_match_pointwise(self):
        rng = np.random.default_rng(11)
        a, b = random_series(rng, 5), random_series(rng, 5)
        t = rng.uniform(0, 100 * 2 * np.pi / OMEGA, 50)
        np.testing.assert_allclose(qp_combine(a, b, "mul")(t), a(t) * b(t), rtol=0, atol=1e-12 * 25)

    def test_mismatched_fundamentals_rejected(self):
        a = QPSeries.constant(1.0, 1.0)
        b = QPSeries.constant(1.0, 2.0)
        with pytest.raises(FrequencyMismatchError):
            qp_combine(a, b, "add")

    def test_unknown_op(self):
        a = QPSeries.constant(1.0, 1.0)
        with pytest.raises(ValueError):
            qp_combine(a, a, "div")

    def test_product_truncation_is_reported(self):
        a = QPSeries.from_terms([(0, 3, 1.0), (0, 0, 1.0)], OMEGA, cutoff=4)
        p = a.multiply(a)
        assert p.k_max <= 4
        assert p.residual == pytest.approx(1.0)  # the k = 6 term


class TestAntiderivative:
    def test_constant_becomes_secular(self):
        F = qp_antiderivative(QPSeries.constant(2.0, OMEGA), 1e-12)
        assert isinstance(F, SecularSeries)
        assert F.secular == 2.0
        assert F.oscillatory.is_zero

    def test_full_period_integral_vanishes(self):
        F = qp_antiderivative(QPSeries.from_terms([(0, 1, 1.0)], OMEGA))
        assert abs(qp_evaluate(F, 2 * np.pi / OMEGA)) < 1e-15

    def test_vanishes_at_origin(self):
        rng = np.random.default_rng(3)
        F = random_series(rng, 7).antiderivative()
        assert abs(F(0.0)) < 1e-14

    def test_matches_adaptive_quadrature(self):
        rng = np.random.default_rng(5)
        s = random_series(rng, 10)
        t = 7.3
        re = quad(lambda x: s(x).real, 0, t, epsabs=1e-12, epsrel=1e-12, limit=400)[0]
        im = quad(lambda x: s(x).imag, 0, t, epsabs=1e-12, epsrel=1e-12, limit=400)[0]
        assert abs(qp_antiderivative(s)(t) - (re + 1j * im)) <= 1e-10

    def test_near_zero_frequency_goes_secular(self):
        # k omega + n nu = 1e-14 is below the threshold
        s = QPSeries.from_terms([(1, -1, 1.0)], 1.0, 1.0 + 1e-14)
        F = s.antiderivative(1e-12)
        assert F.secular == 1.0

    def test_threshold_must_be_positive(self):
        with pytest.raises(ValueError):
            QPSeries.constant(1.0, 1.0).antiderivative(0.0)


class TestEvaluate:
    def test_empty_series(self):
        assert qp_evaluate(QPSeries.zero(OMEGA), 3.1) == 0

    def test_conjugate(self):
        rng = np.random.default_rng(8)
        s = random_series(rng, 6)
        t = rng.uniform(0, 50, 10)
        np.testing.assert_allclose(s.conj()(t), np.conj(s(t)), atol=1e-13)

    def test_derivative_matches_central_difference(self):
        rng = np.random.default_rng(9)
        s = random_series(rng, 6)
        h = 1e-6
        for t in rng.uniform(0, 40, 20):
            fd = (s(t + h) - s(t - h)) / (2 * h)
            exact = s.derivative()(t)
            assert abs(fd - exact) <= 1e-6 * max(1.0, abs(exact))

    def test_vectorised_evaluation(self):
        rng = np.random.default_rng(1)
        s = random_series(rng, 4)
        t = np.linspace(0, 10, 7)
        np.testing.assert_array_equal(s(t), np.array([s(x) for x in t]))


@settings(max_examples=60, deadline=None)
@given(series, series, times)
def test_sum_evaluates_to_sum(a, b, t):
    scale = 1 + a.l1_norm() + b.l1_norm()
    assert abs((a + b)(t) - (a(t) + b(t))) <= 1e-12 * scale


@settings(max_examples=60, deadline=None)
@given(series, series, times)
def test_product_evaluates_to_product(a, b, t):
    scale = (1 + a.l1_norm()) * (1 + b.l1_norm())
    assert abs((a * b)(t) - a(t) * b(t)) <= 1e-12 * scale + (a * b).residual


@settings(max_examples=40, deadline=None)
@given(series)
def test_canonical_form_is_idempotent(a):
    again = QPSeries(a.coeffs, a.omega, a.nu, a.cutoff)
    np.testing.assert_array_equal(again.coeffs, a.coeffs)
    assert again.residual == 0.0  # nothing further to drop


@settings(max_examples=40, deadline=None)
@given(series, series)
def test_conjugation_distributes(a, b):
    t = np.linspace(0, 20, 9)
    scale = (1 + a.l1_norm()) * (1 + b.l1_norm())
    np.testing.assert_allclose((a + b).conj()(t), (a.conj() + b.conj())(t), atol=1e-12 * scale)
    np.testing.assert_allclose((a * b).conj()(t), (a.conj() * b.conj())(t), atol=1e-12 * scale)


@settings(max_examples=40, deadline=None)
@given(series)
def test_antiderivative_differentiates_back(a):
    t = np.linspace(0, 20, 9)
    back = a.antiderivative().derivative()
    np.testing.assert_allclose(back(t), a(t), atol=1e-11 * (1 + a.l1_norm()))
