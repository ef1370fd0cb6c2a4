import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp
from scipy.special import erfcx

from fraccontain.errors import ArgumentError, DivergenceError, NumericFailure
from fraccontain.frac_calculus import (
    AbmIntegrator,
    FracOrder,
    fractional_integral,
    gl_weights,
    mittag_leffler,
    solve_caputo_fde,
)

# 200-term series at 50 digits, evaluated with mpmath before the implementation existed
ML_HALF_AT_MINUS_ONE = 0.42758357615580700


def test_frac_order_bounds():
    assert FracOrder(1).alpha == 1.0
    for bad in (0.0, -0.5, 1.01, math.nan):
        with pytest.raises(ArgumentError):
            FracOrder(bad)


class TestMittagLeffler:
    def test_exponential_case(self):
        assert abs(mittag_leffler(1, 1, 1) - math.e) <= 1e-10

    def test_zero_argument(self):
        assert mittag_leffler(0.5, 1, 0) == 1.0

    def test_half_order_against_series_oracle(self):
        assert mittag_leffler(0.5, 1, -1) == pytest.approx(ML_HALF_AT_MINUS_ONE, abs=1e-12)

    def test_half_order_matches_erfcx(self):
        for z in (-0.1, -2.0, -5.0, -9.0):
            assert mittag_leffler(0.5, 1, z) == pytest.approx(erfcx(-z), abs=1e-12)

    def test_grid_matches_exp(self):
        xs = np.linspace(-5, 5, 101)
        err = max(abs(mittag_leffler(1, 1, x) - math.exp(x)) for x in xs)
        assert err <= 1e-10

    @pytest.mark.parametrize("alpha,beta", [(0.3, 0.7), (0.5, 1.0), (1.0, 2.0), (1.7, 3.5)])
    def test_value_at_zero_is_reciprocal_gamma(self, alpha, beta):
        assert mittag_leffler(alpha, beta, 0.0) == pytest.approx(1 / math.gamma(beta), rel=1e-15)

    def test_second_parameter_two_is_expm1_over_z(self):
        for z in (-3.0, 0.5, 4.0):
            assert mittag_leffler(1, 2, z) == pytest.approx(math.expm1(z) / z, rel=1e-12)

    def test_matches_mpmath_hypergeometric_route(self):
        # E_{1/2,1}(z) = exp(z^2) erfc(-z), evaluated independently
        for z in (-3.0, -0.7, 1.3):
            ref = float(mpmath.exp(z * z) * mpmath.erfc(-z))
            assert mittag_leffler(0.5, 1, z) == pytest.approx(ref, rel=1e-12)

    def test_term_cap_raises_with_partial_sum(self):
        with pytest.raises(NumericFailure) as info:
            mittag_leffler(1, 1, 20.0, max_terms=10)
        assert info.value.terms == 10
        assert info.value.partial_sum > 0

    def test_large_argument_needs_more_terms(self):
        with pytest.raises(NumericFailure):
            mittag_leffler(0.5, 1, -30.0)
        assert mittag_leffler(0.5, 1, -30.0, max_terms=5000) == pytest.approx(erfcx(30.0), abs=1e-12)

    @pytest.mark.parametrize("args", [(0, 1, 1), (1, 0, 1), (1, 1, math.inf), (1, 1, 31.0)])
    def test_rejects_bad_arguments(self, args):
        with pytest.raises(ArgumentError):
            mittag_leffler(*args)


class TestGlWeights:
    def test_integer_order(self):
        assert list(gl_weights(1, 3).weights) == [1.0, -1.0, 0.0]

    def test_half_order(self):
        assert list(gl_weights(0.5, 2).weights) == [1.0, -0.5]

    def test_binomial_oracle(self):
        w = gl_weights(0.3, 50).weights
        ref = [float((-1) ** k * mpmath.binomial(mpmath.mpf("0.3"), k)) for k in range(50)]
        np.testing.assert_allclose(w, ref, rtol=0, atol=1e-12)

    def test_partial_sums_shrink(self):
        w = gl_weights(0.4, 2000).weights
        tail = np.abs(np.cumsum(w))[100:]
        assert np.all(np.diff(tail) < 0)

    def test_count_validated(self):
        with pytest.raises(ArgumentError):
            gl_weights(0.5, 0)


class TestFractionalIntegral:
    def test_plain_integral_of_one(self):
        assert fractional_integral(np.ones(2001), 1.0, 1e-3) == pytest.approx(2.0, abs=1e-3)

    def test_half_order_of_one(self):
        value = fractional_integral(np.ones(1001), 0.5, 1e-3)
        assert abs(value - 2 / math.sqrt(math.pi)) <= 5e-3

    def test_zero_integrand(self):
        assert fractional_integral(np.zeros(10), 0.7, 0.1) == 0.0

    def test_exact_for_linear_integrand(self):
        # I^a t = t^(1+a) / Gamma(2+a)
        t = np.linspace(0, 1.5, 31)
        a = 0.35
        expected = 1.5 ** (1 + a) / math.gamma(2 + a)
        assert fractional_integral(t, a, 0.05) == pytest.approx(expected, rel=1e-12)

    def test_empty_rejected(self):
        with pytest.raises(ArgumentError):
            fractional_integral([], 0.5, 0.1)


class TestSolver:
    def test_zero_field_is_constant(self):
        sol = solve_caputo_fde(lambda x: np.zeros_like(x), [3.0], 0.6, 0.01, 200)
        assert np.all(sol.values == 3.0)

    def test_order_one_decay(self):
        sol = solve_caputo_fde(lambda x: -x, [1.0], 1.0, 1e-3, 1000)
        assert abs(sol.final[0] - math.exp(-1)) <= 1e-4

    def test_order_one_against_rk4_reference(self):
        step = 1e-2
        sol = solve_caputo_fde(lambda x: np.array([-x[0] + math.sin(x[1]), -0.5 * x[1]]), [1.0, 2.0], 1.0, step, 300)
        ref = solve_ivp(
            lambda t, x: [-x[0] + math.sin(x[1]), -0.5 * x[1]],
            (0, 3), [1.0, 2.0], method="RK45", t_eval=sol.times, rtol=1e-11, atol=1e-12,
        )
        assert np.max(np.abs(sol.values - ref.y.T)) <= 10 * step

    def test_half_order_against_mittag_leffler(self):
        sol = solve_caputo_fde(lambda x: -x, [1.0], 0.5, 1e-4, 20000)
        exact = erfcx(np.sqrt(sol.times))
        assert np.max(np.abs(sol.values[:, 0] - exact)) <= 1e-3
        for idx in (0, 5000, 20000):
            assert mittag_leffler(0.5, 1, -math.sqrt(sol.times[idx])) == pytest.approx(exact[idx], abs=1e-12)

    def test_error_shrinks_under_halving(self):
        errors = []
        for steps in (100, 200, 400, 800):
            sol = solve_caputo_fde(lambda x: -x, [1.0], 0.7, 1.0 / steps, steps)
            exact = [mittag_leffler(0.7, 1, -(t**0.7)) for t in sol.times[:: steps // 100]]
            errors.append(np.max(np.abs(sol.values[:: steps // 100, 0] - exact)))
        assert all(b < a for a, b in zip(errors, errors[1:]))

    def test_times_uniform(self):
        sol = solve_caputo_fde(lambda x: -x, [1.0], 0.5, 0.25, 8)
        np.testing.assert_allclose(np.diff(sol.times), 0.25)
        assert len(sol.times) == len(sol.values) == 9

    def test_memory_window_covering_run_is_exact(self):
        full = solve_caputo_fde(lambda x: -x, [1.0], 0.5, 0.01, 300)
        windowed = solve_caputo_fde(lambda x: -x, [1.0], 0.5, 0.01, 300, memory_window=300)
        np.testing.assert_allclose(windowed.values, full.values, rtol=0, atol=1e-13)

    def test_short_memory_changes_result(self):
        full = solve_caputo_fde(lambda x: -x, [1.0], 0.5, 0.01, 300)
        short = solve_caputo_fde(lambda x: -x, [1.0], 0.5, 0.01, 300, memory_window=20)
        assert abs(short.final[0] - full.final[0]) > 1e-3

    def test_divergence_reports_step(self):
        with pytest.raises(DivergenceError) as info, np.errstate(over="ignore", invalid="ignore"):
            solve_caputo_fde(lambda x: x**3, [10.0], 1.0, 0.5, 50)
        assert info.value.step >= 1


def _direct_abm(f, x0, alpha, h, steps):
    """Textbook O(N^2) predictor-corrector, used as the reference for the blocked sums."""
    g1, g2 = math.gamma(alpha + 1), math.gamma(alpha + 2)
    x = np.zeros(steps + 1)
    fx = np.zeros(steps + 1)
    x[0] = x0
    fx[0] = f(x0)
    for n in range(steps):
        j = np.arange(n + 1)
        b = (n + 1 - j) ** alpha - (n - j) ** alpha
        pred = x0 + h**alpha / g1 * np.dot(b, fx[: n + 1])
        a = (n - j + 2) ** (alpha + 1) + (n - j) ** (alpha + 1) - 2 * (n - j + 1) ** (alpha + 1)
        a[0] = n ** (alpha + 1) - (n - alpha) * (n + 1) ** alpha
        x[n + 1] = x0 + h**alpha / g2 * (np.dot(a, fx[: n + 1]) + f(pred))
        fx[n + 1] = f(x[n + 1])
    return x


@settings(max_examples=15, deadline=None)
@given(alpha=st.floats(0.2, 1.0), steps=st.integers(1, 700))
def test_blocked_history_matches_direct_sum(alpha, steps):
    f = lambda x: -x + 0.3 * np.sin(x)  # noqa: E731
    sol = solve_caputo_fde(lambda x: f(x), [1.0], alpha, 0.01, steps)
    ref = _direct_abm(f, 1.0, alpha, 0.01, steps)
    np.testing.assert_allclose(sol.values[:, 0], ref, rtol=0, atol=1e-11)


def test_integrator_requires_predict_before_correct():
    integ = AbmIntegrator(0.5, 0.1, 10, [1.0])
    integ.commit(0, np.array([-1.0]))
    integ.predict(1)
    with pytest.raises(ArgumentError):
        integ.correct(2, np.array([0.0]))
