import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from llpmcm.exceptions import ContaminationError
from llpmcm.loss import (
    KINDS,
    Loss,
    check_convexity,
    correct,
    evaluate,
    symmetric_shift_identity,
)

GRID = np.linspace(-6, 6, 241)
kappas = st.tuples(st.floats(0, 0.49), st.floats(0, 0.49))


class TestEvaluate:
    def test_logistic_at_zero(self):
        np.testing.assert_allclose(evaluate(Loss("logistic"), 0.0, 1), math.log(2), rtol=1e-15)

    def test_sigmoid_at_zero(self):
        assert evaluate(Loss("sigmoid"), 0.0, -1) == 0.5

    def test_logistic_at_two(self):
        np.testing.assert_allclose(evaluate(Loss("logistic"), 2.0, 1), 0.126928, atol=1e-6)
        np.testing.assert_allclose(evaluate(Loss("logistic"), 2.0, 1), math.log1p(math.exp(-2)))

    def test_zero_one_sign_convention(self):
        loss = Loss("zero-one")
        assert loss.value(0.0, 1) == 0.0
        assert loss.value(0.0, -1) == 1.0
        np.testing.assert_array_equal(loss.value([-1.0, 2.0], [1, 1]), [1.0, 0.0])

    def test_unknown_kind(self):
        with pytest.raises(ValueError, match="unsupported"):
            Loss("hinge")

    @pytest.mark.parametrize("kind", ["sigmoid", "ramp", "zero-one"])
    def test_symmetric_losses_sum_to_one(self, kind):
        loss = Loss(kind)
        np.testing.assert_allclose(loss.value(GRID, 1) + loss.value(GRID, -1), 1.0, atol=1e-15)
        assert loss.symmetric_shift == 1.0

    def test_logistic_not_symmetric(self):
        assert Loss("logistic").symmetric_shift is None

    @pytest.mark.parametrize("kind", ["logistic", "sigmoid", "squared"])
    @pytest.mark.parametrize("sigma", [1, -1])
    def test_derivatives_match_finite_differences(self, kind, sigma):
        loss = Loss(kind)
        h = 1e-6
        fd = (loss.value(GRID + h, sigma) - loss.value(GRID - h, sigma)) / (2 * h)
        np.testing.assert_allclose(loss.derivative(GRID, sigma), fd, atol=1e-8)
        fd2 = (loss.derivative(GRID + h, sigma) - loss.derivative(GRID - h, sigma)) / (2 * h)
        np.testing.assert_allclose(loss.second_derivative(GRID, sigma), fd2, atol=1e-7)

    def test_zero_one_not_differentiable(self):
        assert not Loss("zero-one").differentiable
        with pytest.raises(ValueError):
            Loss("zero-one").derivative(0.0, 1)

    @pytest.mark.parametrize("kind", ["logistic", "sigmoid", "ramp"])
    def test_lipschitz_constant_bounds_slopes(self, kind):
        loss = Loss(kind)
        t = np.linspace(-8, 8, 4001)
        for s in (1, -1):
            slopes = np.abs(np.diff(loss.value(t, s)) / np.diff(t))
            assert slopes.max() <= loss.lipschitz + 1e-9

    def test_at_zero(self):
        assert Loss("squared").at_zero == 1.0
        np.testing.assert_allclose(Loss("logistic").at_zero, math.log(2))


class TestCorrect:
    @pytest.mark.parametrize("kind", KINDS)
    def test_zero_kappa_is_identity(self, kind):
        loss = Loss(kind)
        cl = correct(loss, (0.0, 0.0))
        for s in (1, -1):
            np.testing.assert_array_equal(cl.value(GRID, s), loss.value(GRID, s))

    def test_worked_value(self):
        cl = correct(Loss("logistic"), (0.2, 0.3))
        np.testing.assert_allclose(cl.value(0.0, 1), 0.8 * math.log(2), rtol=1e-14)
        np.testing.assert_allclose(cl.value(0.0, 1), 0.554518, atol=1e-6)

    def test_coefficients(self):
        a, b = correct(Loss("logistic"), (0.2, 0.3)).coefficients(1)
        np.testing.assert_allclose([a, -b], [1.4, -0.6], rtol=1e-14)

    @pytest.mark.parametrize("kappa", [(0.5, 0.5), (0.7, 0.4), (0.5, 0.4999999)])
    def test_rejects_large_contamination(self, kappa):
        with pytest.raises(ContaminationError, match="contamination too large"):
            correct(Loss("logistic"), kappa)

    def test_rejects_negative(self):
        with pytest.raises(ValueError, match="nonnegative"):
            correct(Loss("logistic"), (-0.1, 0.2))

    @settings(max_examples=50, deadline=None)
    @given(kappas)
    def test_corrected_lipschitz(self, kappa):
        cl = correct(Loss("logistic"), kappa)
        t = np.linspace(-10, 10, 2001)
        for s in (1, -1):
            slopes = np.abs(np.diff(cl.value(t, s)) / np.diff(t))
            assert slopes.max() <= cl.lipschitz + 1e-9

    @settings(max_examples=50, deadline=None)
    @given(kappas, st.floats(-5, 5))
    def test_derivative_matches_finite_difference(self, kappa, t):
        cl = correct(Loss("logistic"), kappa)
        h = 1e-6
        for s in (1, -1):
            fd = (cl.value(t + h, s) - cl.value(t - h, s)) / (2 * h)
            np.testing.assert_allclose(cl.derivative(t, s), fd, atol=1e-7)


class TestConvexity:
    def test_small_kappa_convex(self):
        res = check_convexity(correct(Loss("logistic"), (0.3, 0.2)))
        assert res.convex and res.method == "analytic"

    def test_uncorrected_convex(self):
        assert check_convexity(correct(Loss("logistic"), (0.0, 0.0)))

    def test_large_kappa_not_convex(self):
        cl = correct(Loss("logistic"), (0.6, 0.3))
        assert not check_convexity(cl)
        grid = np.arange(-300, 301) * 0.01
        res = check_convexity(cl, grid=grid)
        assert not res.convex and res.method == "numeric"
        # the minus-class component is the one that bends downward for this kappa
        v = cl.value(grid, -1)
        assert np.min(v[2:] - 2 * v[1:-1] + v[:-2]) < 0
        v = cl.value(grid, 1)
        assert np.min(v[2:] - 2 * v[1:-1] + v[:-2]) > -1e-12

    def test_sigmoid_uses_numeric_path(self):
        assert check_convexity(correct(Loss("sigmoid"), (0.1, 0.1))).method == "numeric"

    @pytest.mark.parametrize("kind", ["logistic", "squared"])
    def test_analytic_agrees_with_numeric(self, kind):
        rng = np.random.default_rng(3)
        for _ in range(100):
            kappa = tuple(rng.uniform(0, 0.4999, size=2))
            cl = correct(Loss(kind), kappa)
            analytic = check_convexity(cl)
            numeric = check_convexity(cl, grid=np.arange(-1000, 1001) * 0.01)
            assert analytic.method == "analytic" and numeric.method == "numeric"
            assert analytic.convex == numeric.convex


class TestSymmetricIdentity:
    def test_zero_kappa_is_clean_risk(self):
        pts = [(0.3, 1), (-1.2, 1), (0.5, -1)]
        lhs, rhs = symmetric_shift_identity(Loss("sigmoid"), (0.0, 0.0), pts)
        loss = Loss("sigmoid")
        clean = 0.5 * np.mean(loss.value([0.3, -1.2], 1)) + 0.5 * loss.value(0.5, -1)
        np.testing.assert_allclose([lhs, rhs], [clean, clean], rtol=1e-15)

    def test_worked_example(self):
        lhs, rhs = symmetric_shift_identity(Loss("sigmoid"), (0.25, 0.25), [(0.0, 1), (0.0, -1)])
        assert lhs == pytest.approx(0.5, abs=1e-15)
        assert rhs == pytest.approx(0.5, abs=1e-15)

    def test_logistic_rejected(self):
        with pytest.raises(ValueError, match="not symmetric"):
            symmetric_shift_identity(Loss("logistic"), (0.1, 0.1), [(0.0, 1), (0.0, -1)])

    @settings(max_examples=30, deadline=None)
    @given(kappas, st.lists(st.floats(-4, 4), min_size=2, max_size=10))
    def test_ramp_identity(self, kappa, ts):
        pts = [(t, 1 if k % 2 else -1) for k, t in enumerate(ts)]
        lhs, rhs = symmetric_shift_identity(Loss("ramp"), kappa, pts)
        assert abs(lhs - rhs) <= 1e-12
