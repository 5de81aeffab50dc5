import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hjlab.profiles import (SingularityError, constants, ode_profile,
                            ode_residual, profile, profile_slope,
                            spacetime_bounds)


class TestConstants:
    def test_p3_closed_forms(self):
        c = constants(3.0)
        assert c.beta == pytest.approx(0.5, abs=1e-15)
        assert c.c_p == pytest.approx(math.sqrt(2.0), abs=1e-12)
        assert c.d_p == pytest.approx(math.sqrt(0.5), abs=1e-12)

    def test_p4_closed_forms(self):
        c = constants(4.0)
        assert c.beta == pytest.approx(1.0 / 3.0, abs=1e-15)
        assert c.c_p == pytest.approx(1.5 * 3.0 ** (-1.0 / 3.0), abs=1e-12)
        assert c.d_p == pytest.approx((1.0 / 3.0) ** (1.0 / 3.0), abs=1e-12)

    @pytest.mark.parametrize("p", [2.5, 3.0, 4.0, 5.0])
    def test_identities(self, p):
        c = constants(p)
        assert abs(c.d_p - (1 - c.beta) * c.c_p) <= 1e-12
        assert abs(c.d_p - c.beta ** c.beta) <= 1e-12
        assert abs(c.beta * p - (c.beta + 1)) <= 1e-14

    @pytest.mark.parametrize("p", [2.0, 1.5, -1.0, float("nan")])
    def test_rejects_non_superquadratic(self, p):
        with pytest.raises(ValueError):
            constants(p)


class TestProfile:
    def test_unshifted_value(self):
        c = constants(3.0)
        assert profile(c, 0.0, 1.0) == pytest.approx(math.sqrt(2.0), abs=1e-12)

    def test_zero_at_wall(self):
        c = constants(3.7)
        for alpha in [0.0, 0.5, 2.0]:
            assert profile(c, alpha, 0.0) == 0.0

    def test_shifted_value(self):
        c = constants(3.0)
        # sqrt(2) (sqrt(4) - sqrt(1))
        assert profile(c, 1.0, 3.0) == pytest.approx(math.sqrt(2.0), abs=1e-12)

    def test_rejects_negative(self):
        c = constants(3.0)
        with pytest.raises(ValueError):
            profile(c, -0.1, 1.0)
        with pytest.raises(ValueError):
            profile(c, 0.1, -1.0)

    @settings(max_examples=60, deadline=None)
    @given(lam=st.floats(0.01, 100.0), s=st.floats(1e-3, 10.0))
    def test_scale_invariance(self, lam, s):
        c = constants(3.0)
        assert lam ** (c.beta - 1) * profile(c, 0.0, lam * s) == pytest.approx(
            profile(c, 0.0, s), rel=1e-12)

    @settings(max_examples=60, deadline=None)
    @given(lam=st.floats(0.01, 100.0), s=st.floats(1e-3, 10.0),
           alpha=st.floats(0.0, 10.0))
    def test_rescaled_shift(self, lam, s, alpha):
        c = constants(2.7)
        lhs = lam ** (c.beta - 1) * profile(c, alpha, lam * s)
        rhs = profile(c, alpha / lam, s)
        assert lhs == pytest.approx(rhs, rel=1e-11, abs=1e-12)


class TestProfileSlope:
    def test_values(self):
        c = constants(3.0)
        assert profile_slope(c, 0.0, 4.0) == pytest.approx(
            c.d_p * 0.5, abs=1e-12)
        assert profile_slope(c, 3.0, 1.0) == pytest.approx(
            c.d_p * 0.5, abs=1e-12)

    def test_singular_at_origin(self):
        c = constants(3.0)
        with pytest.raises(SingularityError):
            profile_slope(c, 0.0, 0.0)

    def test_is_derivative_of_profile(self):
        c = constants(3.4)
        rng = np.random.default_rng(3)
        h = 1e-6
        for _ in range(50):
            alpha = rng.uniform(0, 2)
            s = rng.uniform(0.2, 5)
            fd = (profile(c, alpha, s + h) - profile(c, alpha, s - h)) / (2 * h)
            assert fd == pytest.approx(profile_slope(c, alpha, s), abs=1e-6)

    def test_decreasing_and_bounded(self):
        c = constants(4.0)
        s = np.linspace(0.1, 5, 200)
        vals = profile_slope(c, 1.0, s)
        assert np.all(np.diff(vals) < 0)
        assert np.all(vals <= profile_slope(c, 1.0, 0.0))


class TestOdeProfile:
    def test_initial_condition(self):
        c = constants(3.0)
        for g1 in [0.1, 1.0, 7.0]:
            assert ode_profile(c, g1, 1.0) == pytest.approx(g1, rel=1e-14)

    def test_half_amplitude_value(self):
        c = constants(3.0)
        assert ode_profile(c, c.d_p / 2, 2.0) == pytest.approx(
            10.0 ** -0.5, abs=1e-12)

    def test_matches_wall_profile_identity(self):
        c = constants(3.0)
        ys = np.linspace(0.2, 8.0, 40)
        np.testing.assert_allclose(ode_profile(c, c.d_p, ys),
                                   profile_slope(c, 0.0, ys), rtol=1e-12)

    def test_backward_blowup_signaled(self):
        c = constants(3.0)
        with pytest.raises(SingularityError):
            ode_profile(c, 10.0, 0.1)
        with pytest.raises(ValueError):
            ode_profile(c, -1.0, 2.0)


class TestSpacetimeBounds:
    def test_symmetric_at_zero_eps(self):
        c = constants(3.0)
        lo, hi = spacetime_bounds(c, 1.0, 0.5, 0.0)
        assert lo == pytest.approx(2 ** -0.5, abs=1e-12)
        assert hi == pytest.approx(2 ** -0.5, abs=1e-12)

    def test_collapses_at_wall(self):
        c = constants(2.5)
        for g in [0.3, 1.0, 4.0]:
            lo, hi = spacetime_bounds(c, g, 0.0, 0.5)
            assert lo == pytest.approx(g, rel=1e-14)
            assert hi == pytest.approx(g, rel=1e-14)

    def test_split_at_half_eps(self):
        c = constants(3.0)
        lo, hi = spacetime_bounds(c, 1.0, 0.5, 0.5)
        assert lo == pytest.approx(2.5 ** -0.5, abs=1e-12)
        assert hi == pytest.approx(1.5 ** -0.5, abs=1e-12)

    @settings(max_examples=60, deadline=None)
    @given(g=st.floats(0.05, 50.0), delta=st.floats(0.0, 3.0),
           eps=st.floats(0.0, 0.99))
    def test_ordering(self, g, delta, eps):
        c = constants(3.5)
        lo, hi = spacetime_bounds(c, g, delta, eps)
        assert lo <= hi


class TestOdeResidual:
    def test_exact_profile_has_tiny_residual(self):
        c = constants(3.0)
        fn = lambda s: profile(c, 1.0, s)
        assert abs(ode_residual(c, fn, 0.5)) <= 1e-6

    def test_random_shifts_and_points(self):
        c = constants(3.0)
        rng = np.random.default_rng(5)
        for _ in range(100):
            alpha = rng.uniform(0.05, 3.0)
            s = rng.uniform(0.05, 3.0)
            fn = lambda q: profile(c, alpha, q)
            assert abs(ode_residual(c, fn, s)) <= 1e-6

    def test_linear_and_zero(self):
        # rounding in the 1e-4 stencil leaves ~1e-8 noise on exact data
        c = constants(3.0)
        assert ode_residual(c, lambda s: s, 0.3) == pytest.approx(1.0, abs=1e-7)
        assert ode_residual(c, lambda s: 0.0, 0.3) == pytest.approx(0.0, abs=1e-12)

    def test_rejects_stencil_over_singularity(self):
        c = constants(3.0)
        fn = lambda s: profile(c, 0.0, s)   # undefined below s = 0
        with pytest.raises(ValueError):
            ode_residual(c, fn, 1e-5)
