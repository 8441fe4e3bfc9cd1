import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sdp_sim.curves import (
    UNBOUNDED,
    Curve,
    LatencyRateProfile,
    LeakyBucketDescriptor,
    busy_period_horizon,
    convolve_lr,
    convolve_numeric,
    evaluate,
    horizontal_deviation,
)
from sdp_sim.qos import delay_bound_lr
from sdp_sim.units import mbit, mbps, ms

from .conftest import F1, lr

STEP = 1e-4


class TestCurve:
    def test_rejects_decreasing(self):
        with pytest.raises(ValueError):
            Curve([(0, 0, -1)])

    def test_rejects_unordered_breakpoints(self):
        with pytest.raises(ValueError):
            Curve([(0, 0, 1), (2, 2, 1), (1, 1, 1)])

    def test_rejects_first_breakpoint_after_zero(self):
        with pytest.raises(ValueError):
            Curve([(1, 0, 1)])

    def test_rejects_discontinuity(self):
        with pytest.raises(ValueError):
            Curve([(0, 0, 1), (1, 5, 1)])

    def test_immutable(self):
        c = Curve.zero()
        with pytest.raises(AttributeError):
            c.foo = 1

    def test_linear_extension(self):
        c = Curve([(0, 0, 2), (1, 2, 1)])
        assert evaluate(c, 11) == pytest.approx(12)

    def test_sample_matches_evaluate(self):
        c = lr(10, 5).as_curve()
        t = np.linspace(0, 0.1, 57)
        assert np.allclose(c.sample(t), [evaluate(c, x) for x in t])

    def test_from_samples_drops_collinear_points(self):
        t = np.linspace(0, 1, 11)
        c = Curve.from_samples(t, 3 * t)
        assert len(c.points) == 1
        assert c(0.5) == pytest.approx(1.5)


class TestEvaluate:
    def test_lr_latency_knee(self):
        assert evaluate(lr(10, 5).as_curve(), ms(5)) == 0

    def test_leaky_bucket_origin(self):
        assert evaluate(F1.as_curve(), 0) == 0

    def test_leaky_bucket_one_second(self):
        # min{60 * 1, 1.04 + 1.5 * 1} Mbit
        assert evaluate(F1.as_curve(), 1.0) == pytest.approx(mbit(2.54), rel=1e-12)
        t = np.linspace(0, 2, 200_001)
        brute = np.minimum(F1.peak * t, F1.burst + F1.sustained * t)
        assert evaluate(F1.as_curve(), 1.0) == pytest.approx(brute[100_000], rel=1e-12)

    @pytest.mark.parametrize("t", [-1e-9, math.inf, math.nan])
    def test_rejects_bad_time(self, t):
        with pytest.raises(ValueError):
            evaluate(F1.as_curve(), t)


class TestProfiles:
    def test_lr_violations(self):
        assert LatencyRateProfile(0, 0).violations()
        assert LatencyRateProfile(1, -1).violations()
        assert LatencyRateProfile(1, 0).violations() == []

    def test_lb_violations(self):
        assert LeakyBucketDescriptor(1, 2, 1).violations()
        assert LeakyBucketDescriptor(2, 1, 0).violations()
        assert LeakyBucketDescriptor(2, 0, 1).violations()

    def test_lr_curve_shape(self):
        c = lr(10, 5).as_curve()
        assert c(0) == 0 and c.is_convex()
        assert c(ms(15)) == pytest.approx(mbps(10) * ms(10))

    def test_lb_curve_is_concave(self):
        assert F1.as_curve().is_concave()

    def test_infinite_rate_has_no_curve(self):
        with pytest.raises(ValueError):
            LatencyRateProfile(math.inf, 0).as_curve()


class TestConvolveLR:
    def test_min_rate_sum_latency(self):
        assert convolve_lr(lr(10, 5), lr(20, 15)) == lr(10, 20)

    def test_zero_latency_identity(self):
        assert convolve_lr(lr(7, 0), lr(7, 0)) == lr(7, 0)

    def test_symmetric(self):
        assert convolve_lr(lr(5, 10), lr(5, 10)) == LatencyRateProfile(mbps(5), ms(10) + ms(10))

    def test_rejects_invalid(self):
        with pytest.raises(ValueError):
            convolve_lr(LatencyRateProfile(0, 0), lr(1, 1))


profile_st = st.builds(
    LatencyRateProfile,
    st.floats(min_value=1e5, max_value=1e8),
    st.floats(min_value=0, max_value=0.05),
)


@given(profile_st, profile_st, profile_st)
def test_convolve_lr_associative_commutative(a, b, c):
    assert convolve_lr(a, b) == convolve_lr(b, a)
    left, right = convolve_lr(convolve_lr(a, b), c), convolve_lr(a, convolve_lr(b, c))
    assert left.rate == right.rate
    assert left.latency == pytest.approx(right.latency, rel=1e-15, abs=1e-18)


class TestConvolveNumeric:
    def _check_against_closed_form(self, a, b, horizon, step):
        got = convolve_numeric(a.as_curve(), b.as_curve(), horizon, step)
        want = convolve_lr(a, b).as_curve()
        t = np.arange(int(round(horizon / step)) + 1) * step
        # a grid split misses the exact latency knee by under one cell
        cell = max(a.rate, b.rate) * step
        assert np.max(np.abs(got.sample(t) - want.sample(t))) <= cell + 1e-6

    def test_matches_lr_closed_form(self):
        self._check_against_closed_form(lr(10, 5), lr(20, 15), 1.0, STEP)

    def test_symmetric_pair(self):
        self._check_against_closed_form(lr(5, 10), lr(5, 10), 0.5, STEP)

    def test_zero_curve_absorbs(self):
        got = convolve_numeric(Curve.zero(), lr(10, 5).as_curve(), 0.1, 1e-3)
        assert np.all(got.sample(np.linspace(0, 0.1, 50)) == 0)

    @pytest.mark.parametrize("horizon,step", [(0, 1e-3), (1, 0), (1, 2), (-1, 1e-3)])
    def test_rejects_bad_grid(self, horizon, step):
        with pytest.raises(ValueError):
            convolve_numeric(Curve.zero(), Curve.zero(), horizon, step)

    @settings(max_examples=20, deadline=None)
    @given(profile_st, profile_st)
    def test_random_pairs(self, a, b):
        self._check_against_closed_form(a, b, 0.2, 1e-3)


class TestHorizontalDeviation:
    def test_pure_latency(self):
        load = LeakyBucketDescriptor(mbps(1.5), mbps(1.5), 1e-9).as_curve()
        d = horizontal_deviation(load, lr(1.5, 10).as_curve(), horizon=1.0, step=STEP)
        assert abs(d - ms(10)) <= STEP

    def test_f1_at_effective_bandwidth(self):
        cap = LatencyRateProfile(12151898.734177215, ms(30))
        h = busy_period_horizon(F1, cap)
        d = horizontal_deviation(F1.as_curve(), cap.as_curve(), h, STEP)
        assert abs(d - 0.1) <= STEP

    def test_unbounded_when_rate_below_sustained(self):
        assert horizontal_deviation(F1.as_curve(), lr(1.0, 0).as_curve()) == UNBOUNDED

    def test_generic_horizon(self):
        cap = lr(20, 30)
        d = horizontal_deviation(F1.as_curve(), cap.as_curve(), step=STEP)
        assert abs(d - delay_bound_lr(F1, cap)) <= STEP

    def test_equal_slopes_need_horizon(self):
        with pytest.raises(ValueError):
            horizontal_deviation(F1.as_curve(), lr(1.5, 0).as_curve())

    def test_busy_period_horizon_formula(self):
        cap = lr(10, 5)
        assert busy_period_horizon(F1, cap) == pytest.approx((ms(5) + F1.burst / (mbps(10) - F1.sustained)) * 1.2)

    @settings(max_examples=15, deadline=None)
    @given(
        st.floats(min_value=2, max_value=20),
        st.floats(min_value=0, max_value=0.02),
        st.floats(min_value=0.01, max_value=5),
        st.floats(min_value=0, max_value=0.02),
    )
    def test_monotone_in_rate_and_latency(self, r, theta, dr, dtheta):
        load = F1.as_curve()

        def dev(rate, lat):
            cap = lr(rate, lat * 1000)
            return horizontal_deviation(load, cap.as_curve(), horizon=2.0, step=STEP)

        base = dev(r, theta)
        assert dev(r + dr, theta) <= base + 1e-12
        assert dev(r, theta + dtheta) >= base - 1e-12
