import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from sdp_sim.curves import LatencyRateProfile, LeakyBucketDescriptor
from sdp_sim.qos import InfeasibleDemand, Regime
from sdp_sim.study import (
    PartitionPolicy,
    bandwidth_ratio,
    compare,
    end_to_end_allocation,
    equal_split_ratio,
    loose_delay_analysis,
    per_domain_allocation,
)
from sdp_sim.units import mbit, mbps, ms

from .conftest import CBR, F1, F2, R1_E_100MS, R2_E_100MS


def path(n, theta_ms=10, rate=20):
    return [LatencyRateProfile(mbps(rate), ms(theta_ms))] * n


class TestEndToEnd:
    def test_f1(self):
        assert end_to_end_allocation(F1, path(3), ms(100)) == pytest.approx(R1_E_100MS, rel=1e-12)

    def test_f2(self):
        assert end_to_end_allocation(F2, path(3), ms(100)) == pytest.approx(R2_E_100MS, rel=1e-12)

    @pytest.mark.parametrize("d", [30, 31, 100, 5000])
    def test_constant_rate(self, d):
        assert end_to_end_allocation(CBR, path(3), ms(d)) == CBR.sustained

    def test_loose_target_uses_sustained_rate(self):
        assert end_to_end_allocation(F1, path(3), 2.0) == F1.sustained

    def test_infeasible(self):
        with pytest.raises(InfeasibleDemand):
            end_to_end_allocation(F1, path(3), ms(29))


class TestPerDomain:
    def test_equal_split_90ms(self):
        # 60*1.04 / (0.02*58.5 + 1.04) Mbps, exact rational evaluation
        rates = per_domain_allocation(F1, path(3), ms(90))
        assert rates == pytest.approx([28235294.11764706] * 3, rel=1e-12)

    def test_end_to_end_90ms(self):
        # 60*1.04 / (0.06*58.5 + 1.04) = 62.4 / 4.55 Mbps
        assert end_to_end_allocation(F1, path(3), ms(90)) == pytest.approx(13714285.714285715, rel=1e-12)

    def test_constant_rate(self):
        assert per_domain_allocation(CBR, path(3), ms(90)) == [CBR.sustained] * 3

    def test_budget_below_latency(self):
        with pytest.raises(InfeasibleDemand):
            per_domain_allocation(F1, path(3), ms(27))

    def test_explicit_budgets_must_sum(self):
        with pytest.raises(ValueError):
            per_domain_allocation(F1, path(2), ms(100), PartitionPolicy.explicit([ms(40), ms(40)]))


class TestRatio:
    def test_f1_three_domains(self):
        u = bandwidth_ratio(F1, path(3), ms(90))
        assert u == pytest.approx([2.0588235294117645] * 3, rel=1e-12)
        assert u[0] == pytest.approx(equal_split_ratio(F1, 3, ms(10), ms(30)), rel=1e-12)

    def test_constant_rate_is_one(self):
        assert bandwidth_ratio(CBR, path(4), ms(100)) == [1.0] * 4

    def test_single_domain_is_one(self):
        assert bandwidth_ratio(F1, path(1), ms(100)) == [pytest.approx(1.0, rel=1e-15)]

    def test_explicit_budget_counter_case(self):
        # all slack handed to the first domain: it needs no more than the broker would
        profiles = [LatencyRateProfile(mbps(20), ms(10)), LatencyRateProfile(mbps(20), ms(15))]
        policy = PartitionPolicy.explicit([ms(85), ms(15)])
        u = bandwidth_ratio(F1, profiles, ms(100), policy)
        assert u[0] <= 1 + 1e-12
        assert u[1] > 1

    def test_compare_marks_infeasible(self):
        row = compare(F1, path(3), ms(20))
        assert row.r_e is None and not row.feasible
        assert all(u is None for u in row.u)


loads = st.builds(
    LeakyBucketDescriptor,
    st.floats(min_value=2e6, max_value=1e8),
    st.floats(min_value=1e5, max_value=2e6),
    st.floats(min_value=1e4, max_value=2e7),
)


@given(loads, st.integers(1, 10), st.floats(0, 0.05), st.floats(0.001, 1))
def test_equal_split_matches_closed_form(load, n, theta, frac):
    # a vanishing p - rho rounds U to exactly 1
    assume(load.peak > load.sustained * 1.001)
    # both allocations interior: n (d - theta) <= sigma / rho
    d = theta + frac / n * load.burst / load.sustained
    u = bandwidth_ratio(load, path(n, theta * 1000), n * d)
    closed = equal_split_ratio(load, n, theta, d)
    assert all(x == pytest.approx(closed, rel=1e-9) for x in u)
    if n >= 2:
        assert all(x > 1 for x in u)


@given(loads, st.floats(0.0005, 0.5), st.integers(1, 9))
def test_ratio_increases_with_domains(load, slack, n):
    assume(load.peak > load.sustained * 1.001)
    theta, d = ms(10), ms(10) + slack
    assert equal_split_ratio(load, n + 1, theta, d) > equal_split_ratio(load, n, theta, d)


@given(st.floats(0.0001, 0.69), st.integers(2, 8))
def test_f1_ratio_exceeds_f2(slack, n):
    theta = ms(10)
    # end-to-end slack n * slack must stay under f1's sigma/rho (693 ms) to remain interior
    assume(n * slack < F1.burst / F1.sustained)
    d = theta + slack
    u1 = bandwidth_ratio(F1, path(n), n * d)[0]
    u2 = bandwidth_ratio(F2, path(n), n * d)[0]
    assert u1 > u2


class TestLooseDelay:
    def test_broker_charges_sustained_only(self):
        d_e = ms(30) + F1.burst / F1.sustained + ms(1)
        rep = loose_delay_analysis(F1, path(3), d_e)
        assert rep.end_to_end_regime is Regime.SUSTAINED and rep.r_e == F1.sustained
        assert all(reg is Regime.INTERIOR for reg in rep.per_domain_regimes)
        assert rep.r_i == pytest.approx([4279982.166740972] * 3, rel=1e-12)
        assert rep.broker_charges_sustained_only

    def test_single_domain_regimes_coincide(self):
        rep = loose_delay_analysis(F1, path(1), ms(10) + F1.burst / F1.sustained + ms(1))
        assert rep.regimes_coincide and not rep.broker_charges_sustained_only

    def test_both_loose(self):
        rep = loose_delay_analysis(F1, path(3), 100.0)
        assert rep.regimes_coincide
        assert rep.r_i == (F1.sustained,) * 3 and rep.r_e == F1.sustained
