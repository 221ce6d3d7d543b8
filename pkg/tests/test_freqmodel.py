"""License state machine and time-grid unit tests."""

from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from corespec.freqmodel import (
    CpuParams,
    FrequencyLevel,
    FrequencyLicense,
    InvalidDemandError,
    LicenseStateError,
    TimeBase,
)

L0, L1, L2 = FrequencyLevel.L0, FrequencyLevel.L1, FrequencyLevel.L2


def make_lic(cpu=None):
    cpu = cpu or CpuParams()
    tb = TimeBase(cpu)
    return FrequencyLicense(0, cpu, tb), tb


class TestCpuParams:
    def test_defaults_match_documented_turbo_tiers(self):
        cpu = CpuParams()
        assert cpu.freq_ghz[L0] == Fraction("2.8")
        assert cpu.freq_ghz[L1] == Fraction("2.4")
        assert cpu.freq_ghz[L2] == Fraction("1.9")
        assert cpu.license_grant_delay_ns == 500_000
        assert cpu.revert_delay_ns == 2_000_000
        assert cpu.detection_delay_cycles == 100

    def test_frequency_order_enforced(self):
        with pytest.raises(ValueError):
            CpuParams(freq_ghz={L0: Fraction(2), L1: Fraction(2), L2: Fraction(1)})

    def test_throttle_factor_range(self):
        with pytest.raises(ValueError):
            CpuParams(throttle_speed_factor=Fraction(0))
        with pytest.raises(ValueError):
            CpuParams(throttle_speed_factor=Fraction(3, 2))


class TestTimeBase:
    def test_periods_are_exact_integers(self):
        tb = TimeBase(CpuParams())
        # 1/1596 ns grid: 2.8 GHz -> 570 ticks, 2.4 -> 665, 1.9 -> 840
        assert tb.units_per_ns == 1596
        assert tb.period[L0] == 570
        assert tb.period[L1] == 665
        assert tb.period[L2] == 840

    def test_cycle_time_roundtrip_exact(self):
        tb = TimeBase(CpuParams())
        for lvl in FrequencyLevel:
            dur = 123_457 * tb.period[lvl]
            assert dur % tb.period[lvl] == 0

    def test_fractional_throttle_factor_stays_integral(self):
        cpu = CpuParams(throttle_speed_factor=Fraction(3, 4))
        tb = TimeBase(cpu)
        for lvl in FrequencyLevel:
            assert tb.throttle_period[lvl] * cpu.freq_ghz[lvl] * Fraction(3, 4) == tb.units_per_ns


class TestDemandStart:
    def test_request_from_l0_to_l2(self):
        lic, _ = make_lic()
        assert lic.demand_start(L2) is True

    def test_idempotent_when_already_granted(self):
        lic, _ = make_lic()
        lic.granted = L2
        armed = lic.demand_end(1000)
        assert armed is not None
        assert lic.demand_start(L2) is False
        assert lic.revert_at is None  # revert cancelled even without a request

    def test_escalation_l1_to_l2(self):
        lic, _ = make_lic()
        lic.granted = L1
        assert lic.demand_start(L2) is True

    def test_equal_pending_not_rerequested(self):
        lic, _ = make_lic()
        assert lic.demand_start(L2) is True
        lic.set_pending(L2, 500)
        assert lic.demand_start(L2) is False
        assert lic.pending_target == L2

    def test_differing_pending_is_withdrawn(self):
        lic, _ = make_lic()
        lic.set_pending(L2, 500)
        old_epoch = lic.pending_epoch
        assert lic.demand_start(L1) is True
        assert lic.pending_target is None
        assert lic.pending_epoch > old_epoch

    def test_l0_demand_rejected(self):
        lic, _ = make_lic()
        with pytest.raises(InvalidDemandError):
            lic.demand_start(L0)


class TestGrantRevert:
    def test_grant_applies_pending(self):
        lic, _ = make_lic()
        lic.set_pending(L2, 700)
        lic.grant()
        assert lic.granted == L2
        assert lic.pending_target is None

    def test_grant_without_pending_is_inconsistency(self):
        lic, _ = make_lic()
        with pytest.raises(LicenseStateError):
            lic.grant()

    def test_demand_end_arms_revert_delay(self):
        cpu = CpuParams()
        lic, tb = make_lic(cpu)
        lic.granted = L2
        lic.demand_end(12345)
        assert lic.revert_at == 12345 + tb.ns_to_units(cpu.revert_delay_ns)

    def test_demand_end_noop_at_l0(self):
        lic, _ = make_lic()
        assert lic.demand_end(999) is None
        assert lic.revert_at is None

    def test_revert_returns_to_l0_directly(self):
        for start in (L1, L2):
            lic, _ = make_lic()
            lic.granted = start
            lic.demand_end(0)
            lic.revert()
            assert lic.granted == L0
            assert lic.revert_at is None

    def test_revert_withdraws_unanswered_request(self):
        lic, _ = make_lic()
        lic.set_pending(L2, 10**9)
        lic.demand_end(0)
        lic.revert()
        assert lic.pending_target is None
        assert lic.granted == L0


class TestEffectiveFrequency:
    def test_granted_speed(self):
        lic, _ = make_lic()
        assert lic.effective_frequency_ghz() == Fraction("2.8")
        lic.granted = L1
        assert lic.effective_frequency_ghz() == Fraction("2.4")

    def test_pending_runs_at_throttled_target(self):
        cpu = CpuParams(throttle_speed_factor=Fraction(1, 2))
        lic, _ = make_lic(cpu)
        lic.set_pending(L2, 100)
        assert lic.effective_frequency_ghz() == Fraction("1.9") / 2
        assert lic.effective_period_units() == TimeBase(cpu).throttle_period[L2]


class TestTally:
    def test_tally_by_granted_level(self):
        lic, _ = make_lic()
        lic.tally(1000)
        assert lic.counters()["LVL0_TURBO_LICENSE"] == 1000

    def test_tally_throttle_when_pending(self):
        lic, _ = make_lic()
        lic.set_pending(L2, 100)
        assert lic.tally(1000) is True
        assert lic.counters()["THROTTLE"] == 1000

    def test_negative_cycles_rejected(self):
        lic, _ = make_lic()
        with pytest.raises(ValueError):
            lic.tally(-1)

    @given(st.lists(st.tuples(st.sampled_from([None, L1, L2]), st.integers(0, 10**6)), max_size=40))
    def test_conservation_and_monotonicity(self, steps):
        lic, _ = make_lic()
        total = 0
        prev = dict.fromkeys(lic.counters(), 0)
        for pend, cycles in steps:
            if pend is None:
                lic.pending_target = None
            else:
                lic.pending_target = pend
            lic.tally(cycles)
            total += cycles
            now = lic.counters()
            assert all(now[k] >= prev[k] for k in now)
            prev = now
        assert lic.total_cycles() == total
        assert sum(lic.counters().values()) == total
