"""Per-core turbo-license state machine with per-level cycle accounting.

Modern server cores run at one of three all-core turbo tiers: the scalar
tier (L0, fastest), the heavy-256-bit tier (L1) and the heavy-512-bit tier
(L2).  A core that starts executing wide-vector-heavy code first runs a
short detection window at its current speed, then requests the lower
license and runs throttled until the package control unit grants it.  Once
the demanding code stops, the core keeps the low license for a fixed revert
delay before snapping back to L0.

All times inside the model are integer ticks on a grid fine enough that
every cycle period is a whole number of ticks, so cycle/time conversions
are exact and runs are bit-reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum
from fractions import Fraction
from math import lcm
from typing import Dict, Mapping, Optional


class FrequencyLevel(IntEnum):
    """License tiers, ordered fastest to slowest: L0 > L1 > L2 in frequency."""

    L0 = 0
    L1 = 1
    L2 = 2


#: Exported counter names, one per level plus the pending-request counter.
COUNTER_NAMES = ("LVL0_TURBO_LICENSE", "LVL1_TURBO_LICENSE", "LVL2_TURBO_LICENSE", "THROTTLE")


class InvalidDemandError(ValueError):
    """A segment demanded L0, which is not a requestable license."""


class LicenseStateError(RuntimeError):
    """Internal inconsistency in the license state machine (simulation bug)."""


def _as_fraction(value) -> Fraction:
    # Parse via str() so decimal literals like 2.8 stay exact.
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        return Fraction(str(value))
    return Fraction(value)


@dataclass(frozen=True)
class CpuParams:
    """CPU-side model parameters.

    Durations are nanoseconds.  ``throttle_speed_factor`` scales the
    target-level frequency during a pending license request; vendor
    documentation only promises "reduced performance" for that window, so
    the factor is exposed rather than guessed.
    """

    freq_ghz: Mapping[FrequencyLevel, Fraction] = field(
        default_factory=lambda: {
            FrequencyLevel.L0: Fraction("2.8"),
            FrequencyLevel.L1: Fraction("2.4"),
            FrequencyLevel.L2: Fraction("1.9"),
        }
    )
    license_grant_delay_ns: int = 500_000
    revert_delay_ns: int = 2_000_000
    detection_delay_cycles: int = 100
    throttle_speed_factor: Fraction = Fraction(1)

    def __post_init__(self):
        freqs = {lvl: _as_fraction(self.freq_ghz[lvl]) for lvl in FrequencyLevel}
        object.__setattr__(self, "freq_ghz", freqs)
        object.__setattr__(self, "throttle_speed_factor", _as_fraction(self.throttle_speed_factor))
        if not (freqs[FrequencyLevel.L0] > freqs[FrequencyLevel.L1] > freqs[FrequencyLevel.L2] > 0):
            raise ValueError("freq_ghz must satisfy L0 > L1 > L2 > 0")
        if self.license_grant_delay_ns < 0 or self.revert_delay_ns < 0:
            raise ValueError("delays must be non-negative")
        if self.detection_delay_cycles < 0:
            raise ValueError("detection_delay_cycles must be non-negative")
        if not (0 < self.throttle_speed_factor <= 1):
            raise ValueError("throttle_speed_factor must be in (0, 1]")

    def throttle_freq_ghz(self, target: FrequencyLevel) -> Fraction:
        return self.freq_ghz[target] * self.throttle_speed_factor


class TimeBase:
    """Integer time grid for one CPU parameterisation.

    One tick is 1/(units_per_ns) ns, with units_per_ns chosen so that every
    cycle period (including throttled periods) is a whole number of ticks.
    """

    __slots__ = ("units_per_ns", "period", "throttle_period")

    def __init__(self, cpu: CpuParams):
        periods = []
        for lvl in FrequencyLevel:
            periods.append(1 / cpu.freq_ghz[lvl])  # ns per cycle
            periods.append(1 / cpu.throttle_freq_ghz(lvl))
        self.units_per_ns = lcm(*(p.denominator for p in periods))
        self.period: Dict[FrequencyLevel, int] = {}
        self.throttle_period: Dict[FrequencyLevel, int] = {}
        for lvl in FrequencyLevel:
            self.period[lvl] = int((1 / cpu.freq_ghz[lvl]) * self.units_per_ns)
            self.throttle_period[lvl] = int((1 / cpu.throttle_freq_ghz(lvl)) * self.units_per_ns)

    def ns_to_units(self, ns: int) -> int:
        return int(ns) * self.units_per_ns

    def units_to_ns(self, units: int) -> float:
        return units / self.units_per_ns


class FrequencyLicense:
    """License and cycle-counter state for one core.

    The engine drives all timing (detection windows, grant and revert
    events); this object owns the state transitions and the tallies.
    Grant and revert timers carry epochs so that cancelled timer events can
    be recognised as stale and dropped.
    """

    __slots__ = (
        "core_id",
        "cpu",
        "timebase",
        "granted",
        "pending_target",
        "pending_grant_at",
        "pending_epoch",
        "revert_at",
        "revert_epoch",
        "level_cycles",
        "throttle_cycles",
    )

    def __init__(self, core_id: int, cpu: CpuParams, timebase: TimeBase):
        self.core_id = core_id
        self.cpu = cpu
        self.timebase = timebase
        self.granted = FrequencyLevel.L0
        self.pending_target: Optional[FrequencyLevel] = None
        self.pending_grant_at = 0
        self.pending_epoch = 0
        self.revert_at: Optional[int] = None
        self.revert_epoch = 0
        self.level_cycles = [0, 0, 0]
        self.throttle_cycles = [0, 0, 0]  # indexed by pending target level

    # -- state transitions -------------------------------------------------

    def demand_start(self, demand: FrequencyLevel) -> bool:
        """Begin an execution interval of code demanding `demand`.

        Cancels any armed revert timer.  Returns True when a detection
        window toward `demand` must run (demand is strictly lower-frequency
        than the granted level and no equal request is already pending).
        A different outstanding request is withdrawn before re-detection.
        """
        if demand == FrequencyLevel.L0:
            raise InvalidDemandError("L0 cannot be demanded; it is the default level")
        self.cancel_revert()
        if self.pending_target == demand:
            return False
        if demand > self.granted:  # larger ordinal = lower frequency
            if self.pending_target is not None:
                self.cancel_pending()
            return True
        return False

    def set_pending(self, target: FrequencyLevel, grant_at: int) -> int:
        """Record a license request; returns the epoch for the grant event."""
        if self.pending_target is not None:
            raise LicenseStateError("license request made while another is pending")
        if target <= self.granted:
            raise LicenseStateError("pending target must be strictly lower-frequency than granted")
        self.pending_target = target
        self.pending_grant_at = grant_at
        self.pending_epoch += 1
        return self.pending_epoch

    def grant(self) -> None:
        if self.pending_target is None:
            raise LicenseStateError("grant event with no pending request")
        self.granted = self.pending_target
        self.pending_target = None

    def demand_end(self, now: int) -> Optional[int]:
        """The demanding interval stopped; arm the revert timer.

        Returns the revert epoch when a timer was armed, else None (nothing
        to revert: already at L0 with no request outstanding).
        """
        if self.granted == FrequencyLevel.L0 and self.pending_target is None:
            return None
        self.revert_at = now + self.timebase.ns_to_units(self.cpu.revert_delay_ns)
        self.revert_epoch += 1
        return self.revert_epoch

    def revert(self) -> None:
        """Timer fired: return to L0.  An unanswered request is withdrawn."""
        self.granted = FrequencyLevel.L0
        self.revert_at = None
        if self.pending_target is not None:
            self.cancel_pending()

    def cancel_revert(self) -> None:
        if self.revert_at is not None:
            self.revert_at = None
            self.revert_epoch += 1

    def cancel_pending(self) -> None:
        self.pending_target = None
        self.pending_epoch += 1

    # -- speed and accounting ----------------------------------------------

    def effective_period_units(self) -> int:
        """Ticks per cycle at the current effective speed."""
        if self.pending_target is not None:
            return self.timebase.throttle_period[self.pending_target]
        return self.timebase.period[self.granted]

    def effective_frequency_ghz(self) -> Fraction:
        if self.pending_target is not None:
            return self.cpu.throttle_freq_ghz(self.pending_target)
        return self.cpu.freq_ghz[self.granted]

    def tally(self, cycles: int) -> bool:
        """Account executed cycles at the current state.

        Returns True when the cycles were throttled (pending request).
        """
        if cycles < 0:
            raise ValueError("cycles must be non-negative")
        if self.pending_target is not None:
            self.throttle_cycles[self.pending_target] += cycles
            return True
        self.level_cycles[self.granted] += cycles
        return False

    def counters(self) -> Dict[str, int]:
        return {
            "LVL0_TURBO_LICENSE": self.level_cycles[0],
            "LVL1_TURBO_LICENSE": self.level_cycles[1],
            "LVL2_TURBO_LICENSE": self.level_cycles[2],
            "THROTTLE": sum(self.throttle_cycles),
        }

    def total_cycles(self) -> int:
        return sum(self.level_cycles) + sum(self.throttle_cycles)

    def weighted_cycle_ghz(self) -> Fraction:
        """Sum of cycles x frequency, for cycle-weighted mean frequency."""
        total = Fraction(0)
        for lvl in FrequencyLevel:
            total += self.level_cycles[lvl] * self.cpu.freq_ghz[lvl]
            total += self.throttle_cycles[lvl] * self.cpu.throttle_freq_ghz(lvl)
        return total
