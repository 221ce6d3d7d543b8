"""Independent piecewise-analytic wall-time calculator for single-core runs.

Walks a task program entry by entry, tracking the license state machine by
hand with straight-line arithmetic (no event queue, no scheduler).  Used to
cross-check the engine on single-task single-core scenarios.

Semantics mirrored from the documented model:
  * times are integer ticks; a cycle that starts strictly before a state
    change completes at the old speed, the new speed applies from the next
    cycle boundary;
  * a vector-heavy segment cancels the revert timer at entry; if it demands
    a lower-frequency level than granted and no equal request is pending,
    any different pending request is withdrawn and, provided the segment is
    longer than the detection window, the request is filed after
    detection_delay_cycles run at the granted speed;
  * the grant arrives license_grant_delay later; cycles in between run at
    the throttled target speed;
  * when the segment ends (and the level or a request is still low), the
    revert timer is armed for revert_delay later; firing returns the core
    to L0 and withdraws any unanswered request;
  * kind-change markers cost a fixed wall-time window during which timers
    still fire; on a single core no migration happens.
"""

from __future__ import annotations

from typing import List, Optional, Tuple

from corespec.freqmodel import CpuParams, FrequencyLevel, TimeBase


class OracleState:
    def __init__(self, cpu: CpuParams):
        self.cpu = cpu
        self.tb = TimeBase(cpu)
        self.granted = FrequencyLevel.L0
        self.pending: Optional[Tuple[FrequencyLevel, int]] = None  # (target, grant_at)
        self.revert_at: Optional[int] = None
        self.revert_armed_at = 0
        self.grant_units = self.tb.ns_to_units(cpu.license_grant_delay_ns)
        self.revert_units = self.tb.ns_to_units(cpu.revert_delay_ns)

    def period(self) -> int:
        if self.pending is not None:
            return self.tb.throttle_period[self.pending[0]]
        return self.tb.period[self.granted]

    def next_timer(self) -> Optional[int]:
        times = []
        if self.pending is not None:
            times.append(self.pending[1])
        if self.revert_at is not None:
            times.append(self.revert_at)
        return min(times) if times else None

    def apply_due(self, now: int, demand_entry: bool = False) -> None:
        # Fire timers chronologically; a grant armed earlier beats a revert
        # armed at the same tick (matches event-queue insertion order).  A
        # revert armed at this very tick does not fire before a demanding
        # segment starting now: back-to-back demand leaves no gap, and the
        # segment's entry cancels the timer before the event would pop.
        while True:
            nxt = self.next_timer()
            if nxt is None or nxt > now:
                return
            grant_t = self.pending[1] if self.pending is not None else None
            if grant_t is not None and grant_t == nxt:
                self.granted = self.pending[0]
                self.pending = None
                continue
            if demand_entry and self.revert_at == now and self.revert_armed_at == now:
                return
            self.granted = FrequencyLevel.L0
            self.revert_at = None
            self.pending = None  # unanswered request is withdrawn


def run_program(cpu: CpuParams, kind_change_cost_ns: int, entries: List[tuple]) -> int:
    """Returns the finish tick of a single task running alone on one core."""
    st = OracleState(cpu)
    cost_units = kind_change_cost_ns * st.tb.units_per_ns
    t = 0
    for entry in entries:
        tag = entry[0]
        if tag == "u":
            continue
        if tag == "k":
            t += cost_units
            st.apply_due(t)
            continue
        if tag == "r":
            for _ in range(entry[1]):
                t = _run_block(st, cost_units, entry[2], t)
            continue
        # compute entry
        t = _run_compute(st, entry, t)
    return t


def _run_block(st: OracleState, cost_units: int, entries: List[tuple], t: int) -> int:
    for entry in entries:
        tag = entry[0]
        if tag == "u":
            continue
        if tag == "k":
            t += cost_units
            st.apply_due(t)
        elif tag == "r":
            for _ in range(entry[1]):
                t = _run_block(st, cost_units, entry[2], t)
        else:
            t = _run_compute(st, entry, t)
    return t


def _run_compute(st: OracleState, entry: tuple, t: int) -> int:
    demand: Optional[FrequencyLevel] = entry[1]
    cycles: int = entry[2]
    st.apply_due(t, demand_entry=demand is not None)
    if demand is not None:
        st.revert_at = None
        need = False
        if st.pending is not None and st.pending[0] == demand:
            need = False
        elif demand > st.granted:
            if st.pending is not None:
                st.pending = None  # superseded request is withdrawn
            need = True
        if need:
            det = st.cpu.detection_delay_cycles
            if det == 0:
                st.pending = (demand, t + st.grant_units)
            elif cycles > det:
                t += det * st.tb.period[st.granted]
                cycles -= det
                st.pending = (demand, t + st.grant_units)
    t = _run_cycles(st, cycles, t)
    if demand is not None:
        st.apply_due(t)
        if st.granted != FrequencyLevel.L0 or st.pending is not None:
            st.revert_at = t + st.revert_units
            st.revert_armed_at = t
    return t


def _run_cycles(st: OracleState, cycles: int, t: int) -> int:
    while cycles > 0:
        st.apply_due(t)
        p = st.period()
        nxt = st.next_timer()
        if nxt is None or nxt <= t:
            # nxt <= t cannot happen after apply_due; defensive
            t += cycles * p
            return t
        started_before = -(-(nxt - t) // p)  # cycles starting in [t, nxt)
        if started_before >= cycles:
            t += cycles * p
            return t
        t += started_before * p
        cycles -= started_before
    return t
