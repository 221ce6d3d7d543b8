"""Discrete-event simulation core.

One engine instance owns a virtual clock, an event heap and per-core state
(running task, current compute chunk, frequency license).  Work is measured
in integer cycles; time is measured in integer ticks of the CPU timebase,
so cycle/time conversions are exact, cycle conservation holds exactly and
identical configurations replay bit-identically.

Frequency changes are cycle-quantised: a cycle that started before a grant
or revert completes at the old speed and is tallied under the old license
state; the new speed applies from the next cycle boundary.  The same rule
delays preemption and quantum-expiry stops to the end of the in-flight
cycle, so no cycle is ever split or lost.
"""

from __future__ import annotations

import heapq
import json
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Tuple

from .freqmodel import (
    COUNTER_NAMES,
    CpuParams,
    FrequencyLevel,
    FrequencyLicense,
    LicenseStateError,
    TimeBase,
)
from .scheduler import (
    FINISHED,
    QUEUED,
    RUNNING,
    Policy,
    SchedParams,
    Scheduler,
    Task,
    TaskKind,
)

log = logging.getLogger(__name__)

# Event kinds, dispatched in (time, seq) order.
EV_ARRIVAL = 0
EV_WAKE = 1
EV_SEG_DONE = 2
EV_DETECT_DONE = 3
EV_KIND_DONE = 4
EV_MIG_DONE = 5
EV_STOP = 6
EV_QUANTUM = 7
EV_PREEMPT = 8
EV_GRANT = 9
EV_REVERT = 10
EV_WARMUP = 11

# Core states.
IDLE = 0
COMPUTE = 1
OVERHEAD_KIND = 2
OVERHEAD_MIG = 3
STOPPING = 4


class SimulationError(RuntimeError):
    """The simulation reached an inconsistent internal state."""


class _Core:
    __slots__ = (
        "core_id",
        "is_avx",
        "lic",
        "task",
        "state",
        "act_epoch",
        "quantum_epoch",
        "chunk_start",
        "chunk_period",
        "chunk_cycles",
        "seg_demand",
        "seg_label",
        "seg_left",
        "detect_demand",
        "pending_kind",
        "stop_quantum",
        "stop_preempt",
        "expiry_deferred",
        "preempt_deferred",
        "wake_posted",
    )

    def __init__(self, core_id: int, is_avx: bool, lic: FrequencyLicense):
        self.core_id = core_id
        self.is_avx = is_avx
        self.lic = lic
        self.task: Optional[Task] = None
        self.state = IDLE
        self.act_epoch = 0
        self.quantum_epoch = 0
        self.chunk_start = 0
        self.chunk_period = 1
        self.chunk_cycles = 0
        self.seg_demand: Optional[FrequencyLevel] = None
        self.seg_label = ""
        self.seg_left = 0
        self.detect_demand: Optional[FrequencyLevel] = None
        self.pending_kind = TaskKind.SCALAR
        self.stop_quantum = False
        self.stop_preempt = False
        self.expiry_deferred = False
        self.preempt_deferred = False
        self.wake_posted = False


@dataclass
class SimReport:
    """Everything a run produces, over the measurement window."""

    policy: str
    workload: str
    n_cores: int
    avx_core_ids: List[int]
    seed: int
    horizon_ns: int
    warmup_ns: int
    simulated_end_ns: float
    measured_ns: float
    drained: bool
    units: int
    units_per_sec: float
    kind_changes: int
    kind_changes_per_sec_per_core: float
    mean_freq_ghz: float
    per_core_counters: List[Dict[str, int]]
    total_counters: Dict[str, int]
    tasks: List[dict]
    attribution: List[dict]
    violations: List[str]
    config_echo: Optional[dict] = None

    def to_dict(self) -> dict:
        return {
            "policy": self.policy,
            "workload": self.workload,
            "n_cores": self.n_cores,
            "avx_core_ids": list(self.avx_core_ids),
            "seed": self.seed,
            "horizon_ns": self.horizon_ns,
            "warmup_ns": self.warmup_ns,
            "simulated_end_ns": self.simulated_end_ns,
            "measured_ns": self.measured_ns,
            "drained": self.drained,
            "units": self.units,
            "units_per_sec": self.units_per_sec,
            "kind_changes": self.kind_changes,
            "kind_changes_per_sec_per_core": self.kind_changes_per_sec_per_core,
            "mean_freq_ghz": self.mean_freq_ghz,
            "per_core_counters": self.per_core_counters,
            "total_counters": self.total_counters,
            "tasks": self.tasks,
            "attribution": self.attribution,
            "violations": self.violations,
            "config_echo": self.config_echo,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def human_summary(self) -> str:
        lines = [
            f"policy               {self.policy}",
            f"workload             {self.workload}",
            f"cores                {self.n_cores} (avx: {list(self.avx_core_ids)})",
            f"simulated            {self.simulated_end_ns / 1e6:.3f} ms"
            + (" [drained]" if self.drained else ""),
            f"measured window      {self.measured_ns / 1e6:.3f} ms",
            f"work units           {self.units}",
            f"throughput           {self.units_per_sec:.1f} units/s",
            f"kind changes         {self.kind_changes}"
            f" ({self.kind_changes_per_sec_per_core:.1f}/s/core)",
            f"mean frequency       {self.mean_freq_ghz:.4f} GHz (cycle-weighted)",
            "counters (measured window):",
        ]
        header = f"  {'core':>4} " + " ".join(f"{n:>20}" for n in COUNTER_NAMES)
        lines.append(header)
        for row in self.per_core_counters:
            lines.append(
                f"  {row['core']:>4} " + " ".join(f"{row[n]:>20}" for n in COUNTER_NAMES)
            )
        lines.append(
            "  " + "total".rjust(4) + " "
            + " ".join(f"{self.total_counters[n]:>20}" for n in COUNTER_NAMES)
        )
        if self.violations:
            lines.append(f"VIOLATIONS: {len(self.violations)}")
        return "\n".join(lines)


class Engine:
    """Single-threaded event loop driving scheduler and frequency model.

    Instances are independent; a sweep may run many engines in parallel
    processes with no shared mutable state.
    """

    def __init__(
        self,
        cpu: CpuParams,
        sched: SchedParams,
        tasks: List[Task],
        horizon_ns: int,
        warmup_ns: int = 50_000_000,
        seed: int = 0,
        trace: bool = False,
        monitor: bool = True,
        workload_desc: str = "custom",
        config_echo: Optional[dict] = None,
    ):
        if not tasks:
            raise ValueError("empty workload")
        if horizon_ns <= warmup_ns:
            raise ValueError("horizon must exceed warmup")
        self.cpu = cpu
        self.timebase = TimeBase(cpu)
        self.sched = Scheduler(sched, self.timebase.units_per_ns)
        self.sched_params = sched
        self.tasks = tasks
        self.horizon_units = self.timebase.ns_to_units(horizon_ns)
        self.warmup_units = self.timebase.ns_to_units(warmup_ns)
        self.horizon_ns = horizon_ns
        self.warmup_ns = warmup_ns
        self.seed = seed
        self.workload_desc = workload_desc
        self.config_echo = config_echo

        max_ratio = max(t.priority_ratio for t in tasks)
        if self.sched.penalty_units <= self.horizon_units + self.sched.rr_units * max_ratio:
            raise ValueError(
                "scalar_penalty must exceed any deadline reachable within the horizon"
            )

        self.cores = [
            _Core(c, c in self.sched.avx_cores, FrequencyLicense(c, cpu, self.timebase))
            for c in range(sched.n_cores)
        ]
        self.heap: List[tuple] = []
        self.seq = 0
        self.now = 0
        self.units_total = 0
        self.units_measured = 0
        self.kindch_measured = 0
        self.attribution: Dict[Tuple[str, str], int] = {}
        self.n_finished = 0
        self.monitor = monitor
        self.violations: List[str] = []
        self.trace_lines: Optional[List[str]] = [] if trace else None
        self._snap_levels: Optional[List[List[int]]] = None
        self._snap_throttle: Optional[List[List[int]]] = None
        self._snap_attr: Dict[Tuple[str, str], int] = {}
        self._kind_cost_units = sched.kind_change_cost_ns * self.timebase.units_per_ns
        self._mig_cost_units = sched.migration_cost_ns * self.timebase.units_per_ns
        self._grant_units = self.timebase.ns_to_units(cpu.license_grant_delay_ns)
        self._ran = False

    # ------------------------------------------------------------------
    # plumbing
    # ------------------------------------------------------------------

    def _push(self, t: int, kind: int, a, b: int = 0) -> None:
        self.seq += 1
        heapq.heappush(self.heap, (t, self.seq, kind, a, b))

    def _fmt_time(self, units: int) -> str:
        upn = self.timebase.units_per_ns
        ns, frac = divmod(units, upn)
        micro = (frac * 1_000_000 + upn // 2) // upn
        if micro == 1_000_000:
            ns += 1
            micro = 0
        return f"{ns}.{micro:06d}"

    def _tr(self, core, event: str, task, detail: str = "-") -> None:
        if self.trace_lines is None:
            return
        c = str(core) if core is not None else "-"
        t = task.name if task is not None else "-"
        self.trace_lines.append(f"{self._fmt_time(self.now)} {c} {event} {t} {detail}")

    def _violation(self, msg: str) -> None:
        self.violations.append(f"t={self._fmt_time(self.now)}ns {msg}")

    # ------------------------------------------------------------------
    # run loop
    # ------------------------------------------------------------------

    def run(self) -> SimReport:
        if self._ran:
            raise SimulationError("engine instances are single-use")
        self._ran = True
        for task in sorted(self.tasks, key=lambda t: (t.arrival_ns, t.task_id)):
            self._push(self.timebase.ns_to_units(task.arrival_ns), EV_ARRIVAL, task)
        self._push(self.warmup_units, EV_WARMUP, None)

        heap = self.heap
        horizon = self.horizon_units
        drained = True
        while heap:
            t, _seq, kind, a, b = heapq.heappop(heap)
            if t >= horizon:
                drained = False
                break
            self.now = t
            if kind == EV_SEG_DONE:
                if b == a.act_epoch:
                    self._on_seg_done(a)
            elif kind == EV_DETECT_DONE:
                if b == a.act_epoch:
                    self._on_detect_done(a)
            elif kind == EV_KIND_DONE:
                if b == a.act_epoch:
                    self._on_kind_done(a)
            elif kind == EV_MIG_DONE:
                if b == a.act_epoch:
                    self._on_resume(a)
            elif kind == EV_STOP:
                if b == a.act_epoch:
                    self._on_stop(a)
            elif kind == EV_QUANTUM:
                if b == a.quantum_epoch:
                    self._on_quantum_expiry(a)
            elif kind == EV_PREEMPT:
                self._on_preempt(a)
            elif kind == EV_GRANT:
                if b == a.lic.pending_epoch:
                    self._on_grant(a)
            elif kind == EV_REVERT:
                if b == a.lic.revert_epoch:
                    self._on_revert(a)
            elif kind == EV_WAKE:
                a.wake_posted = False
                if a.state == IDLE:
                    self._pick_and_dispatch(a)
            elif kind == EV_ARRIVAL:
                self._on_arrival(a)
            elif kind == EV_WARMUP:
                self._on_warmup()
            else:  # pragma: no cover
                raise SimulationError(f"unknown event kind {kind}")
        end_units = horizon if not drained else self.now
        if drained:
            self._tr(None, "drained", None)
        return self._build_report(end_units, drained)

    # ------------------------------------------------------------------
    # cycle accounting
    # ------------------------------------------------------------------

    def _retire(self, core: _Core, cycles: int) -> None:
        task = core.task
        throttled = core.lic.tally(cycles)
        task.cycles_done += cycles
        core.seg_left -= cycles
        if throttled:
            key = (task.name, core.seg_label)
            self.attribution[key] = self.attribution.get(key, 0) + cycles
        if self.monitor and self.sched.is_cs and not core.is_avx and task.kind == TaskKind.AVX:
            self._violation(
                f"isolation: core {core.core_id} executed {cycles} cycles of avx task {task.name}"
            )

    def _truncate_chunk(self, core: _Core, now: int) -> int:
        """Retire the cycles that started before `now`; return the tick the
        last of them completes (the earliest moment the core can act)."""
        p = core.chunk_period
        elapsed = now - core.chunk_start
        if elapsed > 0:
            started = -(-elapsed // p)
            if started > core.chunk_cycles:
                started = core.chunk_cycles
            if started:
                self._retire(core, started)
            core.chunk_start += started * p
            core.chunk_cycles -= started
        return core.chunk_start

    # ------------------------------------------------------------------
    # segment execution
    # ------------------------------------------------------------------

    def _start_segment(self, core: _Core) -> None:
        task = core.task
        entry = task.cursor.current()
        demand = entry[1]
        left = task.cursor.remaining_cycles()
        core.seg_demand = demand
        core.seg_label = entry[3]
        core.seg_left = left
        core.detect_demand = None
        lic = core.lic
        detect = False
        if demand is not None:
            # A vector-heavy execution interval begins on this core.
            need_request = lic.demand_start(demand)
            if need_request:
                det = self.cpu.detection_delay_cycles
                if det == 0:
                    ep = lic.set_pending(demand, self.now + self._grant_units)
                    self._push(lic.pending_grant_at, EV_GRANT, core, ep)
                    self._tr(core.core_id, "request", task, f"target={demand.name}")
                elif left > det:
                    detect = True
        core.state = COMPUTE
        core.act_epoch += 1
        core.chunk_start = self.now
        core.chunk_period = lic.effective_period_units()
        if detect:
            core.detect_demand = demand
            core.chunk_cycles = self.cpu.detection_delay_cycles
            self._push(
                self.now + core.chunk_cycles * core.chunk_period,
                EV_DETECT_DONE,
                core,
                core.act_epoch,
            )
        else:
            core.chunk_cycles = left
            self._push(
                self.now + left * core.chunk_period, EV_SEG_DONE, core, core.act_epoch
            )

    def _on_detect_done(self, core: _Core) -> None:
        # Detection window over: the core now asks for the lower license and
        # runs throttled until the grant.
        self._retire(core, core.chunk_cycles)
        lic = core.lic
        demand = core.detect_demand
        core.detect_demand = None
        ep = lic.set_pending(demand, self.now + self._grant_units)
        self._push(lic.pending_grant_at, EV_GRANT, core, ep)
        self._tr(core.core_id, "request", core.task, f"target={demand.name}")
        core.act_epoch += 1
        core.chunk_start = self.now
        core.chunk_period = lic.effective_period_units()
        core.chunk_cycles = core.seg_left
        self._push(
            self.now + core.chunk_cycles * core.chunk_period,
            EV_SEG_DONE,
            core,
            core.act_epoch,
        )

    def _on_seg_done(self, core: _Core) -> None:
        if core.chunk_cycles:
            self._retire(core, core.chunk_cycles)
            core.chunk_cycles = 0
        task = core.task
        if core.seg_demand is not None:
            self._demand_end(core)
        task.cursor.advance()
        core.seg_demand = None
        self._advance_entries(core)

    def _demand_end(self, core: _Core) -> None:
        ep = core.lic.demand_end(self.now)
        self._tr(core.core_id, "demand_end", core.task)
        if ep is not None:
            self._push(core.lic.revert_at, EV_REVERT, core, ep)

    # ------------------------------------------------------------------
    # license events
    # ------------------------------------------------------------------

    def _on_grant(self, core: _Core) -> None:
        if core.state == COMPUTE:
            if core.detect_demand is not None:  # pragma: no cover
                raise SimulationError("license grant during a detection window")
            self._truncate_chunk(core, self.now)
            core.lic.grant()
            self._retime_chunk(core)
        else:
            core.lic.grant()
        self._tr(core.core_id, "grant", core.task, f"level={core.lic.granted.name}")

    def _on_revert(self, core: _Core) -> None:
        if self.monitor and core.state == COMPUTE and core.seg_demand is not None:
            self._violation(f"revert fired during vector segment on core {core.core_id}")
        if core.state == COMPUTE:
            self._truncate_chunk(core, self.now)
            core.lic.revert()
            self._retime_chunk(core)
        else:
            core.lic.revert()
        self._tr(core.core_id, "revert", core.task)

    def _retime_chunk(self, core: _Core) -> None:
        # Residual cycles of the running segment continue at the new speed
        # from the boundary of the last retired cycle; nothing is lost.
        core.act_epoch += 1
        core.chunk_period = core.lic.effective_period_units()
        core.chunk_cycles = core.seg_left
        self._push(
            core.chunk_start + core.chunk_cycles * core.chunk_period,
            EV_SEG_DONE,
            core,
            core.act_epoch,
        )

    # ------------------------------------------------------------------
    # program advancement
    # ------------------------------------------------------------------

    def _advance_entries(self, core: _Core) -> None:
        while True:
            task = core.task
            entry = task.cursor.current()
            if entry is None:
                self._finish_task(core, task)
                res = self.sched.pick_next(core.core_id)
                if res is None:
                    core.state = IDLE
                    return
                if self._install(core, res[0], res[1]):
                    return
                continue
            tag = entry[0]
            if tag == "u":
                self._count_unit(task)
                task.cursor.advance()
            elif tag == "k":
                new_kind = TaskKind(entry[1])
                if new_kind == TaskKind.UNTYPED:
                    raise ValueError("tasks cannot re-declare themselves untyped")
                core.pending_kind = new_kind
                core.state = OVERHEAD_KIND
                core.act_epoch += 1
                self._push(self.now + self._kind_cost_units, EV_KIND_DONE, core, core.act_epoch)
                return
            elif tag == "c":
                if entry[2] <= 0:
                    log.warning("skipping zero-cycle segment in task %s", task.name)
                    task.cursor.advance()
                    continue
                self._start_segment(core)
                return
            else:  # pragma: no cover
                raise SimulationError(f"unknown program entry {entry!r}")

    def _count_unit(self, task: Task) -> None:
        task.units_done += 1
        self.units_total += 1
        if self.now >= self.warmup_units:
            self.units_measured += 1
        self._tr(task.last_core, "unit", task, f"n={task.units_done}")

    def _finish_task(self, core: _Core, task: Task) -> None:
        task.finished_at = self.now
        task.where = FINISHED
        self.n_finished += 1
        self._tr(core.core_id, "finish", task)
        core.task = None
        core.quantum_epoch += 1

    # ------------------------------------------------------------------
    # kind changes
    # ------------------------------------------------------------------

    def _on_kind_done(self, core: _Core) -> None:
        task = core.task
        new_kind = core.pending_kind
        task.kind_changes += 1
        if self.now >= self.warmup_units:
            self.kindch_measured += 1
        task.cursor.advance()
        old_kind = task.kind
        task.kind = new_kind
        self._tr(core.core_id, "kindchange", task, f"{old_kind.name}->{new_kind.name}")

        if not self.sched.is_cs or task.cursor.current() is None:
            self._on_resume(core)
            return

        if new_kind == TaskKind.AVX and not core.is_avx:
            # Declared vector work on a non-vector core: suspend immediately,
            # queue locally and poke one vector core that is running scalar
            # filler so the new vector task gets picked promptly.
            self._deschedule(core, task)
            target = self._preempt_target()
            if target is not None:
                self._push(self.now, EV_PREEMPT, target)
                self._tr(core.core_id, "ipi", task, f"target={target.core_id}")
            self._pick_and_dispatch(core)
            return

        # Any other change invokes the scheduler on this core; the running
        # task competes with its current deadline and wins ties.
        res = self.sched.pick_next(core.core_id, incumbent=task)
        winner, src = res
        if winner is not task:
            self._deschedule(core, task)
            self._dispatch(core, winner, src)
        else:
            self._on_resume(core)

    def _deschedule(self, core: _Core, task: Task) -> None:
        core.task = None
        core.quantum_epoch += 1
        core.expiry_deferred = False
        core.preempt_deferred = False
        self._enqueue(task, core.core_id)

    def _enqueue(self, task: Task, core_id: int) -> None:
        self.sched.enqueue(task, core_id, self.now)
        self._tr(core_id, "enqueue", task, f"kind={task.kind.name} deadline={task.deadline}")
        self._wake_idle(task.kind)

    def _wake_idle(self, kind: TaskKind) -> None:
        for other in self.cores:
            if other.state == IDLE and not other.wake_posted:
                if kind in self.sched.eligible_kinds(other.core_id):
                    other.wake_posted = True
                    self._push(self.now, EV_WAKE, other)

    def _preempt_target(self) -> Optional[_Core]:
        # Latest-deadline scalar filler among the vector cores; ties go to
        # the lowest core id.
        best = None
        best_key = None
        for core in self.cores:
            if not core.is_avx or core.state in (IDLE, STOPPING):
                continue
            task = core.task
            if task is None or task.kind != TaskKind.SCALAR:
                continue
            key = (task.deadline, -core.core_id)
            if best_key is None or key > best_key:
                best_key = key
                best = core
        return best

    def _on_resume(self, core: _Core) -> None:
        """Continue the running task after an overhead window, honouring any
        interrupt that arrived during the window."""
        task = core.task
        if core.expiry_deferred or core.preempt_deferred:
            expiry = core.expiry_deferred
            preempt = (
                core.preempt_deferred
                and core.is_avx
                and task.kind == TaskKind.SCALAR
            )
            core.expiry_deferred = False
            core.preempt_deferred = False
            if expiry or preempt:
                if expiry:
                    task.deadline = self.sched.compute_deadline(task, self.now)
                self._deschedule(core, task)
                self._pick_and_dispatch(core)
                return
        core.state = COMPUTE  # transient; _advance_entries sets the real state
        self._advance_entries(core)

    # ------------------------------------------------------------------
    # preemption and quantum expiry
    # ------------------------------------------------------------------

    def _on_preempt(self, core: _Core) -> None:
        task = core.task
        if (
            not self.sched.is_cs
            or not core.is_avx
            or task is None
            or task.kind != TaskKind.SCALAR
        ):
            return  # stale interrupt
        if core.state == COMPUTE:
            self._begin_stop(core, quantum=False, preempt=True)
        elif core.state in (OVERHEAD_KIND, OVERHEAD_MIG):
            core.preempt_deferred = True
        # STOPPING: already on its way out

    def _on_quantum_expiry(self, core: _Core) -> None:
        if core.state == COMPUTE:
            self._begin_stop(core, quantum=True, preempt=False)
        elif core.state in (OVERHEAD_KIND, OVERHEAD_MIG):
            core.expiry_deferred = True
        elif core.state == STOPPING:
            core.stop_quantum = True

    def _begin_stop(self, core: _Core, quantum: bool, preempt: bool) -> None:
        boundary = self._truncate_chunk(core, self.now)
        core.state = STOPPING
        core.stop_quantum = core.stop_quantum or quantum
        core.stop_preempt = core.stop_preempt or preempt
        core.act_epoch += 1
        self._push(boundary, EV_STOP, core, core.act_epoch)

    def _on_stop(self, core: _Core) -> None:
        task = core.task
        reason = "quantum" if core.stop_quantum else "preempt"
        self._tr(core.core_id, "stop", task, f"reason={reason} residual={core.seg_left}")
        if core.seg_demand is not None:
            # The core ceases to execute vector-heavy code at this boundary.
            self._demand_end(core)
            core.seg_demand = None
        if core.seg_left == 0:
            task.cursor.advance()
        else:
            task.cursor.residual = core.seg_left
        core.detect_demand = None
        if core.stop_quantum:
            task.deadline = self.sched.compute_deadline(task, self.now)
        core.stop_quantum = False
        core.stop_preempt = False
        if task.cursor.current() is None:
            self._finish_task(core, task)
        else:
            self._deschedule(core, task)
        self._pick_and_dispatch(core)

    # ------------------------------------------------------------------
    # dispatch
    # ------------------------------------------------------------------

    def _on_arrival(self, task: Task) -> None:
        task.deadline = self.sched.compute_deadline(task, self.now)
        home = task.task_id % self.sched.params.n_cores
        task.where = QUEUED
        self._tr(home, "arrive", task, f"kind={task.kind.name}")
        self._enqueue(task, home)

    def _pick_and_dispatch(self, core: _Core) -> None:
        res = self.sched.pick_next(core.core_id)
        if res is None:
            core.state = IDLE
            core.task = None
            return
        self._dispatch(core, res[0], res[1])

    def _dispatch(self, core: _Core, task: Task, src: int) -> None:
        if not self._install(core, task, src):
            self._advance_entries(core)

    def _install(self, core: _Core, task: Task, src: int) -> bool:
        """Dispatch bookkeeping for a freshly picked task.

        Returns True when a migration-overhead window was scheduled (the
        program then advances when it completes), False when the caller
        should advance the program immediately.
        """
        if self.monitor and self.sched.is_cs:
            if not core.is_avx and task.kind == TaskKind.AVX:
                self._violation(
                    f"isolation: avx task {task.name} dispatched on scalar core {core.core_id}"
                )
            if (
                core.is_avx
                and task.kind == TaskKind.SCALAR
                and self.sched.has_eligible_nonscalar(core.core_id)
            ):
                self._violation(
                    f"priority: scalar task {task.name} picked on avx core {core.core_id}"
                    " while avx/untyped work was runnable"
                )
        task.where = RUNNING
        task.wait_units += self.now - task.enqueued_at
        if task.last_core is not None and task.last_core != core.core_id:
            task.migrations += 1
        migrated = src != core.core_id
        task.last_core = core.core_id
        core.task = task
        task.deadline = self.sched.compute_deadline(task, self.now)
        core.quantum_epoch += 1
        self._push(self.now + self.sched.rr_units, EV_QUANTUM, core, core.quantum_epoch)
        self._tr(core.core_id, "dispatch", task, f"src={src}")
        if migrated and self._mig_cost_units > 0:
            core.state = OVERHEAD_MIG
            core.act_epoch += 1
            self._push(self.now + self._mig_cost_units, EV_MIG_DONE, core, core.act_epoch)
            return True
        core.state = COMPUTE  # transient until the next entry decides
        return False

    # ------------------------------------------------------------------
    # measurement
    # ------------------------------------------------------------------

    def _on_warmup(self) -> None:
        self._snap_levels = [list(c.lic.level_cycles) for c in self.cores]
        self._snap_throttle = [list(c.lic.throttle_cycles) for c in self.cores]
        self._snap_attr = dict(self.attribution)

    def _build_report(self, end_units: int, drained: bool) -> SimReport:
        tb = self.timebase
        if self._snap_levels is None:  # drained before warmup
            self._on_warmup()
        measured_units = max(0, end_units - self.warmup_units)
        measured_s = tb.units_to_ns(measured_units) * 1e-9

        per_core = []
        total = {name: 0 for name in COUNTER_NAMES}
        weighted = Fraction(0)
        total_cycles = 0
        for core in self.cores:
            lic = core.lic
            levels = [a - b for a, b in zip(lic.level_cycles, self._snap_levels[core.core_id])]
            throttle = [
                a - b for a, b in zip(lic.throttle_cycles, self._snap_throttle[core.core_id])
            ]
            row = {
                "core": core.core_id,
                "LVL0_TURBO_LICENSE": levels[0],
                "LVL1_TURBO_LICENSE": levels[1],
                "LVL2_TURBO_LICENSE": levels[2],
                "THROTTLE": sum(throttle),
            }
            per_core.append(row)
            for name in COUNTER_NAMES:
                total[name] += row[name]
            for lvl in FrequencyLevel:
                weighted += levels[lvl] * self.cpu.freq_ghz[lvl]
                weighted += throttle[lvl] * self.cpu.throttle_freq_ghz(lvl)
                total_cycles += levels[lvl] + throttle[lvl]
        mean_freq = float(weighted / total_cycles) if total_cycles else 0.0

        attr_rows = []
        for (tname, label), cycles in self.attribution.items():
            windowed = cycles - self._snap_attr.get((tname, label), 0)
            if windowed:
                attr_rows.append({"task": tname, "label": label, "cycles": windowed})
        attr_rows.sort(key=lambda r: (-r["cycles"], r["task"], r["label"]))

        task_rows = []
        for task in sorted(self.tasks, key=lambda t: t.task_id):
            task_rows.append(
                {
                    "task_id": task.task_id,
                    "name": task.name,
                    "kind": task.kind.name,
                    "units": task.units_done,
                    "cycles": task.cycles_done,
                    "migrations": task.migrations,
                    "kind_changes": task.kind_changes,
                    "wait_ns": tb.units_to_ns(task.wait_units),
                    "finished_at_ns": (
                        tb.units_to_ns(task.finished_at) if task.finished_at is not None else None
                    ),
                }
            )

        return SimReport(
            policy=self.sched_params.policy.value,
            workload=self.workload_desc,
            n_cores=self.sched_params.n_cores,
            avx_core_ids=sorted(self.sched.avx_cores),
            seed=self.seed,
            horizon_ns=self.horizon_ns,
            warmup_ns=self.warmup_ns,
            simulated_end_ns=tb.units_to_ns(end_units),
            measured_ns=tb.units_to_ns(measured_units),
            drained=drained,
            units=self.units_measured,
            units_per_sec=self.units_measured / measured_s if measured_s > 0 else 0.0,
            kind_changes=self.kindch_measured,
            kind_changes_per_sec_per_core=(
                self.kindch_measured / measured_s / self.sched_params.n_cores
                if measured_s > 0
                else 0.0
            ),
            mean_freq_ghz=mean_freq,
            per_core_counters=per_core,
            total_counters=total,
            tasks=task_rows,
            attribution=attr_rows,
            violations=self.violations,
            config_echo=self.config_echo,
        )


def simulate(
    cpu: CpuParams,
    sched: SchedParams,
    tasks: List[Task],
    horizon_ns: int,
    warmup_ns: int = 50_000_000,
    seed: int = 0,
    trace: bool = False,
    monitor: bool = True,
    workload_desc: str = "custom",
    config_echo: Optional[dict] = None,
) -> SimReport:
    """Run one simulation to completion and return its report."""
    engine = Engine(
        cpu,
        sched,
        tasks,
        horizon_ns,
        warmup_ns,
        seed,
        trace=trace,
        monitor=monitor,
        workload_desc=workload_desc,
        config_echo=config_echo,
    )
    return engine.run()
