"""Deadline scheduler with replicated per-core run queues.

Two policies share one mechanism.  Under the baseline policy every core may
pick every task, which together with always-on cross-core stealing behaves
like a single deadline-ordered queue.  Under core specialization each core
keeps three deadline-ordered queues (scalar / wide-vector / untyped): cores
outside the designated vector set never pick vector tasks, while vector
cores may pick anything but see scalar tasks behind a large deadline
penalty, so they run scalar work only when nothing else is runnable.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from typing import List, Optional, Tuple

from .workloads import ProgramCursor


class TaskKind(IntEnum):
    SCALAR = 0
    AVX = 1
    UNTYPED = 2


class Policy(Enum):
    BASELINE = "baseline"
    CORE_SPECIALIZATION = "core_specialization"


@dataclass(frozen=True)
class SchedParams:
    """Scheduler knobs.  Durations are nanoseconds; the penalty is virtual ns."""

    policy: Policy = Policy.CORE_SPECIALIZATION
    n_cores: int = 12
    avx_core_ids: Tuple[int, ...] = (10, 11)
    rr_interval_ns: int = 6_000_000
    scalar_penalty_ns: int = 1_000_000_000_000
    kind_change_cost_ns: int = 225
    migration_cost_ns: int = 0

    def __post_init__(self):
        object.__setattr__(self, "avx_core_ids", tuple(sorted(set(self.avx_core_ids))))
        if self.n_cores < 1:
            raise ValueError("n_cores must be >= 1")
        if any(c < 0 or c >= self.n_cores for c in self.avx_core_ids):
            raise ValueError("avx_core_ids must be valid core ids")
        if self.policy is Policy.CORE_SPECIALIZATION and not self.avx_core_ids:
            raise ValueError("core specialization needs a non-empty AVX core set")
        if self.rr_interval_ns <= 0:
            raise ValueError("rr_interval must be positive")
        if self.scalar_penalty_ns <= 0:
            raise ValueError("scalar_penalty must be positive")
        if self.kind_change_cost_ns < 0 or self.migration_cost_ns < 0:
            raise ValueError("costs must be non-negative")


# Task bookkeeping states (the "no lost tasks" invariant is tracked on these).
UNARRIVED = 0
QUEUED = 1
RUNNING = 2
FINISHED = 3


class Task:
    """A schedulable entity executing a program of compute segments."""

    __slots__ = (
        "task_id",
        "name",
        "kind",
        "deadline",
        "priority_ratio",
        "cursor",
        "arrival_ns",
        "where",
        "last_core",
        "enqueued_at",
        "cycles_done",
        "units_done",
        "migrations",
        "kind_changes",
        "wait_units",
        "finished_at",
    )

    def __init__(self, task_id: int, name: str, program, arrival_ns: int = 0,
                 priority_ratio: int = 1, kind: TaskKind = TaskKind.UNTYPED):
        if priority_ratio < 1:
            raise ValueError("priority_ratio must be >= 1")
        self.task_id = task_id
        self.name = name
        self.kind = kind
        self.deadline = 0
        self.priority_ratio = priority_ratio
        self.cursor = ProgramCursor(program)
        self.arrival_ns = arrival_ns
        self.where = UNARRIVED
        self.last_core: Optional[int] = None
        self.enqueued_at = 0
        self.cycles_done = 0
        self.units_done = 0
        self.migrations = 0
        self.kind_changes = 0
        self.wait_units = 0
        self.finished_at: Optional[int] = None

    def __repr__(self):  # pragma: no cover - debugging aid
        return f"Task({self.name}, kind={self.kind.name}, dl={self.deadline})"


_ALL_KINDS = (TaskKind.AVX, TaskKind.UNTYPED, TaskKind.SCALAR)
_SCALAR_CORE_KINDS = (TaskKind.SCALAR, TaskKind.UNTYPED)


class RunQueueSet:
    """Per-core triple of deadline-ordered queues, one per task kind."""

    __slots__ = ("core_id", "heaps")

    def __init__(self, core_id: int):
        self.core_id = core_id
        self.heaps = ([], [], [])  # indexed by TaskKind

    def push(self, task: Task) -> None:
        heapq.heappush(self.heaps[task.kind], (task.deadline, task.task_id, task))

    def peek(self, kind: TaskKind):
        heap = self.heaps[kind]
        return heap[0] if heap else None

    def pop(self, kind: TaskKind) -> Task:
        return heapq.heappop(self.heaps[kind])[2]

    def __len__(self):
        return sum(len(h) for h in self.heaps)


class Scheduler:
    """Queue state plus the pure selection rules; the engine drives timing."""

    def __init__(self, params: SchedParams, units_per_ns: int):
        self.params = params
        self.units_per_ns = units_per_ns
        self.rr_units = params.rr_interval_ns * units_per_ns
        self.penalty_units = params.scalar_penalty_ns * units_per_ns
        self.queues = [RunQueueSet(c) for c in range(params.n_cores)]
        self.avx_cores = frozenset(params.avx_core_ids)
        self.is_cs = params.policy is Policy.CORE_SPECIALIZATION
        self.n_queued = 0

    def is_avx_core(self, core_id: int) -> bool:
        return self.is_cs and core_id in self.avx_cores

    def eligible_kinds(self, core_id: int) -> Tuple[TaskKind, ...]:
        """Queue kinds a core may pick from, in scan order."""
        if not self.is_cs:
            return _ALL_KINDS
        if core_id in self.avx_cores:
            return _ALL_KINDS
        return _SCALAR_CORE_KINDS

    def compute_deadline(self, task: Task, virtual_now: int) -> int:
        return virtual_now + self.rr_units * task.priority_ratio

    def enqueue(self, task: Task, core_id: int, now: int) -> None:
        task.where = QUEUED
        task.enqueued_at = now
        self.queues[core_id].push(task)
        self.n_queued += 1

    def _effective(self, deadline: int, kind: TaskKind, evaluating_core: int) -> int:
        # The penalty is applied at comparison time on AVX cores only, and
        # only to scalar-kind tasks; untyped tasks are never deprioritised.
        if kind == TaskKind.SCALAR and self.is_avx_core(evaluating_core):
            return deadline + self.penalty_units
        return deadline

    def pick_next(self, core_id: int, incumbent: Optional[Task] = None):
        """Select the runnable task with the least effective deadline.

        Scans the eligible queues of every core (local queues win ties, then
        lower source core id, then lower task id).  When `incumbent` is
        given, the task currently running on `core_id` competes as a
        zero-cost candidate and wins ties.  Returns (task, source_core) or
        None; the task is removed from its queue unless it is the incumbent.
        """
        avx_eval = self.is_cs and core_id in self.avx_cores
        penalty = self.penalty_units
        best_key = None
        best_src = -1
        best_kind = None
        if incumbent is not None:
            eff = incumbent.deadline
            if avx_eval and incumbent.kind == TaskKind.SCALAR:
                eff += penalty
            best_key = (eff, 0, 0, core_id, incumbent.task_id)
        n = self.params.n_cores
        for kind in self.eligible_kinds(core_id):
            pen = penalty if (avx_eval and kind == TaskKind.SCALAR) else 0
            for src in range(n):
                heap = self.queues[src].heaps[kind]
                if not heap:
                    continue
                head = heap[0]
                eff = head[0] + pen
                if best_key is not None and eff > best_key[0]:
                    continue
                key = (eff, 1, 0 if src == core_id else 1, src, head[1])
                if best_key is None or key < best_key:
                    best_key = key
                    best_src = src
                    best_kind = kind
        if best_key is None:
            return None
        if best_kind is None:  # incumbent keeps the core
            return incumbent, core_id
        task = self.queues[best_src].pop(best_kind)
        self.n_queued -= 1
        return task, best_src

    def has_eligible_nonscalar(self, core_id: int) -> bool:
        """True when any AVX or untyped task is queued anywhere this core can see."""
        for kind in (TaskKind.AVX, TaskKind.UNTYPED):
            if kind not in self.eligible_kinds(core_id):
                continue
            for src in range(self.params.n_cores):
                if self.queues[src].heaps[kind]:
                    return True
        return False
