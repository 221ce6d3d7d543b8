"""Queue, deadline and selection-rule tests."""

import pytest

from corespec.scheduler import Policy, SchedParams, Scheduler, Task, TaskKind
from corespec.workloads import compute, endunit


def prog():
    return [compute(None, 1000, "x"), endunit()]


def make_sched(policy=Policy.CORE_SPECIALIZATION, n_cores=4, avx=(3,), **kw):
    params = SchedParams(policy=policy, n_cores=n_cores, avx_core_ids=avx, **kw)
    return Scheduler(params, units_per_ns=1596)


def test_params_validation():
    with pytest.raises(ValueError):
        SchedParams(n_cores=4, avx_core_ids=(7,))
    with pytest.raises(ValueError):
        SchedParams(policy=Policy.CORE_SPECIALIZATION, n_cores=4, avx_core_ids=())
    # baseline needs no avx cores
    SchedParams(policy=Policy.BASELINE, n_cores=4, avx_core_ids=())


def test_compute_deadline_is_rr_scaled_by_ratio():
    s = make_sched()
    t = Task(0, "a", prog())
    assert s.compute_deadline(t, 0) == 6_000_000 * 1596
    t2 = Task(1, "b", prog(), priority_ratio=2)
    assert s.compute_deadline(t2, 0) == 2 * 6_000_000 * 1596
    assert s.compute_deadline(t, 500) == 500 + 6_000_000 * 1596


def test_eligible_kinds_by_policy():
    s = make_sched()
    assert s.eligible_kinds(0) == (TaskKind.SCALAR, TaskKind.UNTYPED)
    assert set(s.eligible_kinds(3)) == {TaskKind.SCALAR, TaskKind.AVX, TaskKind.UNTYPED}
    b = make_sched(policy=Policy.BASELINE)
    assert set(b.eligible_kinds(0)) == {TaskKind.SCALAR, TaskKind.AVX, TaskKind.UNTYPED}


def test_scalar_core_never_sees_avx_queue():
    s = make_sched()
    avx_task = Task(0, "v", prog(), kind=TaskKind.AVX)
    avx_task.deadline = 1
    s.enqueue(avx_task, 0, now=0)  # queued on a scalar core's queue set
    assert s.pick_next(0) is None
    assert s.pick_next(1) is None
    # the AVX core steals it from core 0's queue
    task, src = s.pick_next(3)
    assert task is avx_task and src == 0


def test_deadline_order_with_task_id_tiebreak():
    s = make_sched(policy=Policy.BASELINE, avx=())
    a, b = Task(7, "a", prog()), Task(3, "b", prog())
    a.deadline = b.deadline = 42
    s.enqueue(a, 0, now=0)
    s.enqueue(b, 0, now=0)
    first, _ = s.pick_next(0)
    assert first is b  # same deadline, lower task id wins
    second, _ = s.pick_next(0)
    assert second is a


def test_local_queue_wins_ties_then_lower_core():
    s = make_sched(policy=Policy.BASELINE, avx=())
    far = Task(0, "far", prog())
    near = Task(1, "near", prog())
    far.deadline = near.deadline = 10
    s.enqueue(far, 0, now=0)
    s.enqueue(near, 2, now=0)
    # despite far's lower task id, the local candidate wins the tie
    task, src = s.pick_next(2)
    assert task is near and src == 2


def test_scalar_penalty_on_avx_core_only():
    s = make_sched(avx=(3,))
    scalar = Task(0, "s", prog(), kind=TaskKind.SCALAR)
    scalar.deadline = 1
    vect = Task(1, "v", prog(), kind=TaskKind.AVX)
    vect.deadline = 10**15
    s.enqueue(scalar, 3, now=0)
    s.enqueue(vect, 3, now=0)
    task, _ = s.pick_next(3)
    assert task is vect  # penalty pushes the earlier scalar deadline behind
    # scalar core ignores the penalty
    s2 = make_sched(avx=(3,))
    scalar2 = Task(0, "s", prog(), kind=TaskKind.SCALAR)
    scalar2.deadline = 1
    s2.enqueue(scalar2, 3, now=0)
    task2, src2 = s2.pick_next(0)
    assert task2 is scalar2 and src2 == 3


def test_untyped_never_penalized_on_avx_core():
    s = make_sched(avx=(3,))
    untyped = Task(0, "u", prog(), kind=TaskKind.UNTYPED)
    untyped.deadline = 5
    vect = Task(1, "v", prog(), kind=TaskKind.AVX)
    vect.deadline = 9
    s.enqueue(untyped, 3, now=0)
    s.enqueue(vect, 3, now=0)
    task, _ = s.pick_next(3)
    assert task is untyped  # plain deadline order between untyped and avx


def test_avx_core_runs_scalar_when_alone():
    s = make_sched(avx=(3,))
    scalar = Task(0, "s", prog(), kind=TaskKind.SCALAR)
    scalar.deadline = 1
    s.enqueue(scalar, 1, now=0)
    task, src = s.pick_next(3)
    assert task is scalar and src == 1


def test_incumbent_wins_ties_and_competes_with_penalty():
    s = make_sched(avx=(3,))
    incumbent = Task(0, "inc", prog(), kind=TaskKind.SCALAR)
    incumbent.deadline = 100
    rival = Task(1, "r", prog(), kind=TaskKind.SCALAR)
    rival.deadline = 100
    s.enqueue(rival, 3, now=0)
    task, src = s.pick_next(3, incumbent=incumbent)
    assert task is incumbent  # equal effective deadlines: no switch
    vect = Task(2, "v", prog(), kind=TaskKind.AVX)
    vect.deadline = 10**13
    s.enqueue(vect, 0, now=0)
    task, src = s.pick_next(3, incumbent=incumbent)
    assert task is vect and src == 0  # scalar incumbent penalized on avx core
