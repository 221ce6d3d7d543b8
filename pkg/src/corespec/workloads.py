"""Workload programs and generators.

A program is an ordered list of entries:

  ("c", demand, cycles, label)   compute segment; demand None for scalar-dense
                                 work, or FrequencyLevel.L1/L2 for vector-heavy
                                 segments that trigger a license request
  ("k", TaskKind)                declared task-kind change (with/without marker)
  ("u",)                         end of one work unit (e.g. one HTTPS request)
  ("r", n, [entries...])         repeat a block n times (may nest)

Two generators mirror the evaluation scenarios: a closed-loop encrypted
web-serving workload (per-connection request loops whose crypto section is
bracketed by kind-change markers) and a CPU-bound loop microbenchmark where
a fixed fraction of each loop is marked as vector work without actually
being vector-heavy, so scheduling overhead can be measured in isolation.
A line-oriented trace format covers custom workloads.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import List, Optional, Tuple

from .freqmodel import FrequencyLevel

# Spelled out here rather than imported to avoid a cycle with scheduler.py;
# values must match scheduler.TaskKind.
_KIND_SCALAR = 0
_KIND_AVX = 1

#: Iteration count standing in for "loop until the horizon".
LOOP_FOREVER = 1_000_000_000


class TraceFormatError(ValueError):
    """Malformed workload trace file."""


def compute(demand: Optional[FrequencyLevel], cycles: int, label: str = "") -> tuple:
    if cycles <= 0:
        raise ValueError("cycles must be > 0")
    return ("c", demand, int(cycles), label or _default_label(demand))


def setkind(kind: int) -> tuple:
    return ("k", kind)


def endunit() -> tuple:
    return ("u",)


def repeat(n: int, body: list) -> tuple:
    if n < 1:
        raise ValueError("repeat count must be >= 1")
    if not body:
        raise ValueError("repeat body must not be empty")
    return ("r", int(n), list(body))


def _default_label(demand: Optional[FrequencyLevel]) -> str:
    return "scalar" if demand is None else f"avx-{demand.name.lower()}"


class ProgramCursor:
    """Walks a program lazily, descending into repeat blocks.

    Tracks the residual cycle count of a partially executed compute entry so
    preempted segments resume with no cycle lost.
    """

    __slots__ = ("stack", "residual")

    def __init__(self, program: List[tuple]):
        self.stack = [[program, 0, 1]]  # frames: [entries, index, reps_left]
        self.residual = 0
        self._descend()

    def _descend(self) -> None:
        while self.stack:
            entries, idx, _reps = self.stack[-1]
            if not entries:
                self.stack.pop()
                if self.stack:
                    self.stack[-1][1] += 1
                continue
            if idx >= len(entries):
                frame = self.stack[-1]
                frame[2] -= 1
                if frame[2] > 0:
                    frame[1] = 0
                else:
                    self.stack.pop()
                    if self.stack:
                        self.stack[-1][1] += 1
                continue
            entry = entries[idx]
            if entry[0] == "r":
                self.stack.append([entry[2], 0, entry[1]])
                continue
            return

    def current(self) -> Optional[tuple]:
        if not self.stack:
            return None
        entries, idx, _ = self.stack[-1]
        return entries[idx]

    def advance(self) -> None:
        self.residual = 0
        if not self.stack:
            return
        self.stack[-1][1] += 1
        self._descend()

    def remaining_cycles(self) -> int:
        entry = self.current()
        if entry is None or entry[0] != "c":
            return 0
        return self.residual if self.residual else entry[2]


def validate_program(program: List[tuple]) -> List[str]:
    """Static checks; returns warnings for vector-heavy work outside markers.

    A vector-heavy compute entry is expected between setkind(avx) and
    setkind(scalar); anything else models a missed annotation and is legal
    but worth flagging.
    """
    warnings: List[str] = []

    def walk(entries, declared):
        for entry in entries:
            tag = entry[0]
            if tag == "c":
                if entry[2] <= 0:
                    raise ValueError("compute cycles must be > 0")
                if entry[1] is not None and declared != _KIND_AVX:
                    warnings.append(
                        f"vector-heavy segment {entry[3]!r} outside avx markers"
                    )
            elif tag == "k":
                declared = entry[1]
            elif tag == "r":
                declared = walk(entry[2], declared)
        return declared

    walk(program, None)
    return warnings


def program_cycles_per_unit(program: List[tuple]) -> int:
    """Total compute cycles between consecutive unit boundaries (first unit)."""
    total = 0

    def walk(entries):
        nonlocal total
        for entry in entries:
            if entry[0] == "c":
                total += entry[2]
            elif entry[0] == "u":
                return True
            elif entry[0] == "r":
                if walk(entry[2]):
                    return True
        return False

    walk(program)
    return total


# ---------------------------------------------------------------------------
# Web-serving workload
# ---------------------------------------------------------------------------

VARIANT_DEMAND = {
    "sse4": None,
    "avx2": FrequencyLevel.L1,
    "avx512": FrequencyLevel.L2,
}


@dataclass(frozen=True)
class WebWorkloadParams:
    """Closed-loop encrypted web serving: one task per connection.

    Each request encrypts (``crypto_cycles``, marked as vector work for the
    avx variants) then compresses/serves (``scalar_cycles``).  The cycle
    budgets are calibration parameters, per SIMD variant.
    """

    simd_variant: str = "avx512"
    crypto_cycles: int = 1_740_000
    scalar_cycles: int = 13_910_000
    n_server_cores: int = 12
    avx_core_count: int = 2
    n_connections: int = 240

    def __post_init__(self):
        if self.simd_variant not in VARIANT_DEMAND:
            raise ValueError(f"unknown simd_variant {self.simd_variant!r}")
        if self.n_connections < 1:
            raise ValueError("n_connections must be >= 1")
        if self.crypto_cycles < 1 or self.scalar_cycles < 1:
            raise ValueError("cycle budgets must be >= 1")
        if not (0 < self.avx_core_count <= self.n_server_cores):
            raise ValueError("avx_core_count must be in 1..n_server_cores")

    def avx_core_ids(self) -> Tuple[int, ...]:
        # The vector set sits on the last physical cores.
        return tuple(range(self.n_server_cores - self.avx_core_count, self.n_server_cores))


def gen_web(params: WebWorkloadParams, seed: int):
    """Tasks for the web scenario; deterministic for a given seed.

    Each connection runs request after request: mark-as-vector, crypto,
    mark-as-scalar, serve, unit boundary.  A random-length scalar ramp-in
    prefix (absorbed by the measurement warmup) staggers the connections so
    that their license/revert windows do not phase-lock.
    """
    from .scheduler import Task  # local import to avoid a module cycle

    rng = random.Random(seed)
    demand = VARIANT_DEMAND[params.simd_variant]
    request_cycles = params.crypto_cycles + params.scalar_cycles
    tasks = []
    for i in range(params.n_connections):
        ramp = 1 + rng.randrange(request_cycles)
        body = [
            setkind(_KIND_AVX),
            compute(demand, params.crypto_cycles, "ssl"),
            setkind(_KIND_SCALAR),
            compute(None, params.scalar_cycles, "http+brotli"),
            endunit(),
        ]
        program = [compute(None, ramp, "ramp"), repeat(LOOP_FOREVER, body)]
        tasks.append(Task(i, f"conn-{i:03d}", program))
    return tasks


# ---------------------------------------------------------------------------
# Kind-change microbenchmark
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MicrobenchParams:
    """CPU-bound loop with a marked (but scalar) pseudo-vector fraction.

    The marked section is plain scalar work flagged as vector code, so runs
    measure pure scheduling overhead with no frequency effects.
    """

    n_threads: int = 26
    n_cores: int = 12
    avx_fraction: float = 0.05
    loop_cycles: int = 280_000

    def __post_init__(self):
        if self.n_threads < 1 or self.n_cores < 1:
            raise ValueError("n_threads and n_cores must be >= 1")
        if not (0 <= self.avx_fraction <= 1):
            raise ValueError("avx_fraction must be in [0, 1]")
        if self.loop_cycles < 1:
            raise ValueError("loop_cycles must be >= 1")


def gen_microbench(params: MicrobenchParams, seed: int, kind_changes: bool = True):
    """Tasks for the overhead microbenchmark.

    With ``kind_changes=False`` the same cycles are emitted without the
    kind-change markers; this is the reference against which overhead is
    measured.
    """
    from .scheduler import Task

    rng = random.Random(seed)
    marked = round(params.loop_cycles * params.avx_fraction)
    if params.avx_fraction > 0:
        marked = max(1, min(marked, params.loop_cycles - 1))
    rest = params.loop_cycles - marked
    tasks = []
    for i in range(params.n_threads):
        if marked and kind_changes:
            body = [
                setkind(_KIND_AVX),
                compute(None, marked, "fake-avx"),
                setkind(_KIND_SCALAR),
                compute(None, rest, "loop"),
                endunit(),
            ]
        elif marked:
            body = [
                compute(None, marked, "fake-avx"),
                compute(None, rest, "loop"),
                endunit(),
            ]
        else:
            body = [compute(None, params.loop_cycles, "loop"), endunit()]
        ramp = 1 + rng.randrange(params.loop_cycles)
        program = [compute(None, ramp, "ramp"), repeat(LOOP_FOREVER, body)]
        tasks.append(Task(i, f"thread-{i:02d}", program))
    return tasks


# ---------------------------------------------------------------------------
# Trace format
# ---------------------------------------------------------------------------

_COMPUTE_KINDS = {
    "scalar": None,
    "avx1": FrequencyLevel.L1,
    "avx2demand": FrequencyLevel.L2,
}
_COMPUTE_NAMES = {v: k for k, v in _COMPUTE_KINDS.items()}
_SETKIND_NAMES = {"scalar": _KIND_SCALAR, "avx": _KIND_AVX}


def load_trace(path: str, strict: bool = False):
    """Parse a workload trace file into tasks.

    Directives: ``task <id>``, ``compute <scalar|avx1|avx2demand> <cycles>
    [label]``, ``setkind <scalar|avx>``, ``endunit``, ``repeat <n> .. end``.
    ``#`` starts a comment.  Syntax errors raise with the line number;
    annotation-invariant violations warn, or raise when strict.
    """
    from .scheduler import Task

    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.readlines()

    tasks = []
    name: Optional[str] = None
    block_stack: List[list] = []
    current: List[tuple] = []

    def fail(lineno, msg):
        raise TraceFormatError(f"{path}:{lineno}: {msg}")

    def close_task(lineno):
        nonlocal current, name
        if name is None:
            return
        if block_stack:
            fail(lineno, "unterminated repeat block")
        if not current:
            fail(lineno, f"task {name!r} has no entries")
        tasks.append((name, current))
        current = []

    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        op = tokens[0]
        if op == "task":
            if len(tokens) != 2:
                fail(lineno, "task directive takes exactly one id")
            close_task(lineno)
            name = tokens[1]
        elif name is None:
            fail(lineno, f"directive {op!r} before any task")
        elif op == "compute":
            if len(tokens) < 3:
                fail(lineno, "compute needs a kind and a cycle count")
            if tokens[1] not in _COMPUTE_KINDS:
                fail(lineno, f"unknown compute kind {tokens[1]!r}")
            try:
                cycles = int(tokens[2])
            except ValueError:
                fail(lineno, f"bad cycle count {tokens[2]!r}")
            if cycles <= 0:
                fail(lineno, "cycle count must be > 0")
            label = " ".join(tokens[3:])
            current.append(compute(_COMPUTE_KINDS[tokens[1]], cycles, label))
        elif op == "setkind":
            if len(tokens) != 2 or tokens[1] not in _SETKIND_NAMES:
                fail(lineno, "setkind takes scalar or avx")
            current.append(setkind(_SETKIND_NAMES[tokens[1]]))
        elif op == "endunit":
            current.append(endunit())
        elif op == "repeat":
            if len(tokens) != 2:
                fail(lineno, "repeat takes a count")
            try:
                n = int(tokens[1])
            except ValueError:
                fail(lineno, f"bad repeat count {tokens[1]!r}")
            if n < 1:
                fail(lineno, "repeat count must be >= 1")
            body: List[tuple] = []
            current.append(("r", n, body))
            block_stack.append(current)
            current = body
        elif op == "end":
            if not block_stack:
                fail(lineno, "end without repeat")
            if not current:
                fail(lineno, "empty repeat block")
            current = block_stack.pop()
        else:
            fail(lineno, f"unknown directive {op!r}")
    close_task(len(lines) + 1)

    if not tasks:
        raise TraceFormatError(f"{path}: no tasks defined")

    result = []
    for idx, (tname, program) in enumerate(tasks):
        warnings = validate_program(program)
        for w in warnings:
            if strict:
                raise TraceFormatError(f"{path}: task {tname!r}: {w}")
            import warnings as _warnings

            _warnings.warn(f"{path}: task {tname!r}: {w}")
        result.append(Task(idx, tname, program))
    return result


def save_trace(tasks, path: str) -> None:
    """Serialise tasks back to the trace format (round-trips load_trace)."""
    with open(path, "w", encoding="utf-8") as fh:
        for task in tasks:
            fh.write(f"task {task.name}\n")
            _write_entries(fh, task.cursor.stack[0][0], indent=1)


def _write_entries(fh, entries, indent: int) -> None:
    pad = "  " * indent
    for entry in entries:
        tag = entry[0]
        if tag == "c":
            kind = _COMPUTE_NAMES[entry[1]]
            label = f" {entry[3]}" if entry[3] else ""
            fh.write(f"{pad}compute {kind} {entry[2]}{label}\n")
        elif tag == "k":
            fh.write(f"{pad}setkind {'avx' if entry[1] == _KIND_AVX else 'scalar'}\n")
        elif tag == "u":
            fh.write(f"{pad}endunit\n")
        elif tag == "r":
            fh.write(f"{pad}repeat {entry[1]}\n")
            _write_entries(fh, entry[2], indent + 1)
            fh.write(f"{pad}end\n")


def programs_equal(a: List[tuple], b: List[tuple]) -> bool:
    """Structural equality, treating a missing label as the default label."""
    return _norm(a) == _norm(b)


def _norm(entries):
    out = []
    for entry in entries:
        if entry[0] == "r":
            out.append(("r", entry[1], _norm(entry[2])))
        else:
            out.append(entry)
    return out
