"""Simulator of wide-vector turbo-license frequency effects and
core-specialization scheduling, with disassembly instruction-mix tooling."""

from .freqmodel import (
    COUNTER_NAMES,
    CpuParams,
    FrequencyLevel,
    FrequencyLicense,
    InvalidDemandError,
    TimeBase,
)
from .scheduler import Policy, SchedParams, Scheduler, Task, TaskKind
from .engine import Engine, SimReport, simulate
from .workloads import (
    MicrobenchParams,
    TraceFormatError,
    WebWorkloadParams,
    compute,
    endunit,
    gen_microbench,
    gen_web,
    load_trace,
    program_cycles_per_unit,
    programs_equal,
    repeat,
    save_trace,
    setkind,
    validate_program,
)
from .analyzer import (
    DisasmFunction,
    DisassemblyFormatError,
    RatioRow,
    classify_instruction,
    emit_folded,
    parse_disassembly,
    ratio_report,
)
from .config import (
    ConfigError,
    OutputParams,
    RunParams,
    SimConfig,
    WorkloadSpec,
    config_from_dict,
    config_to_dict,
    dump_config,
    load_config,
)

__version__ = "0.1.0"

__all__ = [
    "COUNTER_NAMES",
    "ConfigError",
    "CpuParams",
    "DisasmFunction",
    "DisassemblyFormatError",
    "Engine",
    "FrequencyLevel",
    "FrequencyLicense",
    "InvalidDemandError",
    "MicrobenchParams",
    "OutputParams",
    "Policy",
    "RatioRow",
    "RunParams",
    "SchedParams",
    "Scheduler",
    "SimConfig",
    "SimReport",
    "Task",
    "TaskKind",
    "TimeBase",
    "TraceFormatError",
    "WebWorkloadParams",
    "WorkloadSpec",
    "classify_instruction",
    "compute",
    "config_from_dict",
    "config_to_dict",
    "dump_config",
    "emit_folded",
    "endunit",
    "gen_microbench",
    "gen_web",
    "load_config",
    "load_trace",
    "parse_disassembly",
    "program_cycles_per_unit",
    "programs_equal",
    "ratio_report",
    "repeat",
    "save_trace",
    "setkind",
    "simulate",
    "validate_program",
]
