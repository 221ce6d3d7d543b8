"""Simulation config files.

A config is a YAML document with the exact key names of the parameter
types: a ``cpu`` block (CpuParams), a ``sched`` block (SchedParams), a
tagged ``workload`` block (web | microbench | trace), a ``run`` block
(horizon / warmup / seed) and an optional ``output`` block (report, trace
and folded-stack paths).  Cross-field checks run at load time and failures
name the offending field.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, Optional

import yaml

from .freqmodel import CpuParams, FrequencyLevel
from .scheduler import Policy, SchedParams
from .workloads import (
    MicrobenchParams,
    VARIANT_DEMAND,
    WebWorkloadParams,
    gen_microbench,
    gen_web,
    load_trace,
)


class ConfigError(ValueError):
    """Invalid configuration; message carries the field path."""


@dataclass(frozen=True)
class RunParams:
    horizon_ns: int
    warmup_ns: int = 50_000_000
    seed: int = 1

    def __post_init__(self):
        if self.horizon_ns <= 0:
            raise ConfigError("run.horizon: must be positive")
        if not (0 <= self.warmup_ns < self.horizon_ns):
            raise ConfigError("run.warmup: must be in [0, horizon)")


@dataclass(frozen=True)
class OutputParams:
    report: Optional[str] = None
    trace: Optional[str] = None
    folded: Optional[str] = None


@dataclass(frozen=True)
class WorkloadSpec:
    """Tagged workload selection: web, microbench or a trace file."""

    type: str
    web: Optional[WebWorkloadParams] = None
    microbench: Optional[MicrobenchParams] = None
    trace_path: Optional[str] = None
    variants: Dict[str, Dict[str, int]] = field(default_factory=dict)
    loop_cycles_sweep: tuple = ()


@dataclass(frozen=True)
class SimConfig:
    cpu: CpuParams
    sched: SchedParams
    workload: WorkloadSpec
    run: RunParams
    output: OutputParams = OutputParams()

    def build_tasks(self):
        w = self.workload
        if w.type == "web":
            return gen_web(w.web, self.run.seed)
        if w.type == "microbench":
            return gen_microbench(w.microbench, self.run.seed)
        return load_trace(w.trace_path)

    def describe_workload(self) -> str:
        w = self.workload
        if w.type == "web":
            return f"web/{w.web.simd_variant}"
        if w.type == "microbench":
            return f"microbench/loop={w.microbench.loop_cycles}"
        return f"trace:{w.trace_path}"


def _need(mapping: dict, key: str, path: str):
    if key not in mapping:
        raise ConfigError(f"{path}.{key}: missing")
    return mapping[key]


def _as_int(value, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{path}: expected an integer, got {value!r}")
    return value


def _parse_cpu(doc: dict) -> CpuParams:
    raw = doc.get("cpu", {}) or {}
    kwargs: Dict[str, Any] = {}
    if "freq_ghz" in raw:
        freqs = {}
        for lvl in FrequencyLevel:
            val = _need(raw["freq_ghz"], lvl.name, "cpu.freq_ghz")
            freqs[lvl] = Fraction(str(val))
        kwargs["freq_ghz"] = freqs
    for src, dst in (
        ("license_grant_delay", "license_grant_delay_ns"),
        ("revert_delay", "revert_delay_ns"),
        ("detection_delay_cycles", "detection_delay_cycles"),
    ):
        if src in raw:
            kwargs[dst] = _as_int(raw[src], f"cpu.{src}")
    if "throttle_speed_factor" in raw:
        kwargs["throttle_speed_factor"] = Fraction(str(raw["throttle_speed_factor"]))
    try:
        return CpuParams(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"cpu: {exc}") from exc


def _parse_sched(doc: dict) -> SchedParams:
    raw = doc.get("sched", {}) or {}
    kwargs: Dict[str, Any] = {}
    if "policy" in raw:
        try:
            kwargs["policy"] = Policy(raw["policy"])
        except ValueError:
            raise ConfigError(f"sched.policy: unknown policy {raw['policy']!r}")
    if "n_cores" in raw:
        kwargs["n_cores"] = _as_int(raw["n_cores"], "sched.n_cores")
    if "avx_core_ids" in raw:
        ids = raw["avx_core_ids"]
        if not isinstance(ids, list):
            raise ConfigError("sched.avx_core_ids: expected a list")
        kwargs["avx_core_ids"] = tuple(_as_int(i, "sched.avx_core_ids") for i in ids)
    for src, dst in (
        ("rr_interval", "rr_interval_ns"),
        ("scalar_penalty", "scalar_penalty_ns"),
        ("kind_change_cost", "kind_change_cost_ns"),
        ("migration_cost", "migration_cost_ns"),
    ):
        if src in raw:
            kwargs[dst] = _as_int(raw[src], f"sched.{src}")
    try:
        return SchedParams(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"sched: {exc}") from exc


def _parse_web(raw: dict, variants: Dict[str, Dict[str, int]]) -> WebWorkloadParams:
    kwargs: Dict[str, Any] = {}
    for key in (
        "simd_variant",
        "crypto_cycles",
        "scalar_cycles",
        "n_server_cores",
        "avx_core_count",
        "n_connections",
    ):
        if key in raw:
            kwargs[key] = raw[key]
    variant = kwargs.get("simd_variant", "avx512")
    if variant in variants:
        kwargs.setdefault("crypto_cycles", variants[variant]["crypto_cycles"])
        kwargs.setdefault("scalar_cycles", variants[variant]["scalar_cycles"])
    try:
        return WebWorkloadParams(**kwargs)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"workload.web: {exc}") from exc


def _parse_workload(doc: dict, base_dir: str) -> WorkloadSpec:
    raw = doc.get("workload")
    if not raw:
        raise ConfigError("workload: missing")
    wtype = _need(raw, "type", "workload")
    if wtype == "web":
        web_raw = raw.get("web", {}) or {}
        variants = {}
        for name, v in (web_raw.get("variants") or {}).items():
            if name not in VARIANT_DEMAND:
                raise ConfigError(f"workload.web.variants.{name}: unknown variant")
            variants[name] = {
                "crypto_cycles": _as_int(
                    _need(v, "crypto_cycles", f"workload.web.variants.{name}"),
                    f"workload.web.variants.{name}.crypto_cycles",
                ),
                "scalar_cycles": _as_int(
                    _need(v, "scalar_cycles", f"workload.web.variants.{name}"),
                    f"workload.web.variants.{name}.scalar_cycles",
                ),
            }
        web = _parse_web(web_raw, variants)
        return WorkloadSpec(type="web", web=web, variants=variants)
    if wtype == "microbench":
        mb_raw = dict(raw.get("microbench", {}) or {})
        sweep = tuple(mb_raw.pop("loop_cycles_sweep", ()) or ())
        if "loop_cycles" in mb_raw and isinstance(mb_raw["loop_cycles"], list):
            sweep = tuple(mb_raw.pop("loop_cycles"))
        for n in sweep:
            _as_int(n, "workload.microbench.loop_cycles_sweep")
        try:
            mb = MicrobenchParams(**mb_raw)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"workload.microbench: {exc}") from exc
        return WorkloadSpec(type="microbench", microbench=mb, loop_cycles_sweep=sweep)
    if wtype == "trace":
        path = _need(raw, "path", "workload")
        if not os.path.isabs(path):
            path = os.path.join(base_dir, path)
        if not os.path.exists(path):
            raise ConfigError(f"workload.path: no such file {path!r}")
        return WorkloadSpec(type="trace", trace_path=path)
    raise ConfigError(f"workload.type: unknown type {wtype!r}")


def load_config(path: str) -> SimConfig:
    with open(path, "r", encoding="utf-8") as fh:
        doc = yaml.safe_load(fh)
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: config must be a mapping")
    return config_from_dict(doc, base_dir=os.path.dirname(os.path.abspath(path)))


def config_from_dict(doc: dict, base_dir: str = ".") -> SimConfig:
    cpu = _parse_cpu(doc)
    sched = _parse_sched(doc)
    workload = _parse_workload(doc, base_dir)
    run_raw = doc.get("run") or {}
    run = RunParams(
        horizon_ns=_as_int(_need(run_raw, "horizon", "run"), "run.horizon"),
        warmup_ns=_as_int(run_raw.get("warmup", 50_000_000), "run.warmup"),
        seed=_as_int(run_raw.get("seed", 1), "run.seed"),
    )
    out_raw = doc.get("output") or {}
    output = OutputParams(
        report=out_raw.get("report"),
        trace=out_raw.get("trace"),
        folded=out_raw.get("folded"),
    )
    cfg = SimConfig(cpu=cpu, sched=sched, workload=workload, run=run, output=output)
    _cross_validate(cfg)
    return cfg


def _cross_validate(cfg: SimConfig) -> None:
    sched = cfg.sched
    if cfg.workload.type == "web":
        web = cfg.workload.web
        if web.n_server_cores != sched.n_cores:
            raise ConfigError(
                "workload.web.n_server_cores: must equal sched.n_cores "
                f"({web.n_server_cores} != {sched.n_cores})"
            )
        if sched.policy is Policy.CORE_SPECIALIZATION:
            if tuple(sched.avx_core_ids) != web.avx_core_ids():
                raise ConfigError(
                    "sched.avx_core_ids: web workload places vector work on the last "
                    f"{web.avx_core_count} cores, expected {list(web.avx_core_ids())}"
                )
    if cfg.workload.type == "microbench":
        if cfg.workload.microbench.n_cores != sched.n_cores:
            raise ConfigError(
                "workload.microbench.n_cores: must equal sched.n_cores"
            )
    # Penalty soundness: no deadline reachable within the horizon may exceed
    # the scalar penalty (priority ratios are re-checked at engine start).
    if cfg.sched.scalar_penalty_ns <= cfg.run.horizon_ns + cfg.sched.rr_interval_ns:
        raise ConfigError(
            "sched.scalar_penalty: must exceed run.horizon + sched.rr_interval"
        )


def config_to_dict(cfg: SimConfig) -> dict:
    """Serialise a config back to the file schema (round-trips load)."""
    doc: Dict[str, Any] = {
        "cpu": {
            "freq_ghz": {
                lvl.name: float(cfg.cpu.freq_ghz[lvl]) for lvl in FrequencyLevel
            },
            "license_grant_delay": cfg.cpu.license_grant_delay_ns,
            "revert_delay": cfg.cpu.revert_delay_ns,
            "detection_delay_cycles": cfg.cpu.detection_delay_cycles,
            "throttle_speed_factor": float(cfg.cpu.throttle_speed_factor),
        },
        "sched": {
            "policy": cfg.sched.policy.value,
            "n_cores": cfg.sched.n_cores,
            "avx_core_ids": list(cfg.sched.avx_core_ids),
            "rr_interval": cfg.sched.rr_interval_ns,
            "scalar_penalty": cfg.sched.scalar_penalty_ns,
            "kind_change_cost": cfg.sched.kind_change_cost_ns,
            "migration_cost": cfg.sched.migration_cost_ns,
        },
        "run": {
            "horizon": cfg.run.horizon_ns,
            "warmup": cfg.run.warmup_ns,
            "seed": cfg.run.seed,
        },
        "output": {
            "report": cfg.output.report,
            "trace": cfg.output.trace,
            "folded": cfg.output.folded,
        },
    }
    w = cfg.workload
    if w.type == "web":
        web_doc: Dict[str, Any] = {
            "simd_variant": w.web.simd_variant,
            "crypto_cycles": w.web.crypto_cycles,
            "scalar_cycles": w.web.scalar_cycles,
            "n_server_cores": w.web.n_server_cores,
            "avx_core_count": w.web.avx_core_count,
            "n_connections": w.web.n_connections,
        }
        if w.variants:
            web_doc["variants"] = {k: dict(v) for k, v in sorted(w.variants.items())}
        doc["workload"] = {"type": "web", "web": web_doc}
    elif w.type == "microbench":
        mb_doc: Dict[str, Any] = {
            "n_threads": w.microbench.n_threads,
            "n_cores": w.microbench.n_cores,
            "avx_fraction": w.microbench.avx_fraction,
            "loop_cycles": w.microbench.loop_cycles,
        }
        if w.loop_cycles_sweep:
            mb_doc["loop_cycles_sweep"] = list(w.loop_cycles_sweep)
        doc["workload"] = {"type": "microbench", "microbench": mb_doc}
    else:
        doc["workload"] = {"type": "trace", "path": w.trace_path}
    return doc


def dump_config(cfg: SimConfig) -> str:
    return yaml.safe_dump(config_to_dict(cfg), sort_keys=True)
