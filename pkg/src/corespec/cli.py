"""Command-line front end.

Subcommands:

  simulate  run one configured simulation and write its report
  compare   run the 3-variant x 2-policy web matrix and report deltas
  sweep     run the kind-change overhead sweep of the loop microbenchmark
  analyze   rank functions in disassembly listings by wide-vector ratio
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from typing import List, Optional

from . import analyzer
from .config import ConfigError, SimConfig, config_from_dict, config_to_dict, load_config
from .engine import SimReport, simulate
from .scheduler import Policy, SchedParams
from .workloads import (
    MicrobenchParams,
    TraceFormatError,
    WebWorkloadParams,
    gen_microbench,
)

WEB_VARIANTS = ("sse4", "avx2", "avx512")
POLICIES = (Policy.BASELINE, Policy.CORE_SPECIALIZATION)

#: sweep points aim for this many completed loops so that boundary effects
#: stay far below the overheads being measured.
SWEEP_TARGET_UNITS = 80_000
SWEEP_MIN_WINDOW_NS = 250_000_000
SWEEP_MAX_WINDOW_NS = 4_000_000_000


def _write_text(path: Optional[str], text: str) -> None:
    if not path:
        return
    d = os.path.dirname(path)
    if d:
        os.makedirs(d, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def _run_config(cfg: SimConfig, trace: bool = False) -> SimReport:
    tasks = cfg.build_tasks()
    return simulate(
        cfg.cpu,
        cfg.sched,
        tasks,
        horizon_ns=cfg.run.horizon_ns,
        warmup_ns=cfg.run.warmup_ns,
        seed=cfg.run.seed,
        trace=trace,
        workload_desc=cfg.describe_workload(),
        config_echo=config_to_dict(cfg),
    )


def _run_config_with_trace(cfg: SimConfig):
    tasks = cfg.build_tasks()
    from .engine import Engine

    eng = Engine(
        cfg.cpu,
        cfg.sched,
        tasks,
        horizon_ns=cfg.run.horizon_ns,
        warmup_ns=cfg.run.warmup_ns,
        seed=cfg.run.seed,
        trace=True,
        workload_desc=cfg.describe_workload(),
        config_echo=config_to_dict(cfg),
    )
    report = eng.run()
    return report, eng.trace_lines


def _apply_overrides(cfg: SimConfig, args) -> SimConfig:
    run = cfg.run
    output = cfg.output
    if getattr(args, "seed", None) is not None:
        run = dataclasses.replace(run, seed=args.seed)
    if getattr(args, "trace", None):
        output = dataclasses.replace(output, trace=args.trace)
    if getattr(args, "folded", None):
        output = dataclasses.replace(output, folded=args.folded)
    return dataclasses.replace(cfg, run=run, output=output)


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------


def cmd_simulate(args) -> int:
    try:
        cfg = _apply_overrides(load_config(args.config), args)
    except (ConfigError, TraceFormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    want_trace = bool(cfg.output.trace)
    if want_trace:
        report, trace_lines = _run_config_with_trace(cfg)
        _write_text(cfg.output.trace, "\n".join(trace_lines) + "\n")
    else:
        report = _run_config(cfg)
    print(report.human_summary())
    _write_text(cfg.output.report, report.to_json())
    if cfg.output.folded:
        _write_text(cfg.output.folded, analyzer.emit_folded(report.attribution))
    return 0


# ---------------------------------------------------------------------------
# compare
# ---------------------------------------------------------------------------


def _web_cell_config(cfg: SimConfig, variant: str, policy: Policy) -> SimConfig:
    web = cfg.workload.web
    budgets = cfg.workload.variants.get(variant)
    if budgets is None:
        if variant == web.simd_variant:
            budgets = {
                "crypto_cycles": web.crypto_cycles,
                "scalar_cycles": web.scalar_cycles,
            }
        else:
            raise ConfigError(
                f"workload.web.variants: no cycle budgets for variant {variant!r}"
            )
    new_web = WebWorkloadParams(
        simd_variant=variant,
        crypto_cycles=budgets["crypto_cycles"],
        scalar_cycles=budgets["scalar_cycles"],
        n_server_cores=web.n_server_cores,
        avx_core_count=web.avx_core_count,
        n_connections=web.n_connections,
    )
    sched = dataclasses.replace(
        cfg.sched, policy=policy, avx_core_ids=new_web.avx_core_ids()
    )
    workload = dataclasses.replace(cfg.workload, web=new_web)
    return dataclasses.replace(cfg, sched=sched, workload=workload)


def _compare_cell(doc_and_cell):
    doc, base_dir, variant, policy_value = doc_and_cell
    cfg = config_from_dict(doc, base_dir)
    cell = _web_cell_config(cfg, variant, Policy(policy_value))
    report = _run_config(cell)
    return variant, policy_value, report.units_per_sec, report.mean_freq_ghz


def run_compare(cfg: SimConfig, jobs: int = 1):
    """Run the full variant x policy matrix; returns the result table."""
    if cfg.workload.type != "web":
        raise ConfigError("compare needs a web workload config")
    doc = config_to_dict(cfg)
    cells = [
        (doc, ".", variant, policy.value) for variant in WEB_VARIANTS for policy in POLICIES
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_compare_cell, cells))
    else:
        results = [_compare_cell(c) for c in cells]
    table = {(v, p): (ups, freq) for v, p, ups, freq in results}
    base_ups = table[("sse4", Policy.BASELINE.value)][0]
    rows = []
    for variant in WEB_VARIANTS:
        row = {"variant": variant}
        for policy in POLICIES:
            ups, freq = table[(variant, policy.value)]
            rel = ups / base_ups
            row[policy.value] = {
                "units_per_sec": ups,
                "relative": rel,
                "delta_pct": (rel - 1.0) * 100.0,
                "mean_freq_ghz": freq,
            }
        b = row[Policy.BASELINE.value]["delta_pct"]
        c = row[Policy.CORE_SPECIALIZATION.value]["delta_pct"]
        row["variability_reduction_pct"] = (1.0 - c / b) * 100.0 if b != 0 else None
        rows.append(row)
    return rows


def format_compare_table(rows) -> str:
    lines = [
        f"{'variant':<8} {'policy':<20} {'units/s':>12} {'rel':>8} "
        f"{'delta':>8} {'freq GHz':>9}",
    ]
    lines.append("-" * len(lines[0]))
    for row in rows:
        for policy in POLICIES:
            cell = row[policy.value]
            lines.append(
                f"{row['variant']:<8} {policy.value:<20} {cell['units_per_sec']:>12.1f} "
                f"{cell['relative']:>8.4f} {cell['delta_pct']:>7.2f}% "
                f"{cell['mean_freq_ghz']:>9.4f}"
            )
        vr = row["variability_reduction_pct"]
        if vr is not None:
            lines.append(f"{'':<8} variability reduction: {vr:.1f}%")
    return "\n".join(lines)


def cmd_compare(args) -> int:
    try:
        cfg = _apply_overrides(load_config(args.config), args)
        rows = run_compare(cfg, jobs=args.jobs)
    except (ConfigError, TraceFormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(format_compare_table(rows))
    _write_text(cfg.output.report, json.dumps(rows, sort_keys=True, indent=2) + "\n")
    return 0


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------


def _sweep_horizon_ns(loop_cycles: int, mb: MicrobenchParams, cfg: SimConfig) -> int:
    # Deterministic per-point horizon: enough simulated time for the unit
    # target, clamped so extreme points stay tractable.
    from .freqmodel import FrequencyLevel

    f0 = cfg.cpu.freq_ghz[FrequencyLevel.L0]
    loop_ns = float(loop_cycles / f0) + 2 * cfg.sched.kind_change_cost_ns
    window = int(SWEEP_TARGET_UNITS * loop_ns / mb.n_cores)
    window = max(SWEEP_MIN_WINDOW_NS, min(SWEEP_MAX_WINDOW_NS, window))
    return cfg.run.warmup_ns + window


def _sweep_point(payload):
    doc, loop_cycles = payload
    cfg = config_from_dict(doc)
    mb = dataclasses.replace(cfg.workload.microbench, loop_cycles=loop_cycles)
    horizon = _sweep_horizon_ns(loop_cycles, mb, cfg)
    seed = cfg.run.seed
    marked = gen_microbench(mb, seed, kind_changes=True)
    plain = gen_microbench(mb, seed, kind_changes=False)
    common = dict(horizon_ns=horizon, warmup_ns=cfg.run.warmup_ns, seed=seed)
    rep_marked = simulate(
        cfg.cpu, cfg.sched, marked, workload_desc=f"microbench/loop={loop_cycles}", **common
    )
    rep_plain = simulate(
        cfg.cpu,
        cfg.sched,
        plain,
        workload_desc=f"microbench/loop={loop_cycles}/no-changes",
        **common,
    )
    overhead_pct = (rep_plain.units_per_sec / rep_marked.units_per_sec - 1.0) * 100.0
    return {
        "loop_cycles": loop_cycles,
        "kind_changes_per_sec": rep_marked.kind_changes_per_sec_per_core,
        "overhead_pct": overhead_pct,
        "units_per_sec": rep_marked.units_per_sec,
        "reference_units_per_sec": rep_plain.units_per_sec,
        "horizon_ns": horizon,
    }


def run_sweep(cfg: SimConfig, jobs: int = 1):
    if cfg.workload.type != "microbench":
        raise ConfigError("sweep needs a microbench workload config")
    points = cfg.workload.loop_cycles_sweep
    if not points:
        raise ConfigError(
            "workload.microbench.loop_cycles_sweep: sweep needs a list of loop lengths"
        )
    doc = config_to_dict(cfg)
    payloads = [(doc, int(n)) for n in points]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_sweep_point, payloads))
    else:
        results = [_sweep_point(p) for p in payloads]
    results.sort(key=lambda r: r["kind_changes_per_sec"])
    return results


def format_sweep_table(results) -> str:
    lines = ["# kind_changes_per_sec overhead_pct"]
    for r in results:
        lines.append(f"{r['kind_changes_per_sec']:.1f} {r['overhead_pct']:.4f}")
    return "\n".join(lines)


def cmd_sweep(args) -> int:
    try:
        cfg = _apply_overrides(load_config(args.config), args)
        results = run_sweep(cfg, jobs=args.jobs)
    except (ConfigError, TraceFormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(format_sweep_table(results))
    _write_text(
        cfg.output.report, json.dumps(results, sort_keys=True, indent=2) + "\n"
    )
    return 0


# ---------------------------------------------------------------------------
# analyze
# ---------------------------------------------------------------------------


def cmd_analyze(args) -> int:
    functions = []
    failures = 0
    for path in args.listings:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                text = fh.read()
            funcs, skipped = analyzer.parse_disassembly(text, source=os.path.basename(path))
            functions.extend(funcs)
            if skipped:
                print(f"note: {path}: skipped {skipped} non-instruction lines", file=sys.stderr)
        except (OSError, analyzer.DisassemblyFormatError) as exc:
            failures += 1
            print(f"error: {path}: {exc}", file=sys.stderr)
    if not functions:
        print("error: no listings could be analyzed", file=sys.stderr)
        return 2
    rows = analyzer.ratio_report(functions)
    print(analyzer.format_ratio_table(rows, min_ratio=args.min_ratio))
    if args.records:
        records = [dataclasses.asdict(r) for r in rows if r.ratio >= args.min_ratio]
        _write_text(args.records, json.dumps(records, sort_keys=True, indent=2) + "\n")
    # Per-file failures are reported but do not fail the run as long as at
    # least one listing was analyzable.
    return 0


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="corespec",
        description=__doc__,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--seed", type=int, default=None, help="override run.seed")
        p.add_argument("--trace", default=None, help="write an event trace to this path")
        p.add_argument("--folded", default=None, help="write folded throttle stacks here")
        p.add_argument("--jobs", type=int, default=1, help="parallel simulation processes")

    p_sim = sub.add_parser("simulate", help="run one simulation")
    p_sim.add_argument("config")
    add_common(p_sim)
    p_sim.set_defaults(func=cmd_simulate)

    p_cmp = sub.add_parser("compare", help="variant x policy throughput matrix")
    p_cmp.add_argument("config")
    add_common(p_cmp)
    p_cmp.set_defaults(func=cmd_compare)

    p_swp = sub.add_parser("sweep", help="kind-change overhead sweep")
    p_swp.add_argument("config")
    add_common(p_swp)
    p_swp.set_defaults(func=cmd_sweep)

    p_ana = sub.add_parser("analyze", help="rank disassembly by wide-vector ratio")
    p_ana.add_argument("listings", nargs="+")
    p_ana.add_argument("--min-ratio", type=float, default=0.0)
    p_ana.add_argument("--records", default=None, help="write machine-readable rows here")
    p_ana.set_defaults(func=cmd_analyze)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
