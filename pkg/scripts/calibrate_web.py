#!/usr/bin/env python3
"""Fit per-variant cycle budgets for the web workload.

The published results report relative throughput and mean frequency, not
cycle budgets, so the budgets are free parameters.  This script pins them:

  targets (measured on the shipped config's seed/horizon):
    baseline delta  avx2  -> -4.2 %      avx512 -> -11.2 %
    corespec delta  avx2  -> -0.7 %      avx512 -> -3.2 %

relative to the sse4/baseline cell, whose budgets are fixed anchors
(crypto 2.0 Mcycles, scalar 14.0 Mcycles per request).  The mean
frequencies are then model outputs; the script prints them for the +-0.05
GHz check.  Newton iteration with an analytic Jacobian from the piecewise
frequency model; each iteration runs the real simulator.

Writes the fitted budgets as a YAML fragment to stdout.
"""

import argparse
import sys

from corespec import (
    CpuParams,
    Policy,
    SchedParams,
    WebWorkloadParams,
    gen_web,
    simulate,
)

ANCHOR = {"sse4": (2_000_000, 14_000_000)}
F = {"sse4": 2.8, "avx2": 2.4, "avx512": 1.9}
F0 = 2.8

HORIZON = 10_000_000_000
WARMUP = 50_000_000
SEED = 1
CONNS = 240
CORES = 12
AVX = 2


def run_cell(variant, policy, crypto, scalar):
    params = WebWorkloadParams(
        simd_variant=variant,
        crypto_cycles=int(round(crypto)),
        scalar_cycles=int(round(scalar)),
        n_server_cores=CORES,
        avx_core_count=AVX,
        n_connections=CONNS,
    )
    sched = SchedParams(policy=policy, n_cores=CORES, avx_core_ids=params.avx_core_ids())
    tasks = gen_web(params, seed=SEED)
    rep = simulate(
        CpuParams(), sched, tasks, horizon_ns=HORIZON, warmup_ns=WARMUP, monitor=False
    )
    return rep.units_per_sec, rep.mean_freq_ghz


def calibrate(variant, targets, start, base_ups, iters, verbose=True):
    c, s = start
    d_base_t, d_cs_t = targets
    fv = F[variant]
    for it in range(iters):
        ups_b, freq_b = run_cell(variant, Policy.BASELINE, c, s)
        ups_c, freq_c = run_cell(variant, Policy.CORE_SPECIALIZATION, c, s)
        d_base = (ups_b / base_ups - 1.0) * 100.0
        d_cs = (ups_c / base_ups - 1.0) * 100.0
        if verbose:
            print(
                f"  [{variant} it{it}] C={c:.0f} S={s:.0f} "
                f"d_base={d_base:+.2f}% (f={freq_b:.4f}) d_cs={d_cs:+.2f}% (f={freq_c:.4f})",
                file=sys.stderr,
            )
        err_b = d_base_t - d_base
        err_c = d_cs_t - d_cs
        if abs(err_b) < 0.03 and abs(err_c) < 0.03:
            break
        # Analytic Jacobian (percent per cycle):
        #   request time T ~ C/fv + S/f0 + const; d_base = 100*(Tsse/T - 1)
        #   corespec rate ~ K/(C+S);              d_cs   = 100*(K'/N - 1)
        t_ns = (1.0 / (1.0 + d_base / 100.0)) * (ANCHOR["sse4"][0] + ANCHOR["sse4"][1]) / F0
        n_cyc = c + s
        db_dc = -100.0 * (1.0 + d_base / 100.0) / t_ns / fv
        db_ds = -100.0 * (1.0 + d_base / 100.0) / t_ns / F0
        dc_dn = -100.0 * (1.0 + d_cs / 100.0) / n_cyc
        det = db_dc * dc_dn - db_ds * dc_dn
        dc_step = (err_b * dc_dn - err_c * db_ds) / det
        ds_step = (err_c * db_dc - err_b * dc_dn) / det
        # clamp steps to stay in the physical region
        dc_step = max(-c * 0.5, min(c * 1.0, dc_step))
        ds_step = max(-s * 0.2, min(s * 0.2, ds_step))
        c += dc_step
        s += ds_step
        c = max(50_000.0, c)
        s = max(4_000_000.0, s)
    return int(round(c)), int(round(s)), d_base, d_cs, freq_b, freq_c


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--iters", type=int, default=8)
    args = ap.parse_args()

    base_ups, base_freq = run_cell("sse4", Policy.BASELINE, *ANCHOR["sse4"])
    cs_ups, cs_freq = run_cell("sse4", Policy.CORE_SPECIALIZATION, *ANCHOR["sse4"])
    print(
        f"  [sse4] baseline {base_ups:.1f}/s f={base_freq:.4f}; "
        f"corespec {(cs_ups / base_ups - 1) * 100.0:+.2f}% f={cs_freq:.4f}",
        file=sys.stderr,
    )

    results = {"sse4": ANCHOR["sse4"]}
    summary = {}
    for variant, targets, start in (
        ("avx2", (-4.2, -0.7), (1_750_000, 13_980_000)),
        ("avx512", (-11.2, -3.2), (1_740_000, 13_910_000)),
    ):
        c, s, d_base, d_cs, freq_b, freq_c = calibrate(
            variant, targets, start, base_ups, args.iters
        )
        results[variant] = (c, s)
        summary[variant] = (d_base, d_cs, freq_b, freq_c)

    print("variants:")
    for v in ("sse4", "avx2", "avx512"):
        c, s = results[v]
        print(f"  {v}:")
        print(f"    crypto_cycles: {c}")
        print(f"    scalar_cycles: {s}")
    print("# fitted deltas / frequencies:", file=sys.stderr)
    for v, (db, dc, fb, fc) in summary.items():
        print(
            f"#   {v}: baseline {db:+.2f}% f={fb:.4f} | corespec {dc:+.2f}% f={fc:.4f}",
            file=sys.stderr,
        )


if __name__ == "__main__":
    main()
