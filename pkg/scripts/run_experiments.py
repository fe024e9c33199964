#!/usr/bin/env python3
"""Run the bundled experiment set and print the headline tables.

Covers: steering-vs-RSS affinity comparisons on the pinned placements
(pinned_same/pinned_cross), reordering with and without the hold timer on the
migrating placements (migrate_same/migrate_cross), the admission sweep, the
worst-case migration schedule and the held-byte bound (memory10g).

Usage: python scripts/run_experiments.py [--seeds N]
"""

import argparse
import statistics
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from steersim import presets  # noqa: E402
from steersim.metrics import occupancy_oracle  # noqa: E402
from steersim.runner import run_scenario  # noqa: E402


def mean_std(values):
    m = statistics.fmean(values)
    s = statistics.stdev(values) if len(values) > 1 else 0.0
    return m, s


def affinity_table(seeds):
    print("== steering benefit (pinned apps) ==")
    print(f"{'scenario':<14} {'mode':<10} {'data_affinity':>14} {'cross_core':>11} "
          f"{'lock_conflicts':>15} {'proc_ctx%':>10}")
    for build in (presets.pinned_same, presets.pinned_cross):
        for mode in ("flowsteer", "rss"):
            daff, cross, lock, pf = [], [], [], []
            for seed in seeds:
                s = build()
                s.nic.mode = mode
                r = run_scenario(s, seed=seed).report
                daff.append(r.data_affinity)
                cross.append(r.cross_core_packets)
                lock.append(r.lock_conflict_events)
                pf.append(r.process_context_fraction)
            print(f"{build.__name__:<14} {mode:<10}"
                  f" {mean_std(daff)[0]:>8.3f}±{mean_std(daff)[1]:.3f}"
                  f" {mean_std(cross)[0]:>10.1f}"
                  f" {mean_std(lock)[0]:>15.1f}"
                  f" {100 * mean_std(pf)[0]:>9.1f}%")
    print()


def reordering_table(seeds):
    print("== reordering ratio (migrating apps) ==")
    print(f"{'scenario':<14} {'streams':>8} {'timer=0':>12} {'timer=100us':>12}")
    for build in (presets.migrate_same, presets.migrate_cross):
        for streams in (40, 2000):
            with_timer, without = [], []
            for seed in seeds:
                s0 = build(streams)
                s0.flow_table.t_timer_us = 0.0
                without.append(run_scenario(s0, seed=seed).report.reordering_ratio)
                s1 = build(streams)
                with_timer.append(run_scenario(s1, seed=seed).report.reordering_ratio)
            print(f"{build.__name__:<14} {streams:>8}"
                  f" {mean_std(without)[0]:>12.3e} {mean_std(with_timer)[0]:>12.3e}")
    print()


def admission_table(seeds):
    print("== flows admitted to the steering table ==")
    print(f"{'streams':>8} {'chain cap':>10} {'simulated':>10} {'analytic':>9}")
    for mls in (6, 1):
        for streams in (40, 200, 1000, 2000):
            fractions = [
                run_scenario(presets.admission(streams, mls), seed=s).report.admitted_fraction
                for s in seeds
            ]
            m, sd = mean_std(fractions)
            oracle = occupancy_oracle(256, streams, mls)
            print(f"{streams:>8} {mls:>10} {100 * m:>8.1f}%±{100 * sd:.1f} "
                  f"{100 * oracle:>8.1f}%")
    print()


def worstcase_and_memory():
    print("== worst-case migration schedule ==")
    for t_timer in (0.0, 85.0, 100.0):
        s = presets.worstcase()
        s.flow_table.t_timer_us = t_timer
        r = run_scenario(s, seed=1).report
        print(f"t_timer={t_timer:>6.1f}us reordering={r.reordering_ratio:.3e} "
              f"held={r.held_packets} max_hold={r.held_delay_max_ns}ns")
    r = run_scenario(presets.memory10g(), seed=1).report
    print(f"10 Gbps, t_timer=200us: peak held bytes {r.peak_held_bytes} "
          f"(bound 250000), table memory peak {r.table_memory_peak_bytes} bytes")
    print()


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--seeds", type=int, default=3)
    args = parser.parse_args()
    seeds = range(1, args.seeds + 1)
    affinity_table(seeds)
    reordering_table(seeds)
    admission_table(seeds)
    worstcase_and_memory()


if __name__ == "__main__":
    main()
