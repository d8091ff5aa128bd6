#!/usr/bin/env python3
"""Full model vs the no-social ablation on seeded synthetic worlds.

Generates one world per seed, streams both variants, and prints a small
table with stream-average F1 and cumulative Gini. This is the experiment the
acceptance suite runs with majority voting over seeds."""

import argparse
import tempfile
import time

from sean import corpus, synth, trainer

EXPERIMENT_WORLD = dict(
    read_prob_own_topic=0.7,
    friend_topic_damping=0.6,
    docs_per_day=10,
)

EXPERIMENT_RUN = dict(
    epochs_per_day=2,
    batch_size=64,
    hidden=16,
    filters=8,
    windows=(1, 2),
    lr=1e-2,
    neg_cap_per_user_day=3,
)


def run_pair(seed: int, days: int, run_overrides=None):
    with tempfile.TemporaryDirectory() as td:
        cfg = synth.WorldConfig(seed=seed, n_days=days, **EXPERIMENT_WORLD)
        synth.generate_world(cfg, td)
        world = corpus.load_world(td)
        results = {}
        for social in ("attention", "none"):
            rc = trainer.RunConfig(
                days=days, seed=seed, social=social,
                **{**EXPERIMENT_RUN, **(run_overrides or {})},
            )
            start = time.perf_counter()
            _, summary = trainer.run_stream(world, rc)
            summary["seconds"] = time.perf_counter() - start
            results[social] = summary
    return results


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", default="101,102,103")
    ap.add_argument("--days", type=int, default=20)
    args = ap.parse_args()

    print(f"{'seed':>6} {'variant':>10} {'avg_f1':>8} {'gini_cum':>9} {'cc':>8} {'secs':>6}")
    wins_f1 = wins_gini = 0
    seeds = [int(s) for s in args.seeds.split(",")]
    for seed in seeds:
        results = run_pair(seed, args.days)
        for social, name in (("attention", "full"), ("none", "no-social")):
            s = results[social]
            print(
                f"{seed:>6} {name:>10} {s['avg_f1']:>8.4f} {s['gini_cumulative']:>9.4f} "
                f"{s['cc_stream']:>8.4f} {s['seconds']:>6.0f}"
            )
        gap = results["attention"]["avg_f1"] - results["none"]["avg_f1"]
        gini_ok = results["none"]["gini_cumulative"] <= results["attention"]["gini_cumulative"]
        wins_f1 += gap >= 0.02
        wins_gini += gini_ok
        print(f"       f1 gap {gap:+.4f}, no-social gini <= full: {gini_ok}")
    n = len(seeds)
    print(f"\nmajority: f1 gap >= 2pts on {wins_f1}/{n} seeds; gini ordering on {wins_gini}/{n}")


if __name__ == "__main__":
    main()
