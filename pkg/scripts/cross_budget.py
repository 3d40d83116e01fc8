"""Rank correlation of proxies built from reduced-budget experts against the full-budget oracle."""

import argparse
import dataclasses

import numpy as np

from mixmerge.pipeline import ExperimentConfig, run_cross_budget


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config")
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--fractions", type=float, nargs="+", default=[1.0, 0.5, 0.25, 0.1])
    ap.add_argument("--out", default="runs/desk")
    args = ap.parse_args()
    base = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    budgets = [max(1, int(round(f * base.budget))) for f in args.fractions]
    table = {b: [] for b in budgets}
    for seed in range(args.seeds):
        cfg = dataclasses.replace(base, seed=seed, output_dir=f"{args.out}/seed{seed}")
        summary = run_cross_budget(cfg, budgets)
        for b in budgets:
            table[b].append(summary[b])
        print(f"seed {seed}: " + "  ".join(f"N={b}: {summary[b]:.3f}" for b in budgets))
    print("\nproxy budget  mean spearman  stderr")
    for b in budgets:
        v = np.array(table[b], dtype=float)
        print(f"{b:>12}  {v.mean():>13.3f}  {v.std(ddof=1) / np.sqrt(len(v)) if len(v) > 1 else 0:.3f}")


if __name__ == "__main__":
    main()
