"""Fine-tuning learning rate vs proxy quality and cross-budget ordering, with and without a pretrained base."""

import argparse
import dataclasses
import tempfile

import numpy as np

from mixmerge.pipeline import ExperimentConfig, run_cross_budget, run_dmo_via_merging
from mixmerge.train import TrainConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--lrs", type=float, nargs="+", default=[0.001, 0.002, 0.005, 0.05])
    ap.add_argument("--seeds", type=int, default=6)
    ap.add_argument("--no-pretrain", action="store_true", help="start experts from a random init")
    args = ap.parse_args()
    print(f"{'lr':>7} {'spearman':>9} {'N/2>=N/10':>10}")
    for lr in args.lrs:
        rhos, wins = [], 0
        for seed in range(args.seeds):
            with tempfile.TemporaryDirectory() as tmp:
                cfg = ExperimentConfig(seed=seed, output_dir=tmp,
                                       finetune=dataclasses.replace(TrainConfig(), peak_lr=lr),
                                       pretrain_budget=0 if args.no_pretrain else 1500)
                rhos.append(run_dmo_via_merging(cfg, oracle=True, write=False).correlation["average"])
                cb = run_cross_budget(cfg, write=False)
                wins += cb[cfg.budget // 2] >= cb[cfg.budget // 10]
        print(f"{lr:>7g} {np.mean(rhos):>9.3f} {wins:>6}/{args.seeds}")


if __name__ == "__main__":
    main()
