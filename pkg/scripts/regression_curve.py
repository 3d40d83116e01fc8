"""Held-out Spearman of ridge mixture regressors vs number of training runs, against the merged proxy."""

import argparse
import dataclasses
from pathlib import Path

from mixmerge.baselines import ComparisonProtocol, RegressorSpec
from mixmerge.pipeline import ExperimentConfig, run_regress_compare


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--trials", type=int, default=100)
    ap.add_argument("--out", default="runs/desk")
    args = ap.parse_args()
    base = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    cfg = dataclasses.replace(base, seed=args.seed, output_dir=f"{args.out}/seed{args.seed}")
    proto = ComparisonProtocol(8, tuple(range(2, 17)), args.trials, args.seed)
    for fmap in ("linear", "quadratic"):
        rep = run_regress_compare(cfg, RegressorSpec(fmap), proto)
        print(f"ridge-{fmap} (population {rep.manifest['population']}, proxy at cost K: "
              f"{rep.points[0].proxy_mean:.3f} +- {rep.points[0].proxy_stderr:.3f})")
        for p in rep.points:
            print(f"  T={p.train_size:>2}  {p.regressor_mean:.3f} +- {p.regressor_stderr:.3f}")
    print(f"curves written under {Path(cfg.output_dir) / 'reports'}")


if __name__ == "__main__":
    main()
