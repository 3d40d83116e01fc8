"""Desk-scale mixture search: proxy vs mixture-trained correlation and the selection table over seeds."""

import argparse
import dataclasses
import json
from pathlib import Path

import numpy as np

from mixmerge.evalx import AVERAGE
from mixmerge.pipeline import ExperimentConfig, run_dmo_via_merging


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", help="JSON ExperimentConfig (default: built-in desk regime)")
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--out", default="runs/desk")
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()
    base = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    rows = []
    for seed in range(args.seeds):
        cfg = dataclasses.replace(base, seed=seed, output_dir=f"{args.out}/seed{seed}", jobs=args.jobs)
        res = run_dmo_via_merging(cfg, oracle=True)
        for sel in res.selection.rows:
            rows.append({"seed": seed, "target": sel.target, "spearman": res.correlation[sel.target],
                         "uniform": sel.uniform, "median": sel.median, "selected": sel.selected,
                         "best": sel.best, "regret": sel.regret})
        avg = res.selection.row(AVERAGE)
        print(f"seed {seed}: spearman {res.correlation[AVERAGE]:.3f}  selected {res.selected.to_json()}  "
              f"uniform {avg.uniform:.4f} median {avg.median:.4f} selected {avg.selected:.4f} best {avg.best:.4f}")
    targets = sorted({r["target"] for r in rows})
    print(f"\n{'target':<10} {'spearman':>9} {'uniform':>8} {'median':>8} {'selected':>9} {'best':>8}")
    for t in targets:
        sub = [r for r in rows if r["target"] == t]
        mean = {k: np.mean([r[k] for r in sub]) for k in ("spearman", "uniform", "median", "selected", "best")}
        print(f"{t:<10} {mean['spearman']:>9.3f} {mean['uniform']:>8.4f} {mean['median']:>8.4f} "
              f"{mean['selected']:>9.4f} {mean['best']:>8.4f}")
    Path(args.out).mkdir(parents=True, exist_ok=True)
    Path(args.out, "summary.json").write_text(json.dumps(rows, indent=1, sort_keys=True) + "\n")


if __name__ == "__main__":
    main()
