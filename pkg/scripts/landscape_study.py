"""Loss probes around a trained expert and the projection of mixture-trained models onto the experts' plane."""

import argparse
import dataclasses

import numpy as np

from mixmerge.landscape import line_alignment_score
from mixmerge.pipeline import ExperimentConfig, run_probe, run_project


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default=None, help="defaults to a two-domain desk run")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="runs/landscape")
    args = ap.parse_args()
    base = ExperimentConfig.load(args.config) if args.config else ExperimentConfig(k=2)
    cfg = dataclasses.replace(base, seed=args.seed, output_dir=f"{args.out}/seed{args.seed}")
    for c in run_probe(cfg, 0, 1):
        mid = len(c.alphas) // 2
        print(f"direction {c.direction_id}: loss at 0 {c.losses[mid]:.4f}, at -2 {c.losses[0]:.4f}, "
              f"at +2 {c.losses[-1]:.4f} (scale {c.rescale_norm:.3f})")
    proj = run_project(cfg, 0, 1)
    print(f"\nexperts at {np.round(proj.anchor_a, 3)} and {np.round(proj.anchor_b, 3)}")
    for p in proj.points:
        print(f"  {p.mixture.to_json():<14} x={p.x:8.3f} y={p.y:8.3f} residual={p.residual_norm:.3f}")
    print(f"line alignment score {line_alignment_score(proj):.4f}")


if __name__ == "__main__":
    main()
