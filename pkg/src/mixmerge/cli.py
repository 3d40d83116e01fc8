"""Command-line entry point: ``mixmerge <subcommand> [--config c.json] [--seed s] [--out dir] [--jobs n] [--oracle]``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from mixmerge import pipeline
from mixmerge.baselines import ComparisonProtocol, RegressorSpec
from mixmerge.errors import ConfigError, MixMergeError
from mixmerge.params import _atomic_write
from mixmerge.quadbed import make_random_testbed, theory_check
from mixmerge.registry import Registry, derive_seed
from mixmerge.simplex import MixtureGrid, enumerate_grid, sample_dirichlet

log = logging.getLogger("mixmerge")


def _global_flags() -> argparse.ArgumentParser:
    # SUPPRESS defaults let the same flags appear before or after the subcommand
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", default=argparse.SUPPRESS, help="JSON experiment config")
    p.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    p.add_argument("--out", default=argparse.SUPPRESS, help="output directory (registry and reports)")
    p.add_argument("--jobs", type=int, default=argparse.SUPPRESS, help="parallel training workers")
    p.add_argument("--oracle", action="store_true", default=argparse.SUPPRESS, help="also train one model per mixture")
    p.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)
    return p


def build_parser() -> argparse.ArgumentParser:
    flags = _global_flags()
    parser = argparse.ArgumentParser(prog="mixmerge", parents=[flags],
                                     description="Data mixture search with merged expert proxies.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_):
        return sub.add_parser(name, parents=[flags], help=help_)

    p = add("gen-grid", "enumerate a simplex lattice")
    p.add_argument("--k", type=int)
    p.add_argument("--m", type=int, default=8)
    p.add_argument("--boundary", action="store_true", help="include points with zero coordinates")

    p = add("sample-mixtures", "draw Dirichlet mixtures")
    p.add_argument("--k", type=int)
    p.add_argument("--count", type=int, default=20)
    p.add_argument("--concentration", type=float, default=1.0)

    p = add("train-experts", "train one expert per domain")
    p.add_argument("--budget", type=int, help="expert training budget (default: proxy budget)")
    add("train-oracle", "train one model per candidate mixture at the full budget")
    add("merge-eval", "score every candidate by its merged proxy")
    add("correlate", "Spearman between proxy and mixture-trained scores (trains the oracle)")
    add("select", "pick the mixture with the best proxy score")

    p = add("cross-budget", "correlate proxies from reduced-budget experts with the full-budget oracle")
    p.add_argument("--budgets", type=int, nargs="+", help="expert budgets (default N/2 and N/10)")

    p = add("regress-compare", "ridge regression baseline against the merged proxy")
    p.add_argument("--feature-map", choices=["linear", "quadratic"], default="quadratic")
    p.add_argument("--ridge-lambda", type=float, default=1e-6)
    p.add_argument("--eval-size", type=int, default=8)
    p.add_argument("--train-sizes", type=int, nargs="+")
    p.add_argument("--trials", type=int, default=100)

    p = add("quad-theory", "linear vs Hessian-weighted merging on quadratic testbeds")
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--d", type=int, default=16)
    p.add_argument("--m", type=int, default=8)
    p.add_argument("--condition-cap", type=float, default=10.0)
    p.add_argument("--spread", type=float, default=1.0)
    p.add_argument("--testbeds", type=int, default=10)
    p.add_argument("--shared-hessian", action="store_true")

    p = add("probe", "loss along random directions around an expert")
    p.add_argument("--center", type=int, default=0)
    p.add_argument("--other", type=int, default=1)
    p.add_argument("--directions", type=int, default=5)
    p.add_argument("--alphas", type=int, default=41)

    p = add("project", "project mixture-trained models onto the experts' plane")
    p.add_argument("--a", type=int, default=0)
    p.add_argument("--b", type=int, default=1)

    p = add("report", "CSV/JSON views of the registry")
    p.add_argument("--query", action="append", choices=["scatter", "runs", "accounting"])
    p.add_argument("--proxy-budget", type=int)

    add("prune", "delete mixture-trained checkpoints, keep their records")
    return parser


def load_config(args) -> pipeline.ExperimentConfig:
    cfg = pipeline.ExperimentConfig.load(args.config) if getattr(args, "config", None) else pipeline.ExperimentConfig()
    over = {}
    if hasattr(args, "seed"):
        if not 0 <= args.seed < 2**64:
            raise ConfigError("--seed must be an unsigned 64-bit integer")
        over["seed"] = args.seed
    if hasattr(args, "out"):
        over["output_dir"] = args.out
    if hasattr(args, "jobs"):
        over["jobs"] = args.jobs
    return dataclasses.replace(cfg, **over) if over else cfg


def _emit(args, cfg, name: str, text: str):
    if hasattr(args, "out") or getattr(args, "config", None):
        path = Path(cfg.output_dir) / "reports" / name
        _atomic_write(path, text.encode("utf-8"))
        print(path)
    else:
        sys.stdout.write(text)


def _runs_json(runs) -> str:
    return json.dumps([r.to_dict() for r in sorted(runs, key=lambda r: r.mixture.weights)], indent=1, sort_keys=True) + "\n"


def run(args) -> int:
    cfg = load_config(args)
    oracle = getattr(args, "oracle", False)
    cmd = args.command
    if cmd == "gen-grid":
        k = cfg.k if args.k is None else args.k
        grid = MixtureGrid(k, args.m, args.boundary, tuple(enumerate_grid(k, args.m, args.boundary)))
        _emit(args, cfg, f"grid_k{k}_m{args.m}.json", grid.to_json() + "\n")
    elif cmd == "sample-mixtures":
        k = cfg.k if args.k is None else args.k
        ws = sample_dirichlet(k, args.count, args.concentration, derive_seed(cfg.seed, "dirichlet"))
        _emit(args, cfg, f"dirichlet_k{k}.json", json.dumps([list(w.weights) for w in ws], indent=1) + "\n")
    elif cmd == "train-experts":
        exp = pipeline.Experiment(cfg)
        runs = exp.expert_runs(args.budget)
        _emit(args, cfg, "experts.json", _runs_json(runs))
        log.info("trained %d new runs", exp.trained_now)
    elif cmd == "train-oracle":
        exp = pipeline.Experiment(cfg)
        runs = [r for r, _ in exp.oracle_runs()]
        _emit(args, cfg, "oracle.json", _runs_json(runs))
        log.info("trained %d new runs", exp.trained_now)
    elif cmd == "merge-eval":
        exp = pipeline.Experiment(cfg)
        runs = exp.proxy_runs()
        _emit(args, cfg, "proxy_scores.csv", pipeline.scores_csv(runs, exp.suite.names))
    elif cmd in ("select", "correlate"):
        res = pipeline.run_dmo_via_merging(cfg, oracle=oracle or cmd == "correlate")
        out = {"selected_mixture": list(res.selected.weights), "accounting": res.accounting}
        if res.correlation is not None:
            out["spearman"] = res.correlation
            out["regret"] = {row.target: row.regret for row in res.selection.rows}
        print(json.dumps(out, indent=1, sort_keys=True))
    elif cmd == "cross-budget":
        summary = pipeline.run_cross_budget(cfg, args.budgets)
        print(json.dumps({str(b): rho for b, rho in summary.items()}, indent=1))
    elif cmd == "regress-compare":
        spec = RegressorSpec(args.feature_map, args.ridge_lambda)
        sizes = tuple(args.train_sizes) if args.train_sizes else tuple(range(2, 17))
        proto = ComparisonProtocol(args.eval_size, sizes, args.trials, derive_seed(cfg.seed, "protocol"))
        rep = pipeline.run_regress_compare(cfg, spec, proto)
        sys.stdout.write(rep.to_csv())
    elif cmd == "quad-theory":
        grid = enumerate_grid(args.k, args.m)
        rows, summary = [], []
        for t in range(args.testbeds):
            seed = derive_seed(cfg.seed, "quadbed", t)
            doms = make_random_testbed(args.k, args.d, args.condition_cap, args.spread, seed, args.shared_hessian)
            rep = theory_check(doms, grid, seed=seed)
            summary.append({"testbed": t, "spearman": rep.spearman, "max_gap": rep.max_gap,
                            "max_grad_inf_norm": rep.max_grad})
            rows.append(rep.to_csv() if t == 0 else rep.to_csv().split("\n", 1)[1])
        _emit(args, cfg, "quad_theory.csv", "".join(rows))
        _emit(args, cfg, "quad_theory.json", json.dumps(summary, indent=1, sort_keys=True) + "\n")
    elif cmd == "probe":
        curves = pipeline.run_probe(cfg, args.center, args.other, args.directions, args.alphas)
        print(f"{len(curves)} curves written under {Path(cfg.output_dir) / 'reports'}")
    elif cmd == "project":
        proj = pipeline.run_project(cfg, args.a, args.b)
        print(f"{len(proj.points)} models projected under {Path(cfg.output_dir) / 'reports'}")
    elif cmd == "report":
        reg = Registry(cfg.output_dir)
        files = pipeline.report(reg, args.query or ["scatter", "runs", "accounting"],
                                Path(cfg.output_dir) / "reports", args.proxy_budget)
        for f in files:
            print(f)
    elif cmd == "prune":
        print(f"removed {pipeline.prune(cfg)} checkpoint files")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return run(args)
    except pipeline.EmptyReport as exc:
        log.warning("empty report: %s", exc)
        return exc.exit_code
    except MixMergeError as exc:
        print(f"mixmerge: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
