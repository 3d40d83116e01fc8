"""Experiment orchestration: experts, merged proxies, mixture-trained oracles and reports.

A merging-based search over M candidate mixtures trains K experts and runs
M cheap evaluations. Oracle mode trains one model per candidate on top, plus a
uniform-mixture reference run when the uniform point is not a candidate.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from mixmerge import baselines, landscape
from mixmerge.errors import ConfigError, MixMergeError, StructuralError, UndefinedCorrelationError
from mixmerge.evalx import AVERAGE, BenchmarkSuite, RunRecord, argmax_mixture, evaluate, selection_table, spearman
from mixmerge.params import ExpertSet, ParamVector, _atomic_write, merge_linear
from mixmerge.registry import Registry, content_key, derive_seed
from mixmerge.simplex import MixtureWeights, enumerate_grid, sample_dirichlet, uniform_mixture, vertex
from mixmerge.synth import DomainSpec, assemble_mixture, build_domain_pool, make_domain_family
from mixmerge.train import ModelConfig, TrainConfig, init_model, loss, loss_gradient, train

log = logging.getLogger(__name__)


class EmptyReport(MixMergeError):
    exit_code = 5


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


@dataclass(frozen=True)
class ExperimentConfig:
    k: int = 3
    budget: int = 6000
    proxy_budget: Optional[int] = None
    domains: tuple[DomainSpec, ...] = ()
    # keyword arguments for make_domain_family when ``domains`` is empty
    family: dict = field(default_factory=lambda: {"center_radius": 3.0})
    candidates: dict = field(default_factory=lambda: {"kind": "grid", "m": 8, "include_boundary": False})
    model: ModelConfig = ModelConfig()
    pretrain_budget: int = 1500
    pretrain: TrainConfig = TrainConfig()
    finetune: TrainConfig = TrainConfig(peak_lr=0.002)
    benchmark_size: int = 5000
    mode: str = "apportioned"
    seed: int = 0
    include_vertices: bool = False
    output_dir: str = "runs/experiment"
    jobs: int = 1

    def __post_init__(self):
        object.__setattr__(self, "domains", tuple(self.domains))
        if self.k < 1:
            raise ConfigError("k must be >= 1")
        if self.budget < 1:
            raise ConfigError("budget must be >= 1")
        if self.proxy_budget is not None and not 1 <= self.proxy_budget <= self.budget:
            raise ConfigError(f"proxy_budget must lie in [1, budget={self.budget}]")
        if self.domains and len(self.domains) != self.k:
            raise ConfigError(f"{len(self.domains)} domains listed for k={self.k}")
        if self.mode not in ("apportioned", "multinomial"):
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.candidates.get("kind") not in ("grid", "dirichlet"):
            raise ConfigError("candidates.kind must be 'grid' or 'dirichlet'")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        for spec in self.domain_specs():
            if spec.pool_size < self.budget:
                raise ConfigError(f"{spec.name}: pool_size {spec.pool_size} < budget {self.budget}")
            if spec.input_dim != self.model.input_dim or spec.num_classes != self.model.num_classes:
                raise ConfigError(f"{spec.name}: dimensions disagree with the model config")

    def domain_specs(self) -> list[DomainSpec]:
        if self.domains:
            return list(self.domains)
        kw = {"pool_size": self.budget, **self.family}
        return make_domain_family(
            self.k, input_dim=self.model.input_dim, num_classes=self.model.num_classes, seed=self.seed, **kw
        )

    @property
    def effective_proxy_budget(self) -> int:
        return self.proxy_budget or self.budget

    def fingerprint(self) -> dict:
        """Everything that changes a trained model or a score; search-only settings are left out."""
        return {
            "k": self.k,
            "domains": [s.to_dict() for s in self.domain_specs()],
            "model": dataclasses.asdict(self.model),
            "pretrain_budget": self.pretrain_budget,
            "pretrain": self.pretrain.to_dict(),
            "finetune": self.finetune.to_dict(),
            "benchmark_size": self.benchmark_size,
            "mode": self.mode,
            "seed": self.seed,
        }

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "budget": self.budget,
            "proxy_budget": self.proxy_budget,
            "domains": [s.to_dict() for s in self.domains],
            "family": dict(self.family),
            "candidates": dict(self.candidates),
            "model": dataclasses.asdict(self.model),
            "pretrain_budget": self.pretrain_budget,
            "pretrain": self.pretrain.to_dict(),
            "finetune": self.finetune.to_dict(),
            "benchmark_size": self.benchmark_size,
            "mode": self.mode,
            "seed": self.seed,
            "include_vertices": self.include_vertices,
            "output_dir": self.output_dir,
            "jobs": self.jobs,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kw = dict(d)
        try:
            if "domains" in kw:
                kw["domains"] = tuple(DomainSpec.from_dict(x) for x in kw["domains"])
            if "model" in kw:
                kw["model"] = ModelConfig(**kw["model"])
            for name in ("pretrain", "finetune"):
                if name in kw:
                    kw[name] = TrainConfig(**kw[name])
            return cls(**kw)
        except (TypeError, KeyError) as exc:
            raise ConfigError(f"malformed config: {exc}") from exc

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(data)


def _fit(start: ParamVector, data, cfg: TrainConfig):
    theta = train(start, data, cfg)
    return theta, float(np.linalg.norm(loss_gradient(theta, data))), loss(theta, data)


@dataclass(frozen=True)
class _Job:
    key: str
    kind: str
    mixture: MixtureWeights
    budget: int
    role: str


class Experiment:
    """One configured experiment bound to its registry. Training results are
    reused by content key, so stages can be rerun or resumed freely."""

    def __init__(self, cfg: ExperimentConfig, registry: Optional[Registry] = None):
        self.cfg = cfg
        self.registry = registry if registry is not None else Registry(cfg.output_dir)
        self.specs = cfg.domain_specs()
        self._fp = cfg.fingerprint()
        self.trained_now = 0

    # data -----------------------------------------------------------------

    @cached_property
    def pools(self):
        return [
            build_domain_pool(s, seed=derive_seed(self.cfg.seed, "pool", i), domain_index=i)
            for i, s in enumerate(self.specs)
        ]

    @cached_property
    def suite(self) -> BenchmarkSuite:
        return BenchmarkSuite(
            tuple(
                (s.name, build_domain_pool(s, derive_seed(self.cfg.seed, "bench", i), i, self.cfg.benchmark_size))
                for i, s in enumerate(self.specs)
            )
        )

    def candidates(self) -> list[MixtureWeights]:
        c = self.cfg.candidates
        if c["kind"] == "grid":
            return list(enumerate_grid(self.cfg.k, int(c.get("m", 8)), bool(c.get("include_boundary", False))))
        seed = int(c.get("seed", derive_seed(self.cfg.seed, "dirichlet")))
        return sample_dirichlet(self.cfg.k, int(c.get("count", 20)), float(c.get("concentration", 1.0)), seed)

    def key(self, kind: str, mixture: Optional[MixtureWeights], budget: int) -> str:
        return content_key(self._fp, kind, list(mixture.weights) if mixture else None, budget)

    def _data(self, mixture: MixtureWeights, budget: int):
        seed = derive_seed(self.cfg.seed, "data", list(mixture.weights), budget)
        names = [s.name for s in self.specs]
        return assemble_mixture(self.pools, mixture, budget, seed, self.cfg.mode, names)

    def _train_cfg(self, mixture: MixtureWeights, budget: int) -> TrainConfig:
        return dataclasses.replace(self.cfg.finetune, seed=derive_seed(self.cfg.seed, "train", list(mixture.weights), budget))

    # models ---------------------------------------------------------------

    def base(self) -> ParamVector:
        """theta_0: a generalist pretrained on a separate uniform-mixture sample."""
        cfg = self.cfg
        key = self.key("base", None, cfg.pretrain_budget)
        got = self.registry.load_checkpoint(key)
        if got is not None:
            return got
        start = init_model(dataclasses.replace(cfg.model, init_seed=derive_seed(cfg.seed, "init", cfg.model.init_seed)))
        if cfg.pretrain_budget > 0:
            pools = [
                build_domain_pool(s, derive_seed(cfg.seed, "pretrain-pool", i), i, cfg.pretrain_budget)
                for i, s in enumerate(self.specs)
            ]
            data = assemble_mixture(pools, uniform_mixture(cfg.k), cfg.pretrain_budget,
                                    derive_seed(cfg.seed, "pretrain-data"), cfg.mode)
            tcfg = dataclasses.replace(cfg.pretrain, seed=derive_seed(cfg.seed, "pretrain"))
            start = train(start, data, tcfg)
        ev = evaluate(start, self.suite)
        rec = RunRecord(uniform_mixture(cfg.k), "trained", cfg.pretrain_budget, ev.scores, ev.average, cfg.seed, role="base")
        self.registry.append(key, "base", rec, start, {"budget": cfg.pretrain_budget})
        return start

    def _run_jobs(self, jobs: Sequence[_Job], need_params: bool) -> dict:
        base = self.base()
        todo = [j for j in jobs if j.key not in self.registry]
        if todo:
            log.info("training %d runs (%d reused)", len(todo), len(jobs) - len(todo))
            args = [(base, self._data(j.mixture, j.budget), self._train_cfg(j.mixture, j.budget)) for j in todo]
            if self.cfg.jobs > 1 and len(todo) > 1:
                with ProcessPoolExecutor(max_workers=self.cfg.jobs) as pool:
                    futures = [pool.submit(_fit, *a) for a in args]
                    # collected in submission order: a single writer appends deterministically
                    results = [f.result() for f in futures]
            else:
                results = [_fit(*a) for a in args]
            for j, (theta, gnorm, tloss) in zip(todo, results):
                ev = evaluate(theta, self.suite)
                rec = RunRecord(j.mixture, "trained", j.budget, ev.scores, ev.average, self.cfg.seed, role=j.role,
                                extra={"final_grad_norm": gnorm, "train_loss": tloss})
                self.registry.append(j.key, j.kind, rec, theta, {"budget": j.budget})
                self.trained_now += 1
        out = {}
        for j in jobs:
            e = self.registry.get(j.key)
            params = self.registry.load_checkpoint(j.key) if need_params else None
            if need_params and params is None:
                raise StructuralError(f"checkpoint for {j.kind} run {j.mixture.to_json()} was pruned")
            out[j.key] = (e.record, params)
        return out

    def experts(self, budget: Optional[int] = None) -> ExpertSet:
        budget = budget or self.cfg.effective_proxy_budget
        jobs = [_Job(self.key("expert", vertex(self.cfg.k, i), budget), "expert", vertex(self.cfg.k, i), budget, "expert")
                for i in range(self.cfg.k)]
        got = self._run_jobs(jobs, need_params=True)
        return ExpertSet(self.base(), tuple(got[j.key][1] for j in jobs), tuple(s.name for s in self.specs))

    def expert_runs(self, budget: Optional[int] = None) -> list[RunRecord]:
        self.experts(budget)
        budget = budget or self.cfg.effective_proxy_budget
        return [self.registry.get(self.key("expert", vertex(self.cfg.k, i), budget)).record for i in range(self.cfg.k)]

    def oracle_runs(self, need_params: bool = False) -> list[tuple[RunRecord, Optional[ParamVector]]]:
        """Mixture-trained runs at the full budget, plus the uniform reference when it is not a candidate."""
        cands = self.candidates()
        jobs = [_Job(self.key("oracle", w, self.cfg.budget), "oracle", w, self.cfg.budget,
                     "expert" if w.is_vertex() else "candidate") for w in cands]
        uni = uniform_mixture(self.cfg.k)
        if not any(w.close_to(uni) for w in cands):
            jobs.append(_Job(self.key("reference", uni, self.cfg.budget), "reference", uni, self.cfg.budget, "reference"))
        got = self._run_jobs(jobs, need_params)
        return [got[j.key] for j in jobs]

    def proxy_runs(self, budget: Optional[int] = None, with_vertices: bool = True) -> list[RunRecord]:
        budget = budget or self.cfg.effective_proxy_budget
        mixtures = list(self.candidates())
        if with_vertices:
            mixtures += [vertex(self.cfg.k, i) for i in range(self.cfg.k) if not any(m.close_to(vertex(self.cfg.k, i)) for m in mixtures)]
        experts = None
        runs = []
        for w in mixtures:
            key = self.key("proxy", w, budget)
            e = self.registry.get(key)
            if e is None:
                experts = experts or self.experts(budget)
                ev = evaluate(merge_linear(experts, w), self.suite)
                rec = RunRecord(w, "merged-proxy", budget, ev.scores, ev.average, self.cfg.seed,
                                role="expert" if w.is_vertex() else "candidate")
                e = self.registry.append(key, "proxy", rec, None, {"budget": budget})
            runs.append(e.record)
        return runs

    def accounting(self) -> dict:
        counts: dict = {}
        for e in self.registry:
            if e.key in self._own_keys():
                counts[e.kind] = counts.get(e.kind, 0) + 1
        return dict(sorted(counts.items()))

    def _own_keys(self) -> set:
        fp_keys = set()
        for e in self.registry:
            budget = e.meta.get("budget")
            mix = e.record.mixture if e.record else None
            if e.kind == "base":
                mix = None
            if self.key(e.kind, mix, budget) == e.key:
                fp_keys.add(e.key)
        return fp_keys


# results and reports --------------------------------------------------------


@dataclass
class DMOResult:
    selected: MixtureWeights
    proxy_runs: list
    oracle_runs: Optional[list] = None
    reference_runs: Optional[list] = None
    selection: Optional[object] = None
    correlation: Optional[dict] = None
    accounting: dict = field(default_factory=dict)
    trained_now: int = 0
    files: list = field(default_factory=list)


def _safe_spearman(x, y):
    try:
        return spearman(x, y)
    except UndefinedCorrelationError:
        return None


def correlations(oracle: Sequence[RunRecord], proxy: Sequence[RunRecord], names: Sequence[str]) -> dict:
    pairs = []
    for p in sorted(proxy, key=lambda r: r.mixture.weights):
        o = next((r for r in oracle if r.mixture.close_to(p.mixture)), None)
        if o is not None:
            pairs.append((p, o))
    out = {"n_mixtures": len(pairs)}
    for t in [AVERAGE, *names]:
        out[t] = _safe_spearman([p.score(t) for p, _ in pairs], [o.score(t) for _, o in pairs]) if len(pairs) >= 2 else None
    return out


def _write(path: Path, text: str) -> Path:
    _atomic_write(path, text.encode("utf-8"))
    return path


def scores_csv(runs: Sequence[RunRecord], names: Sequence[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["mixture", "provenance", "role", "budget", *names, AVERAGE])
    for r in sorted(runs, key=lambda r: (r.provenance, r.budget, r.mixture.weights)):
        w.writerow([r.mixture.to_json(), r.provenance, r.role, r.budget, *[_fmt(r.scores[n]) for n in names], _fmt(r.average)])
    return buf.getvalue()


def scatter_csv(pairs) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["mixture", "proxy_avg", "oracle_avg"])
    for p, o in pairs:
        w.writerow([p.mixture.to_json(), _fmt(p.average), _fmt(o.average)])
    return buf.getvalue()


def _json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=1) + "\n"


def manifest(cfg: ExperimentConfig, exp: Experiment) -> dict:
    return {
        "config": cfg.fingerprint(),
        "budget": cfg.budget,
        "proxy_budget": cfg.effective_proxy_budget,
        "candidates": {**cfg.candidates, "count": len(exp.candidates())},
        "include_vertices": cfg.include_vertices,
        "assembly_mode": cfg.mode,
        "numerics": {"dtype": "float64", "gradient_clipping": None},
        "benchmarks": exp.suite.names,
    }


def run_dmo_via_merging(cfg: ExperimentConfig, oracle: bool = False, registry: Optional[Registry] = None,
                        write: bool = True) -> DMOResult:
    """Train K experts, score every candidate by its merged proxy, pick the argmax.

    With ``oracle`` also trains one model per candidate and reports Spearman
    agreement and the Uniform/Median/Selected/Best table.
    """
    if cfg.k == 1:
        return DMOResult(selected=MixtureWeights((1.0,)), proxy_runs=[])
    exp = Experiment(cfg, registry)
    names = exp.suite.names
    out = Path(cfg.output_dir) / "reports"
    proxy = exp.proxy_runs()
    cand_proxy = [r for r in proxy if cfg.include_vertices or not r.mixture.is_vertex()]
    selected = argmax_mixture(cand_proxy)
    result = DMOResult(selected=selected, proxy_runs=proxy)
    files = []
    if write:
        files.append(_write(out / "manifest.json", _json(manifest(cfg, exp))))
        files.append(_write(out / "proxy_scores.csv", scores_csv(proxy, names)))
        files.append(_write(out / "selected.json", _json({
            "selected_mixture": list(selected.weights),
            "proxy_average": next(r.average for r in cand_proxy if r.mixture == selected),
            "candidates": len(cand_proxy),
        })))
    if oracle:
        got = exp.oracle_runs()
        oracle_recs = [r for r, _ in got if r.role != "reference"]
        refs = [r for r, _ in got if r.role == "reference"]
        sel = selection_table(oracle_recs + refs, proxy, [AVERAGE, *names], include_vertices=cfg.include_vertices)
        corr = correlations([r for r in oracle_recs if cfg.include_vertices or not r.mixture.is_vertex()], cand_proxy, names)
        result.oracle_runs, result.reference_runs, result.selection, result.correlation = oracle_recs, refs, sel, corr
        if write:
            pairs = [(p, next(o for o in oracle_recs if o.mixture.close_to(p.mixture)))
                     for p in sorted(cand_proxy, key=lambda r: r.mixture.weights)]
            files.append(_write(out / "oracle_scores.csv", scores_csv(oracle_recs + refs, names)))
            files.append(_write(out / "selection.csv", sel.to_csv()))
            files.append(_write(out / "correlation.json", _json(corr)))
            files.append(_write(out / "scatter.csv", scatter_csv(pairs)))
            files.append(_write(out / "scatter_plot.csv", landscape.plot_data(
                {"proxy_vs_oracle": ([p.average for p, _ in pairs], [o.average for _, o in pairs])})))
    result.accounting = exp.accounting()
    result.trained_now = exp.trained_now
    if write:
        files.append(_write(out / "accounting.json", _json(result.accounting)))
    result.files = files
    return result


def run_cross_budget(cfg: ExperimentConfig, proxy_budgets: Optional[Sequence[int]] = None,
                     registry: Optional[Registry] = None, write: bool = True) -> dict:
    """Spearman between proxies built from reduced-budget experts and full-budget oracle averages."""
    if proxy_budgets is None:
        proxy_budgets = [cfg.proxy_budget] if cfg.proxy_budget else [cfg.budget // 2, cfg.budget // 10]
    for b in proxy_budgets:
        if not 1 <= b <= cfg.budget:
            raise ConfigError(f"proxy budget {b} outside [1, {cfg.budget}]")
    exp = Experiment(cfg, registry)
    oracle_recs = [r for r, _ in exp.oracle_runs() if r.role == "candidate" or (cfg.include_vertices and r.role == "expert")]
    summary = {}
    for b in proxy_budgets:
        proxy = [r for r in exp.proxy_runs(b) if cfg.include_vertices or not r.mixture.is_vertex()]
        summary[int(b)] = correlations(oracle_recs, proxy, exp.suite.names)[AVERAGE]
    if write:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["proxy_budget", "target_budget", "spearman_average"])
        for b, rho in summary.items():
            w.writerow([b, cfg.budget, "" if rho is None else _fmt(rho)])
        _write(Path(cfg.output_dir) / "reports" / "cross_budget.csv", buf.getvalue())
    return summary


def regression_population(exp: Experiment) -> tuple[list, list]:
    """Oracle population (candidates plus full-budget experts) and matching merged proxies."""
    cfg = exp.cfg
    oracle_recs = [r for r, _ in exp.oracle_runs() if r.role != "reference"]
    oracle_recs += [r for r in exp.expert_runs(cfg.budget) if not any(o.mixture.close_to(r.mixture) for o in oracle_recs)]
    proxy = exp.proxy_runs(cfg.budget, with_vertices=True)
    return oracle_recs, proxy


def run_regress_compare(cfg: ExperimentConfig, spec: baselines.RegressorSpec, proto: baselines.ComparisonProtocol,
                        registry: Optional[Registry] = None, write: bool = True) -> baselines.CurveReport:
    exp = Experiment(cfg, registry)
    pop, proxy = regression_population(exp)
    report = baselines.compare_protocol(pop, proxy, spec, proto)
    if write:
        out = Path(cfg.output_dir) / "reports"
        _write(out / f"regress_{spec.name}.csv", report.to_csv())
        _write(out / f"regress_{spec.name}.json", report.manifest_json())
    return report


def report(registry: Registry, queries: Sequence[str], out_dir, proxy_budget: Optional[int] = None) -> list[Path]:
    """Emit CSV/JSON views of a registry. Raises EmptyReport if a query matches nothing."""
    out_dir = Path(out_dir)
    entries = list(registry)
    if not entries:
        raise EmptyReport("registry is empty")
    files = []
    oracle = [e.record for e in entries if e.kind in ("oracle",)]
    proxies = [e.record for e in entries if e.kind == "proxy" and (proxy_budget is None or e.record.budget == proxy_budget)]
    names = sorted({n for e in entries if e.record for n in e.record.scores})
    for q in queries:
        if q == "runs":
            recs = [e.record for e in entries if e.record]
            files.append(_write(out_dir / "runs.csv", scores_csv(recs, names)))
        elif q == "scatter":
            pairs, orphans = [], []
            for p in sorted(proxies, key=lambda r: (r.budget, r.mixture.weights)):
                o = next((r for r in oracle if r.mixture.close_to(p.mixture)), None)
                if o is None:
                    orphans.append(p.mixture)
                else:
                    pairs.append((p, o))
            orphans += [o.mixture for o in oracle if not any(p.mixture.close_to(o.mixture) for p in proxies)]
            if orphans:
                log.warning("unmatched mixtures: %s", ", ".join(m.to_json() for m in orphans))
            if not pairs:
                raise EmptyReport("scatter query matched no (proxy, oracle) pairs")
            files.append(_write(out_dir / "scatter.csv", scatter_csv(pairs)))
        elif q == "accounting":
            counts: dict = {}
            for e in entries:
                counts[e.kind] = counts.get(e.kind, 0) + 1
            files.append(_write(out_dir / "accounting.json", _json(dict(sorted(counts.items())))))
        else:
            raise ConfigError(f"unknown report query {q!r}")
    return files


def run_probe(cfg: ExperimentConfig, center: int = 0, other: int = 1, num_directions: int = 5,
              num_alphas: int = 41, registry: Optional[Registry] = None, write: bool = True):
    """Loss of expert ``center`` on its own benchmark along random directions of the inter-expert length."""
    if not (0 <= center < cfg.k and 0 <= other < cfg.k and center != other):
        raise ConfigError(f"probe needs two distinct experts in [0, {cfg.k})")
    exp = Experiment(cfg, registry)
    experts = exp.experts()
    data = exp.suite.benchmarks[center][1]
    curves = landscape.probe_loss(experts.experts[center], experts.experts[other], data,
                                  num_directions, num_alphas, seed=derive_seed(cfg.seed, "probe", center, other))
    if write:
        out = Path(cfg.output_dir) / "reports"
        _write(out / f"probe_{center}_{other}.csv", landscape.probe_csv(curves))
    return curves


def run_project(cfg: ExperimentConfig, a: int = 0, b: int = 1, registry: Optional[Registry] = None,
                write: bool = True) -> landscape.PlaneProjection:
    """Project mixture-trained models onto the plane through the base and experts a, b.

    Residual norms are recorded per model; nothing forces fine-tuned models to lie in the plane.
    """
    if not (0 <= a < cfg.k and 0 <= b < cfg.k and a != b):
        raise ConfigError(f"projection needs two distinct experts in [0, {cfg.k})")
    exp = Experiment(cfg, registry)
    experts = exp.experts(cfg.budget)
    models = [(r.mixture, p) for r, p in exp.oracle_runs(need_params=True) if r.role != "reference"]
    proj = landscape.project_to_expert_plane(experts.base, experts.experts[a], experts.experts[b], models)
    if write:
        out = Path(cfg.output_dir) / "reports"
        _write(out / f"projection_{a}_{b}.csv", proj.to_csv())
        score = landscape.line_alignment_score(proj) if len(proj.points) >= 3 else None
        _write(out / f"projection_{a}_{b}.json", landscape.manifest_json(
            line_alignment_score=score,
            max_residual_norm=max((p.residual_norm for p in proj.points), default=None),
            models=len(proj.points)))
    return proj


def prune(cfg: ExperimentConfig) -> int:
    """Delete oracle and reference checkpoints; their records stay in the registry."""
    return Registry(cfg.output_dir).prune()
