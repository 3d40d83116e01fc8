"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -s`` or ``python tests/test_acceptance.py``.
"""

import dataclasses
import math
import time
from pathlib import Path

import numpy as np
import pytest

from mixmerge.baselines import ComparisonProtocol, RegressorSpec, compare_protocol
from mixmerge.evalx import AVERAGE, RunRecord, average_ranks, spearman
from mixmerge.landscape import line_alignment_score, probe_loss, project_to_expert_plane
from mixmerge.params import ParamVector, merge_hessian_weighted, merge_linear
from mixmerge.pipeline import (
    Experiment,
    ExperimentConfig,
    regression_population,
    run_cross_budget,
    run_dmo_via_merging,
    run_project,
)
from mixmerge.quadbed import (
    QuadDomain,
    expert_set,
    make_random_testbed,
    quad_mixture_gradient,
    quad_mixture_loss,
    theory_check,
)
from mixmerge.simplex import MixtureWeights, enumerate_grid
from mixmerge.synth import assemble_mixture, build_domain_pool, make_domain_family
from mixmerge.train import ModelConfig, TrainConfig, grad_check, init_model, loss, lr_at

DESK_SEEDS = range(5)
CROSS_SEEDS = range(10)


def verdict(capsys, cid, ok, detail):
    with capsys.disabled():
        print(f"\n[{'PASS' if ok else 'FAIL'}] {cid}: {detail}")
    assert ok, f"{cid}: {detail}"


def quad_testbeds(shared):
    """50 testbeds cycling K in {2,3,4} and d in {4,16,64}."""
    out = []
    for i in range(50):
        k = (2, 3, 4)[i % 3]
        d = (4, 16, 64)[(i // 3) % 3]
        out.append(make_random_testbed(k, d, condition_cap=10.0, seed=1000 + i, shared_hessian=shared))
    return out


@pytest.fixture(scope="module")
def desk_root(tmp_path_factory):
    return tmp_path_factory.mktemp("desk")


def desk_cfg(root, seed):
    return ExperimentConfig(seed=seed, output_dir=str(Path(root) / f"seed{seed}"))


@pytest.fixture(scope="module")
def desk_results(desk_root):
    start = time.perf_counter()
    results = {s: run_dmo_via_merging(desk_cfg(desk_root, s), oracle=True) for s in DESK_SEEDS}
    return results, time.perf_counter() - start


def test_c1_grid_cardinalities(capsys):
    start = time.perf_counter()
    n2, n3 = len(enumerate_grid(2, 8)), len(enumerate_grid(3, 8))
    mismatches = [(k, m) for k in range(1, 7) for m in range(k, 13) if len(enumerate_grid(k, m)) != math.comb(m - 1, k - 1)]
    elapsed = time.perf_counter() - start
    ok = n2 == 7 and n3 == 21 and not mismatches and elapsed < 1.0
    verdict(capsys, "C1 grid cardinalities", ok,
            f"K=2,m=8 -> {n2}; K=3,m=8 -> {n3}; binomial mismatches {mismatches}; {elapsed:.3f}s")


def test_c2_uniform_hessian_exactness(capsys):
    start = time.perf_counter()
    worst_merge = worst_gap = 0.0
    rhos = []
    for doms in quad_testbeds(shared=True):
        k = len(doms)
        grid = enumerate_grid(k, 8)
        experts = expert_set(doms)
        for w in grid:
            diff = merge_linear(experts, w).values - merge_hessian_weighted(doms, w).values
            worst_merge = max(worst_merge, float(np.max(np.abs(diff))))
        rep = theory_check(doms, grid)
        worst_gap = max(worst_gap, rep.max_gap)
        rhos.append(rep.spearman)
    elapsed = time.perf_counter() - start
    ok = worst_merge <= 1e-9 and worst_gap <= 1e-10 and all(r == 1.0 for r in rhos) and elapsed < 10.0
    verdict(capsys, "C2 equal-Hessian exactness", ok,
            f"max |lin - exact| {worst_merge:.2e}, max gap {worst_gap:.2e}, "
            f"Spearman==1 on {sum(r == 1.0 for r in rhos)}/50; {elapsed:.2f}s")


def test_c3_closed_form_optimality(capsys):
    start = time.perf_counter()
    rng = np.random.default_rng(7)
    worst_grad, violations, probes = 0.0, 0, 0
    for doms in quad_testbeds(shared=False):
        k, d = len(doms), doms[0].dim
        hs = np.stack([x.hessian for x in doms])
        opts = np.stack([x.optimum.values for x in doms])
        bases = np.array([x.base_loss for x in doms])
        for w in enumerate_grid(k, 8):
            theta = merge_hessian_weighted(doms, w).values
            worst_grad = max(worst_grad, float(np.max(np.abs(quad_mixture_gradient(theta, doms, w)))))
            steps = rng.standard_normal((100, d))
            pts = theta + 1e-3 * steps / np.linalg.norm(steps, axis=1, keepdims=True)
            # vectorized mixture loss at all 100 probes
            delta = pts[:, None, :] - opts[None, :, :]
            quad = 0.5 * np.einsum("pki,kij,pkj->pk", delta, hs, delta)
            vals = (quad + bases) @ np.array(w.weights)
            center = quad_mixture_loss(theta, doms, w)
            violations += int(np.sum(vals < center))
            probes += 100
    elapsed = time.perf_counter() - start
    ok = worst_grad <= 1e-8 and violations == 0 and elapsed < 30.0
    verdict(capsys, "C3 closed-form optimality", ok,
            f"max grad inf-norm {worst_grad:.2e}, {violations} lower-loss probes of {probes}; {elapsed:.2f}s")


def test_c4_trainer_validity(capsys):
    rng = np.random.default_rng(3)
    specs = make_domain_family(3, input_dim=6, num_classes=4, pool_size=600, seed=2)
    pools = [build_domain_pool(s, seed=i, domain_index=i) for i, s in enumerate(specs)]
    data = assemble_mixture(pools, MixtureWeights.of([2, 3, 5]), 500, seed=4)
    errs = {}
    for cfg in (ModelConfig(input_dim=6, num_classes=4, init_seed=1, init_scale=1.0),
                ModelConfig("one-hidden-layer-mlp", 6, 4, 10, init_seed=1, init_scale=1.0)):
        errs[cfg.architecture] = grad_check(init_model(cfg), data.subset(np.arange(100)), num_coords=60).max_relative_error
    worst_identity = 0.0
    for s in range(20):
        model = init_model(ModelConfig(input_dim=6, num_classes=4, init_seed=s, init_scale=float(rng.uniform(0.5, 3))))
        parts = [data.domain_part(i) for i in range(3)]
        combo = math.fsum(len(p) / len(data) * loss(model, p) for p in parts)
        full = loss(model, data)
        worst_identity = max(worst_identity, abs(full - combo) / abs(full))
    sched_err = 0.0
    for total, frac in ((100, 0.1), (469, 0.1), (37, 0.3)):
        cfg = TrainConfig(peak_lr=0.05, warmup_fraction=frac)
        warm = max(1, round(frac * total))
        for s in range(total):
            ref = 0.05 * (s + 1) / warm if s < warm else \
                0.05 * 0.5 * (1 + math.cos(math.pi * (s - warm + 1) / (total - warm)))
            sched_err = max(sched_err, abs(lr_at(s, total, cfg) - ref))
    ok = max(errs.values()) <= 1e-4 and worst_identity <= 1e-10 and sched_err <= 1e-15
    verdict(capsys, "C4 trainer validity", ok,
            f"grad-check rel err {', '.join(f'{k} {v:.1e}' for k, v in errs.items())}; "
            f"mixture-loss identity {worst_identity:.1e}; schedule max err {sched_err:.1e}")


def test_c5_spearman_unit(capsys):
    rng = np.random.default_rng(0)
    x = rng.standard_normal(30)
    ident = spearman(x, x) == 1.0 and spearman(x, -x) == -1.0
    case = spearman([1, 2, 3, 4, 5], [1, 3, 2, 5, 4])
    worst = 0.0
    checked = 0
    for _ in range(1000):
        n = int(rng.integers(3, 30))
        a = rng.integers(0, 7, n).astype(float)
        b = rng.integers(0, 7, n).astype(float)
        ra = np.array([np.sum(a < v) + (np.sum(a == v) + 1) / 2 for v in a])
        rb = np.array([np.sum(b < v) + (np.sum(b == v) + 1) / 2 for v in b])
        worst = max(worst, float(np.max(np.abs(average_ranks(a) - ra))))
        if np.ptp(a) and np.ptp(b):
            worst = max(worst, abs(spearman(a, b) - np.corrcoef(ra, rb)[0, 1]))
            checked += 1
    ok = ident and abs(case - 0.8) <= 1e-15 and worst <= 1e-12
    verdict(capsys, "C5 Spearman unit", ok,
            f"identities {ident}; (1..5)/(1,3,2,5,4) -> {case!r}; tie oracle max err {worst:.1e} over {checked} pairs")


def test_c6_desk_correlation(capsys, desk_results):
    results, elapsed = desk_results
    rhos = [results[s].correlation["average"] for s in DESK_SEEDS]
    ok = float(np.mean(rhos)) >= 0.5 and elapsed < 300
    verdict(capsys, "C6 desk-scale correlation", ok,
            f"mean Spearman {np.mean(rhos):.3f} (per seed {', '.join(f'{r:.3f}' for r in rhos)}); "
            f"5 seeds in {elapsed:.1f}s")


def test_c7_selection_quality(capsys, desk_results):
    results, _ = desk_results
    wins = 0
    detail = []
    accounting_ok = True
    for s in DESK_SEEDS:
        row = results[s].selection.row(AVERAGE)
        wins += row.regret <= row.best - row.median
        detail.append(f"{row.regret:.4f}<={row.best - row.median:.4f}")
        acc = results[s].accounting
        accounting_ok &= acc.get("expert") == 3 and acc.get("oracle") == 21
    ok = wins >= 4 and accounting_ok
    verdict(capsys, "C7 selection quality", ok,
            f"regret <= Best-Median on {wins}/5 ({'; '.join(detail)}); "
            f"runs expert=3 oracle=21: {accounting_ok} (plus uniform reference and shared base, tallied apart)")


def test_c8_cross_budget_ordering(capsys, desk_root):
    half, tenth, wins = [], [], 0
    for s in CROSS_SEEDS:
        cfg = desk_cfg(desk_root, s)
        summary = run_cross_budget(cfg, [cfg.budget // 2, cfg.budget // 10])
        a, b = summary[cfg.budget // 2], summary[cfg.budget // 10]
        half.append(a)
        tenth.append(b)
        wins += a >= b
    ok = wins >= 7 and np.mean(half) >= np.mean(tenth)
    verdict(capsys, "C8 cross-budget ordering", ok,
            f"N/2 >= N/10 on {wins}/10 seeds; mean Spearman N/2 {np.mean(half):.3f} vs N/10 {np.mean(tenth):.3f}")


def test_c9_regression_comparison(capsys, desk_root, desk_results):
    k = 3
    grid = list(enumerate_grid(3, 8)) + [MixtureWeights(tuple(float(i == j) for j in range(3))) for i in range(3)]
    coef = np.array([0.4, -1.1, 2.0])
    oracle = [RunRecord(w, "trained", 1, {}, float(coef @ w.as_array()) + 0.3, 0) for w in grid]
    proxy = [dataclasses.replace(r, provenance="merged-proxy") for r in oracle]
    synth = compare_protocol(oracle, proxy, RegressorSpec("linear", 1e-10), ComparisonProtocol(8, range(2, 17), 100, 0))
    synth_ok = all(p.regressor_mean >= 0.999 for p in synth.points if p.train_size >= k + 1)

    exp = Experiment(desk_cfg(desk_root, 0))
    pop, prox = regression_population(exp)
    curves = {}
    for fmap in ("quadratic", "linear"):
        rep = compare_protocol(pop, prox, RegressorSpec(fmap), ComparisonProtocol(8, range(2, 17), 100, 0))
        curves[fmap] = rep
        path = Path(exp.cfg.output_dir) / "reports" / f"acceptance_regress_{fmap}.csv"
        path.write_text(rep.to_csv())
    at3 = curves["quadratic"].point(3)
    ok = synth_ok and len(pop) == 24 and at3.proxy_mean >= at3.regressor_mean
    curve = " ".join(f"T{p.train_size}:{p.regressor_mean:.2f}" for p in curves["quadratic"].points)
    verdict(capsys, "C9 regression comparison", ok,
            f"noiseless linear reaches >=0.999 for T>=K+1: {synth_ok}; population {len(pop)}; "
            f"proxy {at3.proxy_mean:.3f} vs ridge-quadratic {at3.regressor_mean:.3f} at T=3 "
            f"(ridge-linear {curves['linear'].point(3).regressor_mean:.3f}); curve {curve}")


def test_c10_landscape(capsys, tmp_path):
    rng = np.random.default_rng(5)
    center = ParamVector(rng.standard_normal(12))
    other = ParamVector(rng.standard_normal(12))
    dom = QuadDomain(center, np.eye(12), base_loss=0.7)
    par_err = 0.0
    n_alpha = 0
    for c in probe_loss(center, other, dom):
        par_err = max(par_err, float(np.max(np.abs(c.losses - (0.7 + 0.5 * c.alphas**2 * c.rescale_norm**2)))))
        n_alpha = len(c.alphas)
    base, a, b = (ParamVector(rng.standard_normal(20)) for _ in range(3))
    models = [(None, ParamVector(rng.standard_normal(20) * 2)) for _ in range(50)]
    proj = project_to_expert_plane(base, a, b, models)
    pyth = max(abs(p.residual_norm**2 + p.x**2 + p.y**2 - np.sum((t.values - base.values) ** 2))
               / np.sum((t.values - base.values) ** 2) for (_, t), p in zip(models, proj.points))
    doms = make_random_testbed(2, 16, condition_cap=10, seed=3, shared_hessian=True)
    ex = expert_set(doms, base=ParamVector(rng.standard_normal(16) * 0.1, doms[0].optimum.shape_tag))
    qproj = project_to_expert_plane(ex.base, ex.experts[0], ex.experts[1],
                                    [(w, merge_hessian_weighted(doms, w)) for w in enumerate_grid(2, 8)])
    align = line_alignment_score(qproj)
    trained = run_project(ExperimentConfig(k=2, output_dir=str(tmp_path / "proj")))
    resid = [p.residual_norm for p in trained.points]
    emitted = (tmp_path / "proj" / "reports" / "projection_0_1.csv").exists() and len(resid) == 7
    ok = n_alpha == 41 and par_err <= 1e-10 and pyth <= 1e-10 and align <= 1e-8 and emitted
    verdict(capsys, "C10 landscape", ok,
            f"parabola max err {par_err:.1e} over {n_alpha} alphas; Pythagoras rel err {pyth:.1e}; "
            f"shared-Hessian alignment {align:.1e}; trained 2-domain projection of {len(resid)} models, "
            f"residual norms {min(resid):.3f}..{max(resid):.3f}, alignment {line_alignment_score(trained):.3f} (measured)")


def reports_of(root):
    return {p.name: p.read_bytes() for p in sorted((Path(root) / "reports").glob("*"))}


def test_c11_determinism_and_resume(capsys, tmp_path, desk_root, desk_results):
    reference = reports_of(Path(desk_root) / "seed0")
    reference = {k: v for k, v in reference.items() if not k.startswith("acceptance_") and not k.startswith("cross")}
    rerun_cfg = ExperimentConfig(seed=0, output_dir=str(tmp_path / "rerun"))
    run_dmo_via_merging(rerun_cfg, oracle=True)
    rerun_same = reports_of(tmp_path / "rerun") == reference

    # interrupt after the experts and part of the oracle grid, with a torn registry line
    cfg = ExperimentConfig(seed=0, output_dir=str(tmp_path / "resume"))
    exp = Experiment(cfg)
    exp.experts()
    exp.proxy_runs()
    from mixmerge.pipeline import _Job

    half = [_Job(exp.key("oracle", w, cfg.budget), "oracle", w, cfg.budget, "candidate") for w in exp.candidates()[:10]]
    exp._run_jobs(half, need_params=False)
    with open(exp.registry.path, "a") as fh:
        fh.write('{"key": "torn-by-interrupt", "ki')
    resumed = run_dmo_via_merging(cfg, oracle=True)
    resume_same = reports_of(tmp_path / "resume") == reference
    ok = rerun_same and resume_same and resumed.trained_now == 11 + 1
    verdict(capsys, "C11 determinism and resume", ok,
            f"rerun byte-identical {rerun_same}; resume byte-identical {resume_same} "
            f"({len(reference)} report files, {resumed.trained_now} runs trained on resume)")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-s", "-q"]))
