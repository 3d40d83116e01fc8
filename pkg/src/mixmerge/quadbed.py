"""Exact quadratic domains, where the Hessian-weighted merge is the true mixture optimum."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from mixmerge.errors import ParameterError, StructuralError
from mixmerge.evalx import spearman
from mixmerge.linalg import cholesky
from mixmerge.params import ExpertSet, ParamVector, merge_hessian_weighted, merge_linear
from mixmerge.simplex import MixtureGrid, MixtureWeights, uniform_mixture
from mixmerge.synth import random_orthogonal

TIE_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class QuadDomain:
    optimum: ParamVector
    hessian: np.ndarray
    base_loss: float = 0.0

    def __post_init__(self):
        h = np.array(self.hessian, dtype=np.float64, copy=True)
        d = len(self.optimum)
        if h.shape != (d, d):
            raise StructuralError(f"Hessian shape {h.shape} does not match dimension {d}")
        if np.max(np.abs(h - h.T)) > 1e-12 * max(1.0, float(np.max(np.abs(h)))):
            raise ParameterError("Hessian must be symmetric")
        if not self.base_loss >= 0.0:
            raise ParameterError("base loss must be >= 0")
        cholesky(h)  # raises unless SPD
        h.setflags(write=False)
        object.__setattr__(self, "hessian", h)

    @property
    def dim(self) -> int:
        return len(self.optimum)


def _vec(theta) -> np.ndarray:
    return theta.values if isinstance(theta, ParamVector) else np.asarray(theta, dtype=np.float64)


def quad_loss(theta, domain: QuadDomain) -> float:
    """l_i + 1/2 (theta - theta_i)^T H_i (theta - theta_i)."""
    t = _vec(theta)
    if t.shape != (domain.dim,):
        raise StructuralError(f"theta has shape {t.shape}, domain dimension is {domain.dim}")
    delta = t - domain.optimum.values
    return float(domain.base_loss + 0.5 * (delta @ (domain.hessian @ delta)))


def quad_mixture_loss(theta, domains: Sequence[QuadDomain], w: MixtureWeights) -> float:
    if len(domains) != w.k:
        raise StructuralError(f"{len(domains)} domains for a K={w.k} mixture")
    return math.fsum(wi * quad_loss(theta, dom) for wi, dom in zip(w.weights, domains))


def quad_mixture_gradient(theta, domains: Sequence[QuadDomain], w: MixtureWeights) -> np.ndarray:
    t = _vec(theta)
    return sum(wi * (dom.hessian @ (t - dom.optimum.values)) for wi, dom in zip(w.weights, domains))


def make_random_testbed(
    k: int,
    d: int,
    condition_cap: float = 10.0,
    expert_spread: float = 1.0,
    seed: int = 0,
    shared_hessian: bool = False,
    base_loss_scale: float = 1.0,
) -> list[QuadDomain]:
    """K quadratic domains with random optima and random SPD Hessians.

    Optima are Gaussian, scaled so pairwise distances are about
    ``expert_spread``. Hessian spectra are uniform in [1, condition_cap],
    conjugated by a random orthogonal matrix; condition_cap = 1 gives H = I.
    ``shared_hessian`` reuses the first domain's Hessian everywhere.
    """
    if k < 2 or d < 2:
        raise ParameterError("testbed needs K >= 2 and d >= 2")
    if not condition_cap >= 1.0:
        raise ParameterError("condition_cap must be >= 1")
    if not expert_spread > 0.0:
        raise ParameterError("expert_spread must be > 0")
    rng = np.random.default_rng(seed)
    domains = []
    shared = None
    for _ in range(k):
        optimum = rng.standard_normal(d) * (expert_spread / math.sqrt(2 * d))
        if condition_cap == 1.0:
            h = np.eye(d)
        else:
            eig = rng.uniform(1.0, condition_cap, size=d)
            q = random_orthogonal(d, rng)
            h = (q * eig) @ q.T
            h = 0.5 * (h + h.T)
        if shared_hessian:
            shared = h if shared is None else shared
            h = shared
        base = base_loss_scale * float(rng.uniform())
        domains.append(QuadDomain(ParamVector(optimum, f"quad/d={d}"), h, base))
    return domains


def expert_set(domains: Sequence[QuadDomain], base: Optional[ParamVector] = None) -> ExpertSet:
    d = domains[0].dim
    base = base if base is not None else ParamVector(np.zeros(d), domains[0].optimum.shape_tag)
    return ExpertSet(base, tuple(dom.optimum for dom in domains))


@dataclass(frozen=True)
class TheoryRow:
    mixture: MixtureWeights
    grad_inf_norm: float
    loss_gap: float
    proxy_loss: float
    oracle_loss: float


@dataclass(frozen=True)
class TheoryReport:
    rows: tuple[TheoryRow, ...]
    spearman: float
    target: MixtureWeights
    seed: Optional[int] = None

    @property
    def max_gap(self) -> float:
        return max(r.loss_gap for r in self.rows)

    @property
    def max_grad(self) -> float:
        return max(r.grad_inf_norm for r in self.rows)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["mixture", "grad_inf_norm", "loss_gap", "proxy_loss", "oracle_loss"])
        for r in self.rows:
            w.writerow(
                [r.mixture.to_json()]
                + [format(v, ".17g") for v in (r.grad_inf_norm, r.loss_gap, r.proxy_loss, r.oracle_loss)]
            )
        return buf.getvalue()

    def summary_json(self) -> str:
        return json.dumps(
            {"spearman": self.spearman, "max_gap": self.max_gap, "max_grad_inf_norm": self.max_grad,
             "target": list(self.target.weights), "seed": self.seed},
            sort_keys=True,
            indent=1,
        ) + "\n"


def theory_check(
    domains: Sequence[QuadDomain],
    grid: MixtureGrid | Sequence[MixtureWeights],
    target: Optional[MixtureWeights] = None,
    seed: Optional[int] = None,
) -> TheoryReport:
    """Compare linear merging with the exact mixture optimum over a set of mixtures.

    Per mixture: gradient inf-norm of the mixture loss at the exact optimum,
    and the loss gap of the linear merge under that mixture's own loss. The
    ranking check scores both models on a fixed ``target`` loss (uniform
    weights by default), as a DMO target benchmark would, and reports the
    Spearman correlation of the negated losses over the grid. Losses equal to
    within 1e-12 relative are ranked as ties: symmetric mixtures can tie
    exactly in real arithmetic and would otherwise be ordered by rounding noise.
    """
    domains = list(domains)
    mixtures = list(grid)
    if not mixtures:
        raise ParameterError("theory check needs a non-empty grid")
    target = target or uniform_mixture(len(domains))
    experts = expert_set(domains)
    rows = []
    for w in mixtures:
        exact = merge_hessian_weighted(domains, w)
        lin = merge_linear(experts, w)
        grad = quad_mixture_gradient(exact, domains, w)
        gap = quad_mixture_loss(lin, domains, w) - quad_mixture_loss(exact, domains, w)
        rows.append(
            TheoryRow(
                mixture=w,
                grad_inf_norm=float(np.max(np.abs(grad))),
                loss_gap=gap,
                proxy_loss=quad_mixture_loss(lin, domains, target),
                oracle_loss=quad_mixture_loss(exact, domains, target),
            )
        )
    if len(rows) >= 2:
        rho = spearman([-r.proxy_loss for r in rows], [-r.oracle_loss for r in rows], tie_tol=TIE_TOL)
    else:
        rho = float("nan")
    return TheoryReport(tuple(rows), rho, target, seed)
