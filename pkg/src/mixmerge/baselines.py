"""Ridge-regression mixture baselines and the randomized fit-then-rank comparison."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from mixmerge.errors import CapacityError, FactorizationError, NumericError, ParameterError, StructuralError
from mixmerge.errors import UndefinedCorrelationError
from mixmerge.evalx import AVERAGE, RunRecord, spearman
from mixmerge.linalg import spd_solve
from mixmerge.simplex import MixtureWeights


@dataclass(frozen=True)
class RegressorSpec:
    feature_map: str = "quadratic"
    ridge_lambda: float = 1e-6

    def __post_init__(self):
        if self.feature_map not in ("linear", "quadratic"):
            raise ParameterError(f"unknown feature map {self.feature_map!r}")
        if not self.ridge_lambda >= 0.0:
            raise ParameterError("ridge_lambda must be >= 0")

    @property
    def name(self) -> str:
        return f"ridge-{self.feature_map}"

    def num_features(self, k: int) -> int:
        """Non-bias feature count."""
        return k if self.feature_map == "linear" else k + k * (k + 1) // 2


def features(w: np.ndarray, feature_map: str) -> np.ndarray:
    """Raw simplex coordinates, plus all pairwise products w_i w_j (i <= j) when quadratic."""
    w = np.atleast_2d(np.asarray(w, dtype=np.float64))
    if feature_map == "linear":
        return w
    k = w.shape[1]
    iu, ju = np.triu_indices(k)
    return np.hstack([w, w[:, iu] * w[:, ju]])


@dataclass(frozen=True)
class RegressionModel:
    spec: RegressorSpec
    k: int
    coef: np.ndarray
    bias: float

    def predict_many(self, ws: Sequence[MixtureWeights]) -> np.ndarray:
        for w in ws:
            if w.k != self.k:
                raise StructuralError(f"model fit on K={self.k}, got a K={w.k} mixture")
        phi = features(np.array([w.weights for w in ws]), self.spec.feature_map)
        return phi @ self.coef + self.bias


def fit_ridge(runs: Sequence[tuple[MixtureWeights, float]], spec: RegressorSpec) -> RegressionModel:
    """Ridge fit with an unpenalized intercept.

    The intercept is handled by centering, so the solve is
    (Pc^T Pc + lambda I) beta = Pc^T yc. Simplex coordinates sum to one, which
    makes the centered Gram matrix singular at lambda = 0 whenever a bias is fit.
    """
    if len(runs) < 2:
        raise ParameterError("ridge fit needs at least two runs")
    ws = [w for w, _ in runs]
    k = ws[0].k
    if any(w.k != k for w in ws):
        raise StructuralError("all runs must share K")
    y = np.array([float(t) for _, t in runs])
    if not np.all(np.isfinite(y)):
        raise ParameterError("targets must be finite")
    phi = features(np.array([w.weights for w in ws]), spec.feature_map)
    mu, ybar = phi.mean(axis=0), y.mean()
    pc, yc = phi - mu, y - ybar
    gram = pc.T @ pc + spec.ridge_lambda * np.eye(phi.shape[1])
    try:
        coef = spd_solve(gram, pc.T @ yc)
    except FactorizationError as exc:
        raise NumericError(f"normal matrix is singular ({exc}); use ridge_lambda > 0") from exc
    return RegressionModel(spec, k, coef, float(ybar - mu @ coef))


def predict(model: RegressionModel, w: MixtureWeights) -> float:
    return float(model.predict_many([w])[0])


@dataclass(frozen=True)
class ComparisonProtocol:
    eval_set_size: int = 8
    train_sizes: tuple[int, ...] = tuple(range(2, 17))
    trials: int = 100
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "train_sizes", tuple(int(t) for t in self.train_sizes))
        if self.eval_set_size < 2:
            raise ParameterError("evaluation set needs n >= 2")
        if self.trials < 1:
            raise ParameterError("need at least one trial")
        if not self.train_sizes or min(self.train_sizes) < 2:
            raise ParameterError("training sizes must be >= 2")


@dataclass(frozen=True)
class CurvePoint:
    train_size: int
    regressor_mean: float
    regressor_stderr: float
    proxy_mean: float
    proxy_stderr: float


@dataclass(frozen=True)
class CurveReport:
    regressor: str
    points: tuple[CurvePoint, ...]
    regressor_trials: np.ndarray  # trials x len(train_sizes)
    proxy_trials: np.ndarray  # trials
    manifest: dict

    def point(self, t: int) -> CurvePoint:
        for p in self.points:
            if p.train_size == t:
                return p
        raise KeyError(t)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["regressor", "T", "regressor_mean_spearman", "regressor_stderr", "proxy_mean_spearman", "proxy_stderr"])
        for p in self.points:
            w.writerow(
                [self.regressor, p.train_size]
                + [format(v, ".17g") for v in (p.regressor_mean, p.regressor_stderr, p.proxy_mean, p.proxy_stderr)]
            )
        return buf.getvalue()

    def manifest_json(self) -> str:
        return json.dumps(self.manifest, sort_keys=True, indent=1) + "\n"


def _rank_corr(a, b) -> float:
    # a constant prediction carries no ranking information
    try:
        return spearman(a, b)
    except UndefinedCorrelationError:
        return 0.0


def _mean_stderr(x: np.ndarray) -> tuple[float, float]:
    if x.size < 2:
        return float(x.mean()), 0.0
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size))


def compare_protocol(
    all_runs: Sequence[RunRecord],
    proxy_runs: Sequence[RunRecord],
    spec: RegressorSpec,
    proto: ComparisonProtocol,
    target: str = AVERAGE,
) -> CurveReport:
    """Expected held-out Spearman of a ridge regressor fit on T runs, against the merged proxy.

    Within trial r (RNG stream (seed, r)) a held-out set of n runs is drawn,
    then for each T a training set of T runs is drawn from the rest. Proxy and
    regressor are scored on the same held-out set.
    """
    pop = sorted(all_runs, key=lambda r: r.mixture.weights)
    n = proto.eval_set_size
    if len(pop) < n + max(proto.train_sizes):
        raise CapacityError(
            f"population of {len(pop)} runs cannot hold n={n} plus T={max(proto.train_sizes)}"
        )
    proxy_score = []
    for r in pop:
        match = next((p for p in proxy_runs if p.mixture.close_to(r.mixture)), None)
        if match is None:
            raise CapacityError(f"no proxy run for mixture {r.mixture.to_json()}")
        proxy_score.append(match.score(target))
    proxy_score = np.array(proxy_score)
    oracle = np.array([r.score(target) for r in pop])
    mixtures = [r.mixture for r in pop]

    reg = np.zeros((proto.trials, len(proto.train_sizes)))
    prox = np.zeros(proto.trials)
    for trial in range(proto.trials):
        rng = np.random.default_rng([proto.seed, trial])
        held = rng.choice(len(pop), size=n, replace=False)
        rest = np.setdiff1d(np.arange(len(pop)), held)
        prox[trial] = _rank_corr(proxy_score[held], oracle[held])
        for j, t in enumerate(proto.train_sizes):
            fit_idx = rng.choice(rest, size=t, replace=False)
            model = fit_ridge([(mixtures[i], oracle[i]) for i in fit_idx], spec)
            pred = model.predict_many([mixtures[i] for i in held])
            reg[trial, j] = _rank_corr(pred, oracle[held])

    pm, ps = _mean_stderr(prox)
    points = []
    for j, t in enumerate(proto.train_sizes):
        rm, rs = _mean_stderr(reg[:, j])
        points.append(CurvePoint(t, rm, rs, pm, ps))
    manifest = {
        "protocol": asdict(proto),
        "regressor": asdict(spec),
        "population": len(pop),
        "target": target,
        "vertices_in_population": sum(1 for m in mixtures if m.is_vertex()),
        "vertices_allowed_in_eval_set": True,
    }
    return CurveReport(spec.name, tuple(points), reg, prox, manifest)
