"""Accuracy on benchmark suites, Spearman rank correlation and selection-quality tables."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Mapping, NamedTuple, Optional, Sequence

import numpy as np

from mixmerge.errors import AbsenceError, PairingError, StructuralError, UndefinedCorrelationError
from mixmerge.params import ParamVector
from mixmerge.simplex import MixtureWeights, uniform_mixture
from mixmerge.synth import SampleSet
from mixmerge.train import logits, parse_shape_tag

AVERAGE = "average"
PROVENANCES = ("trained", "merged-proxy")


@dataclass(frozen=True)
class BenchmarkSuite:
    benchmarks: tuple[tuple[str, SampleSet], ...]
    weights: Optional[tuple[float, ...]] = None

    def __post_init__(self):
        object.__setattr__(self, "benchmarks", tuple(self.benchmarks))
        names = self.names
        if len(set(names)) != len(names):
            raise StructuralError(f"benchmark names must be unique: {names}")
        if AVERAGE in names:
            raise StructuralError(f"{AVERAGE!r} is reserved for the suite mean")
        if self.weights is not None and len(self.weights) != len(names):
            raise StructuralError("one averaging weight per benchmark")

    @property
    def names(self) -> list[str]:
        return [name for name, _ in self.benchmarks]

    def average(self, scores: Mapping[str, float]) -> float:
        vals = [scores[n] for n in self.names]
        if self.weights is None:
            return math.fsum(vals) / len(vals)
        return math.fsum(w * v for w, v in zip(self.weights, vals)) / math.fsum(self.weights)


class Evaluation(NamedTuple):
    scores: dict
    average: float


def predict(model: ParamVector, x: np.ndarray) -> np.ndarray:
    # np.argmax returns the first maximum, i.e. ties go to the lowest class index
    return np.argmax(logits(model, x), axis=1)


def accuracy(model: ParamVector, data: SampleSet) -> float:
    lay = parse_shape_tag(model.shape_tag)
    if data.input_dim != lay.input_dim:
        raise StructuralError(f"benchmark has {data.input_dim} features, model expects {lay.input_dim}")
    if len(data) == 0:
        raise StructuralError("empty benchmark")
    return float(np.count_nonzero(predict(model, data.inputs) == data.labels)) / len(data)


def evaluate(model: ParamVector, suite: BenchmarkSuite) -> Evaluation:
    scores = {name: accuracy(model, data) for name, data in suite.benchmarks}
    return Evaluation(scores, suite.average(scores))


@dataclass(frozen=True)
class RunRecord:
    mixture: MixtureWeights
    provenance: str
    budget: int
    scores: Mapping[str, float]
    average: float
    seed: int
    # "candidate", "expert" or "reference" (the uniform run outside the candidate set)
    role: str = "candidate"
    extra: Mapping = field(default_factory=dict)

    def __post_init__(self):
        if self.provenance not in PROVENANCES:
            raise StructuralError(f"unknown provenance {self.provenance!r}")

    def score(self, target: str) -> float:
        return self.average if target == AVERAGE else self.scores[target]

    def to_dict(self) -> dict:
        return {
            "mixture": list(self.mixture.weights),
            "provenance": self.provenance,
            "budget": self.budget,
            "scores": dict(sorted(self.scores.items())),
            "average": self.average,
            "seed": self.seed,
            "role": self.role,
            "extra": dict(self.extra),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunRecord":
        return cls(
            mixture=MixtureWeights(tuple(d["mixture"])),
            provenance=d["provenance"],
            budget=int(d["budget"]),
            scores=dict(d["scores"]),
            average=float(d["average"]),
            seed=int(d["seed"]),
            role=d.get("role", "candidate"),
            extra=d.get("extra", {}),
        )


def average_ranks(x: Sequence[float], tie_tol: float = 0.0) -> np.ndarray:
    """1-based ranks; tied values share the mean of the positions they occupy.

    With ``tie_tol`` > 0, sorted neighbours closer than tie_tol * max|x| count
    as tied, so values equal up to rounding noise share a rank.
    """
    x = np.asarray(x, dtype=np.float64)
    order = np.argsort(x, kind="mergesort")
    sorted_x = x[order]
    gap = tie_tol * float(np.max(np.abs(x))) if len(x) else 0.0
    ranks = np.empty(len(x))
    i = 0
    while i < len(x):
        j = i
        while j + 1 < len(x) and sorted_x[j + 1] - sorted_x[j] <= gap:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def pearson(a: np.ndarray, b: np.ndarray) -> float:
    da = a - a.mean()
    db = b - b.mean()
    va, vb = float(da @ da), float(db @ db)
    if va == 0.0 or vb == 0.0:
        raise UndefinedCorrelationError("correlation undefined: a vector has zero variance")
    return float(min(1.0, max(-1.0, (da @ db) / math.sqrt(va * vb))))


def spearman(x: Sequence[float], y: Sequence[float], tie_tol: float = 0.0) -> float:
    """Pearson correlation of average ranks (see :func:`average_ranks` for ``tie_tol``)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise StructuralError(f"spearman needs two equal-length vectors, got {x.shape} and {y.shape}")
    if len(x) < 2:
        raise StructuralError("spearman needs at least two points")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise StructuralError("spearman inputs must be finite")
    return pearson(average_ranks(x, tie_tol), average_ranks(y, tie_tol))


@dataclass(frozen=True)
class SelectionRow:
    target: str
    uniform: float
    median: float
    selected: float
    best: float
    selected_mixture: MixtureWeights

    @property
    def regret(self) -> float:
        return self.best - self.selected


@dataclass(frozen=True)
class SelectionReport:
    rows: tuple[SelectionRow, ...]
    candidates: tuple[MixtureWeights, ...]

    def row(self, target: str) -> SelectionRow:
        for r in self.rows:
            if r.target == target:
                return r
        raise KeyError(target)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["target", "uniform", "median", "selected", "best", "regret", "selected_mixture"])
        for r in self.rows:
            w.writerow(
                [r.target]
                + [format(v, ".17g") for v in (r.uniform, r.median, r.selected, r.best, r.regret)]
                + [r.selected_mixture.to_json()]
            )
        return buf.getvalue()


def _find(runs, mixture, tol=1e-9):
    for r in runs:
        if r.mixture.close_to(mixture, tol):
            return r
    return None


def selection_table(
    oracle_runs: Sequence[RunRecord],
    proxy_runs: Sequence[RunRecord],
    targets: Sequence[str],
    include_vertices: bool = False,
) -> SelectionReport:
    """Uniform / Median / Selected / Best oracle scores per target.

    Candidates are the proxy-run mixtures (vertex mixtures only with
    ``include_vertices``). An oracle run at the uniform mixture must exist; it
    may sit outside the candidate set.
    """
    if any(r.provenance != "trained" for r in oracle_runs):
        raise StructuralError("oracle runs must be trained runs")
    if any(r.provenance != "merged-proxy" for r in proxy_runs):
        raise StructuralError("proxy runs must be merged-proxy runs")
    if not proxy_runs:
        raise PairingError("no proxy runs")
    k = proxy_runs[0].mixture.k
    uni = uniform_mixture(k)
    proxies = [r for r in proxy_runs if include_vertices or not r.mixture.is_vertex()]
    oracles = [r for r in oracle_runs if include_vertices or not r.mixture.is_vertex()]
    unmatched = [r.mixture for r in proxies if _find(oracles, r.mixture) is None]
    unmatched += [
        r.mixture for r in oracles if _find(proxies, r.mixture) is None and not r.mixture.close_to(uni)
    ]
    if unmatched:
        listing = ", ".join(m.to_json() for m in unmatched)
        raise PairingError(f"oracle and proxy runs cover different mixtures: {listing}", unmatched)
    uniform_run = _find(oracle_runs, uni)
    if uniform_run is None:
        raise AbsenceError("no oracle run at the uniform mixture", [uni])
    pairs = sorted(((p, _find(oracles, p.mixture)) for p in proxies), key=lambda pq: pq[0].mixture.weights)
    rows = []
    for t in targets:
        oracle_scores = np.array([o.score(t) for _, o in pairs])
        proxy_scores = [p.score(t) for p, _ in pairs]
        # first maximum in lexicographic mixture order
        pick = int(np.argmax(proxy_scores))
        rows.append(
            SelectionRow(
                target=t,
                uniform=uniform_run.score(t),
                median=float(np.median(oracle_scores)),
                selected=float(oracle_scores[pick]),
                best=float(oracle_scores.max()),
                selected_mixture=pairs[pick][0].mixture,
            )
        )
    return SelectionReport(tuple(rows), tuple(p.mixture for p, _ in pairs))


def regret(report: SelectionReport, target: str) -> float:
    return report.row(target).regret


def argmax_mixture(runs: Sequence[RunRecord], target: str = AVERAGE) -> MixtureWeights:
    """Proxy selection: highest score, lexicographically smallest mixture on ties."""
    ordered = sorted(runs, key=lambda r: r.mixture.weights)
    scores = [r.score(target) for r in ordered]
    return ordered[int(np.argmax(scores))].mixture
