"""Mixture weights on the probability simplex: grids, Dirichlet draws, JSON form."""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from mixmerge.errors import ParameterError, StructuralError

SUM_TOL = 1e-12


@dataclass(frozen=True)
class MixtureWeights:
    """A point w on the simplex. Use :meth:`of` to build from unnormalized values."""

    weights: tuple[float, ...]

    def __post_init__(self):
        w = tuple(float(x) for x in self.weights)
        object.__setattr__(self, "weights", w)
        if len(w) < 1:
            raise ParameterError("mixture needs K >= 1 weights")
        if any(not math.isfinite(x) or x < 0.0 for x in w):
            raise ParameterError(f"mixture weights must be finite and >= 0, got {w}")
        if abs(math.fsum(w) - 1.0) > SUM_TOL:
            raise ParameterError(f"mixture weights sum to {math.fsum(w)!r}, not 1")

    @classmethod
    def of(cls, values: Iterable[float]) -> "MixtureWeights":
        v = [float(x) for x in values]
        if any(not math.isfinite(x) or x < 0.0 for x in v):
            raise ParameterError(f"cannot normalize {v}")
        total = math.fsum(v)
        if total <= 0.0:
            raise ParameterError("cannot normalize an all-zero vector")
        return cls(tuple(x / total for x in v))

    @property
    def k(self) -> int:
        return len(self.weights)

    def as_array(self) -> np.ndarray:
        return np.array(self.weights, dtype=np.float64)

    def is_vertex(self) -> bool:
        return sum(1 for x in self.weights if x > 0.0) == 1

    def close_to(self, other: "MixtureWeights", tol: float = 1e-9) -> bool:
        return self.k == other.k and all(abs(a - b) <= tol for a, b in zip(self.weights, other.weights))

    def to_json(self) -> str:
        return dumps_weights(self.weights)

    def __iter__(self):
        return iter(self.weights)

    def __len__(self):
        return len(self.weights)

    def __getitem__(self, i):
        return self.weights[i]


def dumps_weights(weights: Sequence[float]) -> str:
    # 17 significant digits round-trips any f64
    return "[" + ",".join(format(float(x), ".17g") for x in weights) + "]"


def loads_weights(text: str) -> MixtureWeights:
    return MixtureWeights(tuple(json.loads(text)))


@dataclass(frozen=True)
class MixtureGrid:
    k: int
    step_denominator: int
    include_boundary: bool
    mixtures: tuple[MixtureWeights, ...] = field(default=())

    @property
    def step(self) -> float:
        return 1.0 / self.step_denominator

    def __len__(self):
        return len(self.mixtures)

    def __iter__(self):
        return iter(self.mixtures)

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "step_denominator": self.step_denominator,
            "interior": not self.include_boundary,
            "mixtures": [json.loads(m.to_json()) for m in self.mixtures],
        }

    def to_json(self) -> str:
        mixtures = ",".join(m.to_json() for m in self.mixtures)
        interior = "false" if self.include_boundary else "true"
        return (
            f'{{"k":{self.k},"step_denominator":{self.step_denominator},'
            f'"interior":{interior},"mixtures":[{mixtures}]}}'
        )

    @classmethod
    def from_dict(cls, d: dict) -> "MixtureGrid":
        return cls(
            k=int(d["k"]),
            step_denominator=int(d["step_denominator"]),
            include_boundary=not d["interior"],
            mixtures=tuple(MixtureWeights(tuple(m)) for m in d["mixtures"]),
        )


def compositions(m: int, k: int, minimum: int = 1) -> list[tuple[int, ...]]:
    """All k-tuples of integers >= ``minimum`` summing to m, lexicographic."""
    if k == 1:
        return [(m,)] if m >= minimum else []
    # stars and bars over the shifted problem
    free = m - k * minimum
    if free < 0:
        return []
    out = []
    for bars in itertools.combinations(range(free + k - 1), k - 1):
        parts, prev = [], -1
        for b in bars:
            parts.append(b - prev - 1 + minimum)
            prev = b
        parts.append(free + k - 2 - prev + minimum)
        out.append(tuple(parts))
    out.sort()
    return out


def enumerate_grid(k: int, m: int, include_boundary: bool = False) -> MixtureGrid:
    """Every simplex point whose coordinates are multiples of 1/m.

    The interior grid (the default) keeps only points with all coordinates
    >= 1/m; K=2, m=8 gives 7 mixtures and K=3, m=8 gives 21.
    """
    if k < 1:
        raise ParameterError(f"K must be >= 1, got K={k}")
    if include_boundary:
        if m < 1:
            raise ParameterError(f"m must be >= 1 with boundary, got m={m}")
    elif m < k:
        raise ParameterError(f"interior grid needs m >= K, got m={m} < K={k}")
    comps = compositions(m, k, minimum=0 if include_boundary else 1)
    mixtures = tuple(MixtureWeights(tuple(a / m for a in c)) for c in comps)
    return MixtureGrid(k=k, step_denominator=m, include_boundary=include_boundary, mixtures=mixtures)


def _standard_gamma(rng: np.random.Generator, concentration: float, size) -> np.ndarray:
    if concentration == 1.0:
        # Gamma(1) is Exp(1); 1 - U lies in (0, 1] so the log is finite
        return -np.log1p(-rng.random(size))
    return rng.standard_gamma(concentration, size)


def sample_dirichlet(k: int, count: int, concentration: float = 1.0, seed: int = 0) -> list[MixtureWeights]:
    """Draw ``count`` symmetric Dirichlet mixtures by normalizing Gamma variates."""
    if k < 2:
        raise ParameterError(f"Dirichlet sampling needs K >= 2, got {k}")
    if count < 1:
        raise ParameterError(f"count must be >= 1, got {count}")
    if not (concentration > 0.0 and math.isfinite(concentration)):
        raise ParameterError(f"concentration must be positive, got {concentration}")
    rng = np.random.default_rng(seed)
    draws = []
    for _ in range(count):
        g = _standard_gamma(rng, float(concentration), k)
        while g.sum() <= 0.0:  # only reachable through underflow at tiny concentration
            g = _standard_gamma(rng, float(concentration), k)
        draws.append(MixtureWeights.of(g))
    return draws


def uniform_mixture(k: int) -> MixtureWeights:
    if k < 1:
        raise ParameterError(f"K must be >= 1, got {k}")
    return MixtureWeights.of([1.0] * k)


def vertex(k: int, i: int) -> MixtureWeights:
    if not 0 <= i < k:
        raise StructuralError(f"vertex index {i} out of range for K={k}")
    return MixtureWeights(tuple(1.0 if j == i else 0.0 for j in range(k)))
