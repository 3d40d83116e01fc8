"""Synthetic labeled domains and mixture datasets D_w(N).

Every domain shares the label space but places its class clusters through a
domain-specific rotation and offset, so a classifier tuned on one domain is
only partly right on the others.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from mixmerge.errors import CapacityError, ParameterError, StructuralError
from mixmerge.simplex import MixtureWeights

MODES = ("apportioned", "multinomial")


def random_orthogonal(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed orthogonal matrix: QR of a Gaussian with sign-fixed R diagonal."""
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return q * signs


@dataclass(frozen=True)
class DomainSpec:
    name: str
    input_dim: int
    num_classes: int
    centers: tuple[tuple[float, ...], ...]
    noise_scale: float
    pool_size: int
    rotation_seed: Optional[int] = None
    offset: tuple[float, ...] = ()

    def __post_init__(self):
        centers = tuple(tuple(float(x) for x in row) for row in self.centers)
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "offset", tuple(float(x) for x in self.offset))
        if self.num_classes < 2:
            raise ParameterError(f"{self.name}: num_classes must be >= 2")
        if self.input_dim < 1:
            raise ParameterError(f"{self.name}: input_dim must be >= 1")
        if not self.noise_scale >= 0.0:
            raise ParameterError(f"{self.name}: noise scale must be >= 0")
        if self.pool_size < 1:
            raise ParameterError(f"{self.name}: pool_size must be >= 1")
        if len(centers) != self.num_classes or any(len(c) != self.input_dim for c in centers):
            raise StructuralError(f"{self.name}: centers must be num_classes x input_dim")
        if self.offset and len(self.offset) != self.input_dim:
            raise StructuralError(f"{self.name}: offset must have length input_dim")

    def class_centers(self) -> np.ndarray:
        """Effective cluster centers after the domain rotation and offset."""
        c = np.array(self.centers, dtype=np.float64)
        if self.rotation_seed is not None:
            rot = random_orthogonal(self.input_dim, np.random.default_rng(self.rotation_seed))
            c = c @ rot.T
        if self.offset:
            c = c + np.array(self.offset)
        return c

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "input_dim": self.input_dim,
            "num_classes": self.num_classes,
            "centers": [list(c) for c in self.centers],
            "noise_scale": self.noise_scale,
            "pool_size": self.pool_size,
            "rotation_seed": self.rotation_seed,
            "offset": list(self.offset),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DomainSpec":
        return cls(
            name=d["name"],
            input_dim=int(d["input_dim"]),
            num_classes=int(d["num_classes"]),
            centers=tuple(tuple(c) for c in d["centers"]),
            noise_scale=float(d["noise_scale"]),
            pool_size=int(d["pool_size"]),
            rotation_seed=d.get("rotation_seed"),
            offset=tuple(d.get("offset", ())),
        )


@dataclass(frozen=True, eq=False)
class SampleSet:
    inputs: np.ndarray
    labels: np.ndarray
    domain_tags: np.ndarray
    seed: int = 0
    # (pool domain, row in pool) of every sample, when assembled from pools
    source_ids: Optional[np.ndarray] = field(default=None)

    def __post_init__(self):
        x = np.asarray(self.inputs, dtype=np.float64)
        if x.ndim == 1:
            x = x.reshape(-1, 1)
        y = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        t = np.asarray(self.domain_tags, dtype=np.int64).reshape(-1)
        if not (x.shape[0] == y.shape[0] == t.shape[0]):
            raise StructuralError("inputs, labels and domain tags differ in length")
        for a in (x, y, t):
            a.setflags(write=False)
        object.__setattr__(self, "inputs", x)
        object.__setattr__(self, "labels", y)
        object.__setattr__(self, "domain_tags", t)

    def __len__(self):
        return self.labels.shape[0]

    @property
    def input_dim(self) -> int:
        return self.inputs.shape[1]

    def subset(self, idx) -> "SampleSet":
        src = None if self.source_ids is None else self.source_ids[idx]
        return SampleSet(self.inputs[idx], self.labels[idx], self.domain_tags[idx], self.seed, src)

    def domain_part(self, i: int) -> "SampleSet":
        return self.subset(np.flatnonzero(self.domain_tags == i))

    def identical(self, other: "SampleSet") -> bool:
        return (
            np.array_equal(self.inputs, other.inputs)
            and np.array_equal(self.labels, other.labels)
            and np.array_equal(self.domain_tags, other.domain_tags)
        )


def build_domain_pool(spec: DomainSpec, seed: int, domain_index: int = 0, size: Optional[int] = None) -> SampleSet:
    """Draw labeled samples from the domain's Gaussian class clusters."""
    n = spec.pool_size if size is None else int(size)
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, spec.num_classes, size=n)
    centers = spec.class_centers()
    noise = rng.standard_normal((n, spec.input_dim))
    x = centers[labels] + spec.noise_scale * noise
    tags = np.full(n, domain_index, dtype=np.int64)
    return SampleSet(x, labels, tags, seed, np.stack([tags, np.arange(n)], axis=1))


def apportion(w: MixtureWeights, n: int) -> list[int]:
    """Largest-remainder counts; equal remainders go to the lower domain index."""
    quotas = [wi * n for wi in w.weights]
    counts = [math.floor(q) for q in quotas]
    short = n - sum(counts)
    order = sorted(range(w.k), key=lambda i: (-(quotas[i] - counts[i]), i))
    for i in order[:short]:
        counts[i] += 1
    return counts


def assemble_mixture(
    pools: Sequence[SampleSet],
    w: MixtureWeights,
    n: int,
    seed: int,
    mode: str = "apportioned",
    names: Optional[Sequence[str]] = None,
) -> SampleSet:
    """Draw N distinct samples, about w_i * N from pool i, in a seeded shuffled order."""
    if len(pools) != w.k:
        raise StructuralError(f"{len(pools)} pools for a K={w.k} mixture")
    if n < 1:
        raise ParameterError(f"budget N must be >= 1, got {n}")
    if mode not in MODES:
        raise ParameterError(f"unknown assembly mode {mode!r}; expected one of {MODES}")
    rng = np.random.default_rng(seed)
    if mode == "apportioned":
        counts = apportion(w, n)
    else:
        counts = [int(c) for c in rng.multinomial(n, w.as_array())]
    parts_x, parts_y, parts_src = [], [], []
    for i, (pool, c) in enumerate(zip(pools, counts)):
        if c > len(pool):
            label = names[i] if names else f"domain {i}"
            raise CapacityError(f"{label} exhausted: requested {c} samples, pool holds {len(pool)}")
        if c == 0:
            continue
        rows = rng.choice(len(pool), size=c, replace=False)
        parts_x.append(pool.inputs[rows])
        parts_y.append(pool.labels[rows])
        parts_src.append(np.stack([np.full(c, i, dtype=np.int64), rows.astype(np.int64)], axis=1))
    x = np.concatenate(parts_x)
    y = np.concatenate(parts_y)
    src = np.concatenate(parts_src)
    perm = rng.permutation(n)
    return SampleSet(x[perm], y[perm], src[perm, 0], seed, src[perm])


def make_domain_family(
    k: int,
    input_dim: int = 8,
    num_classes: int = 4,
    pool_size: int = 8000,
    center_radius: float = 2.0,
    noise_scales: Optional[Sequence[float]] = None,
    offset_scale: float = 1.0,
    seed: int = 0,
) -> list[DomainSpec]:
    """K conflicting domains sharing one set of class prototypes.

    Each domain rotates the prototypes with its own orthogonal map and
    shifts them, so experts specialize and cross-domain accuracy drops.
    """
    if k < 1:
        raise ParameterError("need at least one domain")
    rng = np.random.default_rng([seed, 7919])
    protos = rng.standard_normal((num_classes, input_dim))
    protos *= center_radius / np.linalg.norm(protos, axis=1, keepdims=True)
    if noise_scales is None:
        noise_scales = [1.0 + 0.25 * i for i in range(k)]
    if len(noise_scales) != k:
        raise StructuralError("one noise scale per domain")
    specs = []
    for i in range(k):
        offset = offset_scale * rng.standard_normal(input_dim) / math.sqrt(input_dim)
        specs.append(
            DomainSpec(
                name=f"domain{i}",
                input_dim=input_dim,
                num_classes=num_classes,
                centers=tuple(map(tuple, protos)),
                noise_scale=float(noise_scales[i]),
                pool_size=pool_size,
                rotation_seed=int(rng.integers(0, 2**31 - 1)),
                offset=tuple(offset),
            )
        )
    return specs


def write_sample_csv(path, data: SampleSet, manifest: Optional[dict] = None):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([f"f{j}" for j in range(data.input_dim)] + ["label", "domain"])
        for x, y, t in zip(data.inputs, data.labels, data.domain_tags):
            writer.writerow([format(v, ".17g") for v in x] + [int(y), int(t)])
    if manifest is not None:
        path.with_suffix(".json").write_text(json.dumps(manifest, sort_keys=True, indent=1) + "\n")


def read_sample_csv(path, seed: int = 0) -> SampleSet:
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    d = len(header) - 2
    arr = np.array(body, dtype=np.float64).reshape(len(body), d + 2)
    return SampleSet(arr[:, :d], arr[:, d].astype(np.int64), arr[:, d + 1].astype(np.int64), seed)
