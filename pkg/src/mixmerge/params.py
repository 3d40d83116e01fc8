"""Flat parameter vectors, merging operators and the on-disk checkpoint format."""

from __future__ import annotations

import json
import os
import struct
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from mixmerge.errors import NumericError, StructuralError
from mixmerge.linalg import spd_solve
from mixmerge.simplex import MixtureWeights

MAGIC = b"MXFPARAM"
FORMAT_VERSION = 1


@dataclass(frozen=True, eq=False)
class ParamVector:
    values: np.ndarray
    shape_tag: str = "flat"

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64, copy=True).reshape(-1)
        if v.size == 0:
            raise StructuralError("parameter vector must be non-empty")
        if not np.all(np.isfinite(v)):
            raise NumericError("parameter vector contains NaN or Inf")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.size

    def __eq__(self, other):
        if not isinstance(other, ParamVector):
            return NotImplemented
        return self.shape_tag == other.shape_tag and np.array_equal(self.values, other.values)

    def __hash__(self):
        return hash((self.shape_tag, self.values.tobytes()))

    def with_values(self, values) -> "ParamVector":
        return ParamVector(values, self.shape_tag)


@dataclass(frozen=True)
class ExpertSet:
    base: ParamVector
    experts: tuple[ParamVector, ...]
    domain_names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        experts = tuple(self.experts)
        object.__setattr__(self, "experts", experts)
        if len(experts) < 1:
            raise StructuralError("an expert set needs at least one expert")
        names = tuple(self.domain_names) or tuple(f"domain{i}" for i in range(len(experts)))
        if len(names) != len(experts):
            raise StructuralError(f"{len(names)} domain names for {len(experts)} experts")
        object.__setattr__(self, "domain_names", names)
        for e in experts:
            _check_compatible(self.base, e)

    @property
    def k(self) -> int:
        return len(self.experts)


def _check_compatible(a: ParamVector, b: ParamVector):
    if a.shape_tag != b.shape_tag:
        raise StructuralError(f"shape tags differ: {a.shape_tag!r} vs {b.shape_tag!r}")
    if len(a) != len(b):
        raise StructuralError(f"lengths differ: {len(a)} vs {len(b)}")


def weighted_sum(vectors: Sequence[np.ndarray], weights: Sequence[float]) -> np.ndarray:
    """Neumaier-compensated sum of w_i * v_i, vectorized over coordinates."""
    total = np.zeros_like(vectors[0], dtype=np.float64)
    comp = np.zeros_like(total)
    for v, w in zip(vectors, weights):
        term = w * v
        t = total + term
        big = np.abs(total) >= np.abs(term)
        comp += np.where(big, (total - t) + term, (term - t) + total)
        total = t
    return total + comp


def merge_linear(experts: ExpertSet, w: MixtureWeights) -> ParamVector:
    """Merged proxy: the coordinate-wise convex combination sum_i w_i theta_i."""
    if w.k != experts.k:
        raise StructuralError(f"mixture has K={w.k} but there are {experts.k} experts")
    merged = weighted_sum([e.values for e in experts.experts], w.weights)
    if not np.all(np.isfinite(merged)):
        raise NumericError("merged parameters are not finite")
    return ParamVector(merged, experts.experts[0].shape_tag)


def merge_hessian_weighted(domains, w: MixtureWeights) -> ParamVector:
    """Minimizer of sum_i w_i * (l_i + 1/2 (t - t_i)^T H_i (t - t_i)).

    Solves (sum_j w_j H_j) t = sum_i w_i H_i t_i by Cholesky; raises
    FactorizationError (with the pivot index) if the weighted Hessian is not SPD.
    """
    domains = list(domains)
    if len(domains) != w.k:
        raise StructuralError(f"mixture has K={w.k} but there are {len(domains)} domains")
    d = len(domains[0].optimum)
    for dom in domains:
        if len(dom.optimum) != d or dom.hessian.shape != (d, d):
            raise StructuralError("all domains must share the parameter dimension")
    active = [(wi, dom) for wi, dom in zip(w.weights, domains) if wi != 0.0]
    if len(active) == 1 and active[0][0] == 1.0:
        return active[0][1].optimum
    lhs = sum(wi * dom.hessian for wi, dom in active)
    rhs = weighted_sum([dom.hessian @ dom.optimum.values for _, dom in active], [wi for wi, _ in active])
    theta = spd_solve(lhs, rhs)
    if not np.all(np.isfinite(theta)):
        raise NumericError("Hessian-weighted merge produced non-finite values")
    return ParamVector(theta, domains[0].optimum.shape_tag)


def l2_distance(a: ParamVector, b: ParamVector) -> float:
    if len(a) != len(b):
        raise StructuralError(f"lengths differ: {len(a)} vs {len(b)}")
    return float(np.linalg.norm(a.values - b.values))


def _atomic_write(path: Path, payload: bytes):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def encode_params(p: ParamVector) -> bytes:
    tag = p.shape_tag.encode("utf-8")
    header = MAGIC + struct.pack("<II", FORMAT_VERSION, len(tag)) + tag + struct.pack("<Q", len(p))
    return header + p.values.astype("<f8").tobytes()


def decode_params(blob: bytes) -> ParamVector:
    if blob[:8] != MAGIC:
        raise StructuralError("not a parameter file (bad magic)")
    version, tag_len = struct.unpack_from("<II", blob, 8)
    if version != FORMAT_VERSION:
        raise StructuralError(f"unsupported parameter file version {version}")
    off = 16
    tag = blob[off : off + tag_len].decode("utf-8")
    off += tag_len
    (count,) = struct.unpack_from("<Q", blob, off)
    off += 8
    if len(blob) - off != 8 * count:
        raise StructuralError(f"parameter file truncated: expected {count} values")
    values = np.frombuffer(blob, dtype="<f8", count=count, offset=off)
    return ParamVector(values.astype(np.float64), tag)


def save_params(path, p: ParamVector, provenance: dict | None = None):
    """Write the binary checkpoint and, if given, a ``<path>.json`` provenance sidecar."""
    path = Path(path)
    _atomic_write(path, encode_params(p))
    if provenance is not None:
        text = json.dumps(provenance, sort_keys=True, indent=1) + "\n"
        _atomic_write(path.with_name(path.name + ".json"), text.encode("utf-8"))


def load_params(path) -> ParamVector:
    return decode_params(Path(path).read_bytes())


def load_provenance(path) -> dict:
    path = Path(path)
    return json.loads(path.with_name(path.name + ".json").read_text())
