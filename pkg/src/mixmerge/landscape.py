"""Loss along random directions around an expert, and projections onto the experts' plane."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from mixmerge.errors import DegenerateError, ParameterError, StructuralError
from mixmerge.params import ParamVector
from mixmerge.quadbed import QuadDomain, quad_loss
from mixmerge.simplex import MixtureWeights
from mixmerge.synth import SampleSet
from mixmerge import train as trainmod


@dataclass(frozen=True)
class ProbeCurve:
    direction_id: int
    alphas: np.ndarray
    losses: np.ndarray
    rescale_norm: float


def probe_alphas(num_alphas: int, radius: float = 2.0) -> np.ndarray:
    """Evenly spaced, exactly symmetric about 0 and containing 0."""
    if num_alphas < 3 or num_alphas % 2 == 0:
        raise ParameterError(f"num_alphas must be odd and >= 3, got {num_alphas}")
    half = num_alphas // 2
    return np.arange(-half, half + 1) * (radius / half)


def _loss_fn(data):
    if isinstance(data, QuadDomain):
        return lambda p: quad_loss(p, data)
    if isinstance(data, SampleSet):
        return lambda p: trainmod.loss(p, data)
    if callable(data):
        return data
    raise StructuralError(f"cannot probe a loss on {type(data).__name__}")


def probe_loss(
    center: ParamVector,
    other_expert: ParamVector,
    data,
    num_directions: int = 5,
    num_alphas: int = 41,
    seed: int = 0,
) -> list[ProbeCurve]:
    """Loss at center + alpha * delta_j for Gaussian directions delta_j.

    Each direction is rescaled to the length ||center - other_expert||.
    ``data`` is a SampleSet (cross-entropy), a QuadDomain, or a callable.
    """
    if num_directions < 1:
        raise ParameterError("need at least one direction")
    alphas = probe_alphas(num_alphas)
    if len(center) != len(other_expert):
        raise StructuralError("center and other expert differ in length")
    scale = float(np.linalg.norm(center.values - other_expert.values))
    if scale == 0.0:
        raise DegenerateError("the two experts coincide; probe scale is zero")
    fn = _loss_fn(data)
    curves = []
    for j in range(num_directions):
        delta = np.random.default_rng([seed, j]).standard_normal(len(center))
        delta = delta / np.linalg.norm(delta) * scale
        losses = np.array([fn(center.with_values(center.values + a * delta)) for a in alphas])
        if not np.all(np.isfinite(losses)):
            raise DegenerateError(f"non-finite loss along direction {j}")
        curves.append(ProbeCurve(j, alphas, losses, scale))
    return curves


def probe_csv(curves: Sequence[ProbeCurve]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["direction_id", "alpha", "loss", "rescale_norm"])
    for c in curves:
        for a, l in zip(c.alphas, c.losses):
            w.writerow([c.direction_id, format(a, ".17g"), format(l, ".17g"), format(c.rescale_norm, ".17g")])
    return buf.getvalue()


@dataclass(frozen=True)
class PlanePoint:
    x: float
    y: float
    residual_norm: float
    mixture: Optional[MixtureWeights]


@dataclass(frozen=True)
class PlaneProjection:
    e1: np.ndarray
    e2: np.ndarray
    origin: ParamVector
    points: tuple[PlanePoint, ...]
    anchor_a: tuple[float, float]
    anchor_b: tuple[float, float]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["series", "x", "y", "residual_norm", "mixture"])
        w.writerow(["expert_a", format(self.anchor_a[0], ".17g"), format(self.anchor_a[1], ".17g"), "0", ""])
        w.writerow(["expert_b", format(self.anchor_b[0], ".17g"), format(self.anchor_b[1], ".17g"), "0", ""])
        for p in self.points:
            w.writerow(
                ["model", format(p.x, ".17g"), format(p.y, ".17g"), format(p.residual_norm, ".17g"),
                 p.mixture.to_json() if p.mixture else ""]
            )
        return buf.getvalue()


def _coords(theta: np.ndarray, base: np.ndarray, e1, e2):
    v = theta - base
    x, y = float(v @ e1), float(v @ e2)
    resid = float(np.linalg.norm(v - x * e1 - y * e2))
    return x, y, resid


def project_to_expert_plane(
    base: ParamVector,
    e_a: ParamVector,
    e_b: ParamVector,
    models: Sequence[tuple[Optional[MixtureWeights], ParamVector]],
) -> PlaneProjection:
    """Coordinates in the orthonormal basis of span{e_a - base, e_b - base}, centered at base."""
    u = e_a.values - base.values
    nu = float(np.linalg.norm(u))
    if nu <= 1e-10:
        raise DegenerateError("expert a coincides with the base model")
    e1 = u / nu
    v = e_b.values - base.values
    r = v - (v @ e1) * e1
    nr = float(np.linalg.norm(r))
    if nr <= 1e-10:
        raise DegenerateError("experts are colinear with the base model; no plane to project on")
    e2 = r / nr
    pts = []
    for mix, theta in models:
        if len(theta) != len(base):
            raise StructuralError("model length differs from base")
        x, y, res = _coords(theta.values, base.values, e1, e2)
        pts.append(PlanePoint(x, y, res, mix))
    ax, ay, _ = _coords(e_a.values, base.values, e1, e2)
    bx, by, _ = _coords(e_b.values, base.values, e1, e2)
    return PlaneProjection(e1, e2, base, tuple(pts), (ax, ay), (bx, by))


def line_alignment_score(projection: PlaneProjection) -> float:
    """RMS distance of projected points to the line through both experts, over the experts' distance."""
    if len(projection.points) < 3:
        raise ParameterError("alignment score needs at least three points")
    a = np.array(projection.anchor_a)
    b = np.array(projection.anchor_b)
    seg = b - a
    length = float(np.linalg.norm(seg))
    if length <= 1e-12:
        raise DegenerateError("expert projections coincide")
    normal = np.array([-seg[1], seg[0]]) / length
    dist = np.array([(np.array([p.x, p.y]) - a) @ normal for p in projection.points])
    return float(math.sqrt(np.mean(dist**2)) / length)


def plot_data(series: dict) -> str:
    """{x, y, series} rows for any plotting tool; ``series`` maps name -> (xs, ys)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x", "y", "series"])
    for name in series:
        xs, ys = series[name]
        for x, y in zip(xs, ys):
            w.writerow([format(float(x), ".17g"), format(float(y), ".17g"), name])
    return buf.getvalue()


def manifest_json(**fields) -> str:
    return json.dumps(fields, sort_keys=True, indent=1, default=str) + "\n"
