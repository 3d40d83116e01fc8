"""Desk-scale classifiers and the optimizer loop that produces experts and mixture-trained models."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from mixmerge.errors import DivergenceError, NumericError, ParameterError, StructuralError
from mixmerge.params import ParamVector
from mixmerge.synth import SampleSet

ARCHITECTURES = ("softmax-linear", "one-hidden-layer-mlp")


@dataclass(frozen=True)
class ModelConfig:
    architecture: str = "softmax-linear"
    input_dim: int = 8
    num_classes: int = 4
    hidden_dim: int = 0
    init_seed: int = 0
    init_scale: float = 0.01

    def __post_init__(self):
        if self.architecture not in ARCHITECTURES:
            raise ParameterError(f"unknown architecture {self.architecture!r}")
        if self.input_dim < 1 or self.num_classes < 2:
            raise ParameterError("input_dim must be >= 1 and num_classes >= 2")
        if self.architecture == "one-hidden-layer-mlp" and self.hidden_dim < 1:
            raise ParameterError("mlp needs hidden_dim >= 1")

    @property
    def shape_tag(self) -> str:
        if self.architecture == "softmax-linear":
            return f"softmax-linear/d={self.input_dim}/c={self.num_classes}"
        return f"mlp/d={self.input_dim}/h={self.hidden_dim}/c={self.num_classes}"


@dataclass(frozen=True)
class TrainConfig:
    peak_lr: float = 0.05
    warmup_fraction: float = 0.1
    schedule: str = "cosine"
    batch_size: int = 64
    epochs: int = 5
    weight_decay: float = 0.01
    optimizer: str = "adamw"
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    log_interval: int = 50

    def __post_init__(self):
        if not self.peak_lr >= 0.0:
            raise ParameterError("peak_lr must be >= 0")
        if not 0.0 <= self.warmup_fraction <= 1.0:
            raise ParameterError("warmup_fraction must lie in [0, 1]")
        if self.schedule not in ("cosine", "constant"):
            raise ParameterError(f"unknown schedule {self.schedule!r}")
        if self.optimizer not in ("adamw", "sgd"):
            raise ParameterError(f"unknown optimizer {self.optimizer!r}")
        if self.batch_size < 1 or self.epochs < 1:
            raise ParameterError("batch_size and epochs must be >= 1")
        if self.weight_decay < 0.0:
            raise ParameterError("weight_decay must be >= 0")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Layout:
    architecture: str
    input_dim: int
    num_classes: int
    hidden_dim: int = 0

    @property
    def size(self) -> int:
        d, c, h = self.input_dim, self.num_classes, self.hidden_dim
        if self.architecture == "softmax-linear":
            return d * c + c
        return h * d + h + c * h + c


def parse_shape_tag(tag: str) -> Layout:
    head, *fields = tag.split("/")
    kv = dict(f.split("=") for f in fields)
    try:
        if head == "softmax-linear":
            return Layout("softmax-linear", int(kv["d"]), int(kv["c"]))
        if head == "mlp":
            return Layout("one-hidden-layer-mlp", int(kv["d"]), int(kv["c"]), int(kv["h"]))
    except KeyError:
        pass
    raise StructuralError(f"unrecognized shape tag {tag!r}")


def _unpack(theta: np.ndarray, lay: Layout):
    d, c, h = lay.input_dim, lay.num_classes, lay.hidden_dim
    if lay.architecture == "softmax-linear":
        return theta[: c * d].reshape(c, d), theta[c * d :]
    o = 0
    w1 = theta[o : o + h * d].reshape(h, d)
    o += h * d
    b1 = theta[o : o + h]
    o += h
    w2 = theta[o : o + c * h].reshape(c, h)
    o += c * h
    return w1, b1, w2, theta[o : o + c]


def init_model(cfg: ModelConfig) -> ParamVector:
    """Gaussian weights scaled by init_scale / sqrt(fan_in); biases start at zero."""
    rng = np.random.default_rng(cfg.init_seed)
    lay = parse_shape_tag(cfg.shape_tag)
    theta = np.zeros(lay.size)
    if lay.architecture == "softmax-linear":
        w, _ = _unpack(theta, lay)
        w[:] = rng.standard_normal(w.shape) * (cfg.init_scale / math.sqrt(lay.input_dim))
    else:
        w1, _, w2, _ = _unpack(theta, lay)
        w1[:] = rng.standard_normal(w1.shape) * (cfg.init_scale / math.sqrt(lay.input_dim))
        w2[:] = rng.standard_normal(w2.shape) * (cfg.init_scale / math.sqrt(lay.hidden_dim))
    return ParamVector(theta, cfg.shape_tag)


def _layout_for(model: ParamVector, data: SampleSet) -> Layout:
    lay = parse_shape_tag(model.shape_tag)
    if lay.size != len(model):
        raise StructuralError(f"{model.shape_tag} expects {lay.size} parameters, got {len(model)}")
    if data.input_dim != lay.input_dim:
        raise StructuralError(f"data has {data.input_dim} features, model expects {lay.input_dim}")
    if len(data) and (data.labels.min() < 0 or data.labels.max() >= lay.num_classes):
        raise StructuralError("labels fall outside the model's class range")
    return lay


def logits(model: ParamVector, x: np.ndarray) -> np.ndarray:
    lay = parse_shape_tag(model.shape_tag)
    return _forward(model.values, lay, np.asarray(x, dtype=np.float64))[0]


def _forward(theta, lay, x):
    if lay.architecture == "softmax-linear":
        w, b = _unpack(theta, lay)
        return x @ w.T + b, None
    w1, b1, w2, b2 = _unpack(theta, lay)
    hid = np.tanh(x @ w1.T + b1)
    return hid @ w2.T + b2, hid


def _loss_grad(theta, lay, x, y, want_grad=True):
    z, hid = _forward(theta, lay, x)
    if not np.all(np.isfinite(z)):
        raise NumericError("non-finite logits")
    zmax = z.max(axis=1, keepdims=True)
    shifted = z - zmax
    lse = np.log(np.exp(shifted).sum(axis=1))
    n = y.shape[0]
    nll = lse - shifted[np.arange(n), y]
    value = float(nll.mean())
    if not want_grad:
        return value, None
    p = np.exp(shifted - lse[:, None])
    p[np.arange(n), y] -= 1.0
    p /= n
    grad = np.empty_like(theta)
    if lay.architecture == "softmax-linear":
        gw, gb = _unpack(grad, lay)
        gw[:] = p.T @ x
        gb[:] = p.sum(axis=0)
    else:
        _, _, w2, _ = _unpack(theta, lay)
        gw1, gb1, gw2, gb2 = _unpack(grad, lay)
        gw2[:] = p.T @ hid
        gb2[:] = p.sum(axis=0)
        dh = (p @ w2) * (1.0 - hid**2)
        gw1[:] = dh.T @ x
        gb1[:] = dh.sum(axis=0)
    return value, grad


def loss(model: ParamVector, data: SampleSet) -> float:
    """Mean cross-entropy of the model's softmax over ``data``."""
    lay = _layout_for(model, data)
    if len(data) == 0:
        raise StructuralError("loss of an empty sample set is undefined")
    return _loss_grad(model.values, lay, data.inputs, data.labels, want_grad=False)[0]


def loss_gradient(model: ParamVector, data: SampleSet) -> np.ndarray:
    lay = _layout_for(model, data)
    return _loss_grad(model.values, lay, data.inputs, data.labels)[1]


def warmup_steps(total_steps: int, warmup_fraction: float) -> int:
    if warmup_fraction <= 0.0:
        return 0
    return min(total_steps, max(1, round(warmup_fraction * total_steps)))


def lr_at(step: int, total_steps: int, cfg: TrainConfig) -> float:
    """Linear warmup from 0 over the first steps, then cosine decay reaching 0 on the last step."""
    warm = warmup_steps(total_steps, cfg.warmup_fraction)
    if step < warm:
        return cfg.peak_lr * (step + 1) / warm
    if cfg.schedule == "constant":
        return cfg.peak_lr
    progress = (step - warm + 1) / (total_steps - warm)
    return cfg.peak_lr * 0.5 * (1.0 + math.cos(math.pi * progress))


def steps_per_epoch(n: int, batch_size: int) -> int:
    return -(-n // batch_size)  # last partial batch kept


class AdamW:
    """Bias-corrected Adam moments with decoupled weight decay."""

    def __init__(self, size, beta1=0.9, beta2=0.999, eps=1e-8, weight_decay=0.0):
        self.m = np.zeros(size)
        self.v = np.zeros(size)
        self.t = 0
        self.beta1, self.beta2, self.eps, self.weight_decay = beta1, beta2, eps, weight_decay

    def step(self, theta: np.ndarray, grad: np.ndarray, lr: float) -> np.ndarray:
        self.t += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * grad * grad
        mhat = self.m / (1.0 - self.beta1**self.t)
        vhat = self.v / (1.0 - self.beta2**self.t)
        theta = theta * (1.0 - lr * self.weight_decay)
        return theta - lr * mhat / (np.sqrt(vhat) + self.eps)


class SGD:
    def __init__(self, size, weight_decay=0.0, **_):
        self.weight_decay = weight_decay

    def step(self, theta, grad, lr):
        return theta * (1.0 - lr * self.weight_decay) - lr * grad


def train(
    start: ParamVector,
    data: SampleSet,
    cfg: TrainConfig,
    log: Optional[list] = None,
    check_improvement: bool = True,
) -> ParamVector:
    """Minimize mean cross-entropy on ``data`` from ``start``.

    Minibatches come from a per-epoch permutation seeded by (cfg.seed, epoch).
    If ``log`` is a list, {step, lr, minibatch_loss} dicts are appended every
    ``cfg.log_interval`` steps.
    """
    if len(data) == 0:
        raise StructuralError("cannot train on an empty sample set")
    lay = _layout_for(start, data)
    n = len(data)
    per_epoch = steps_per_epoch(n, cfg.batch_size)
    total = per_epoch * cfg.epochs
    opt_cls = AdamW if cfg.optimizer == "adamw" else SGD
    opt = opt_cls(lay.size, beta1=cfg.beta1, beta2=cfg.beta2, eps=cfg.eps, weight_decay=cfg.weight_decay)
    theta = start.values.copy()
    step = 0
    for epoch in range(cfg.epochs):
        order = np.random.default_rng([cfg.seed, epoch]).permutation(n)
        for b in range(per_epoch):
            idx = order[b * cfg.batch_size : (b + 1) * cfg.batch_size]
            try:
                value, grad = _loss_grad(theta, lay, data.inputs[idx], data.labels[idx])
            except NumericError as exc:
                raise DivergenceError(f"training diverged at step {step}: {exc}", step) from exc
            if not (math.isfinite(value) and np.all(np.isfinite(grad))):
                raise DivergenceError(f"non-finite loss at step {step}", step)
            lr = lr_at(step, total, cfg)
            if log is not None and step % cfg.log_interval == 0:
                log.append({"step": step, "lr": lr, "minibatch_loss": value})
            theta = opt.step(theta, grad, lr)
            step += 1
    if not np.all(np.isfinite(theta)):
        raise DivergenceError("parameters became non-finite", step)
    end = ParamVector(theta, start.shape_tag)
    if check_improvement:
        before = _loss_grad(start.values, lay, data.inputs, data.labels, want_grad=False)[0]
        after = _loss_grad(theta, lay, data.inputs, data.labels, want_grad=False)[0]
        if after > before:
            raise DivergenceError(f"training raised the full-batch loss from {before:.6g} to {after:.6g}", step)
    return end


def dump_log(records: list, path):
    with open(path, "w") as fh:
        for r in records:
            fh.write(json.dumps(r, sort_keys=True) + "\n")


@dataclass(frozen=True)
class GradCheckReport:
    max_relative_error: float
    max_absolute_error: float
    coordinates: tuple[int, ...]
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_relative_error <= self.tolerance


def grad_check(
    model: ParamVector,
    data: SampleSet,
    num_coords: int = 20,
    step: float = 1e-5,
    seed: int = 0,
    tolerance: float = 1e-4,
    floor: float = 1e-6,
) -> GradCheckReport:
    """Analytic gradient of :func:`loss` against central differences on random coordinates."""
    if len(data) == 0:
        raise StructuralError("gradient check needs data")
    analytic = loss_gradient(model, data)
    rng = np.random.default_rng(seed)
    coords = rng.choice(len(model), size=min(num_coords, len(model)), replace=False)
    rel, ab = 0.0, 0.0
    for j in coords:
        plus = model.values.copy()
        minus = model.values.copy()
        plus[j] += step
        minus[j] -= step
        numeric = (loss(model.with_values(plus), data) - loss(model.with_values(minus), data)) / (2 * step)
        err = abs(analytic[j] - numeric)
        ab = max(ab, err)
        rel = max(rel, err / max(abs(analytic[j]), abs(numeric), floor))
    return GradCheckReport(rel, ab, tuple(int(c) for c in coords), tolerance)
