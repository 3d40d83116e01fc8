import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mixmerge.errors import DivergenceError, ParameterError, StructuralError
from mixmerge.params import ParamVector
from mixmerge.simplex import MixtureWeights
from mixmerge.synth import DomainSpec, SampleSet, assemble_mixture, build_domain_pool, make_domain_family
from mixmerge.train import (
    AdamW,
    ModelConfig,
    TrainConfig,
    grad_check,
    init_model,
    logits,
    loss,
    loss_gradient,
    lr_at,
    steps_per_epoch,
    train,
    warmup_steps,
)

MLP = ModelConfig("one-hidden-layer-mlp", input_dim=5, num_classes=3, hidden_dim=7, init_seed=2, init_scale=1.0)


def random_data(rng, n=60, d=5, c=3):
    return SampleSet(rng.standard_normal((n, d)), rng.integers(0, c, n), np.zeros(n, dtype=int))


def test_init_examples():
    cfg = ModelConfig(input_dim=6, num_classes=3, init_scale=0.0)
    assert not init_model(cfg).values.any()
    assert len(init_model(cfg)) == 6 * 3 + 3
    cfg = ModelConfig(input_dim=6, num_classes=3, init_seed=5)
    assert init_model(cfg) == init_model(cfg)


def test_model_config_validation():
    with pytest.raises(ParameterError):
        ModelConfig("transformer")
    with pytest.raises(ParameterError):
        ModelConfig("one-hidden-layer-mlp", hidden_dim=0)


def test_uniform_predictor_loss_is_log_c(rng):
    data = random_data(rng, c=5)
    zero = ParamVector(np.zeros(5 * 5 + 5), "softmax-linear/d=5/c=5")
    assert abs(loss(zero, data) - math.log(5)) <= 1e-12


def test_confident_correct_predictor_loss_near_zero():
    x = np.eye(3)
    data = SampleSet(x, np.arange(3), np.zeros(3, dtype=int))
    w = 200.0 * np.eye(3)
    model = ParamVector(np.concatenate([w.ravel(), np.zeros(3)]), "softmax-linear/d=3/c=3")
    assert loss(model, data) < 1e-60


@pytest.mark.parametrize("cfg", [ModelConfig(input_dim=5, num_classes=3, init_seed=1, init_scale=1.0), MLP])
def test_loss_matches_per_sample_oracle(rng, cfg):
    data = random_data(rng)
    model = init_model(cfg)
    z = logits(model, data.inputs)
    total = []
    for zi, yi in zip(z, data.labels):
        m = max(zi)
        total.append(m + math.log(math.fsum(math.exp(v - m) for v in zi)) - zi[yi])
    assert loss(model, data) == pytest.approx(math.fsum(total) / len(total), rel=1e-12)


@pytest.mark.parametrize("cfg", [ModelConfig(input_dim=5, num_classes=3, init_seed=1, init_scale=1.0), MLP])
def test_grad_check(rng, cfg):
    report = grad_check(init_model(cfg), random_data(rng), num_coords=40)
    assert report.passed, report


def test_zero_gradient_point():
    # per-class inputs cancel and classes are balanced: theta = 0 is stationary
    v = np.array([[1.0, 2.0], [0.5, -1.0], [3.0, 0.0]])
    x = np.vstack([v, -v])
    y = np.array([0, 1, 2, 0, 1, 2])
    data = SampleSet(x, y, np.zeros(6, dtype=int))
    zero = ParamVector(np.zeros(2 * 3 + 3), "softmax-linear/d=2/c=3")
    assert np.max(np.abs(loss_gradient(zero, data))) < 1e-15
    report = grad_check(zero, data)
    assert report.max_absolute_error < 1e-9


def test_shape_mismatch():
    model = init_model(ModelConfig(input_dim=4))
    with pytest.raises(StructuralError):
        loss(model, SampleSet(np.zeros((3, 5)), np.zeros(3), np.zeros(3)))


def separable_data(seed=0, n=400):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, 2))
    x[:, 0] += np.where(x[:, 0] > 0, 0.5, -0.5)
    y = (x[:, 0] > 0).astype(int)
    return SampleSet(x, y, np.zeros(n, dtype=int))


def test_separable_logistic_reaches_full_accuracy():
    data = separable_data()
    start = init_model(ModelConfig(input_dim=2, num_classes=2))
    out = train(start, data, TrainConfig(peak_lr=0.1, epochs=40, batch_size=32, weight_decay=0.0))
    acc = np.mean(np.argmax(logits(out, data.inputs), axis=1) == data.labels)
    # full-batch gradient descent oracle on the same problem
    theta = start.values.copy()
    for _ in range(2000):
        theta -= 1.0 * loss_gradient(start.with_values(theta), data)
    acc_gd = np.mean(np.argmax(logits(start.with_values(theta), data.inputs), axis=1) == data.labels)
    assert acc_gd >= 0.99
    assert acc >= 0.99


def test_zero_lr_returns_start_bitwise(rng):
    start = init_model(MLP)
    out = train(start, random_data(rng), TrainConfig(peak_lr=0.0, epochs=2, batch_size=16))
    assert np.array_equal(out.values, start.values)


def test_training_is_deterministic(rng):
    data = random_data(rng, n=100)
    start = init_model(MLP)
    cfg = TrainConfig(peak_lr=0.01, epochs=3, batch_size=16, seed=4)
    log_a, log_b = [], []
    a, b = train(start, data, cfg, log_a), train(start, data, cfg, log_b)
    assert np.array_equal(a.values, b.values)
    assert log_a == log_b


def test_divergence_detected(rng):
    data = random_data(rng, n=100)
    start = init_model(MLP)
    with pytest.raises(DivergenceError):
        train(start, data, TrainConfig(peak_lr=1e6, epochs=3, batch_size=8, optimizer="sgd", weight_decay=0.0))


def closed_form_lr(step, total, peak, frac):
    warm = max(1, round(frac * total)) if frac > 0 else 0
    if step < warm:
        return peak * (step + 1) / warm
    return peak * 0.5 * (1 + math.cos(math.pi * (step - warm + 1) / (total - warm)))


@pytest.mark.parametrize("total,frac", [(100, 0.1), (37, 0.25), (10, 0.0), (500, 0.05)])
def test_schedule_matches_closed_form(total, frac):
    cfg = TrainConfig(peak_lr=0.3, warmup_fraction=frac)
    for s in range(total):
        assert lr_at(s, total, cfg) == pytest.approx(closed_form_lr(s, total, 0.3, frac), abs=1e-15)
    if frac > 0:
        assert lr_at(0, total, cfg) == pytest.approx(0.3 / warmup_steps(total, frac))
    assert lr_at(total - 1, total, cfg) <= 1e-3 * 0.3


def test_steps_keep_partial_batch():
    assert steps_per_epoch(100, 32) == 4
    assert steps_per_epoch(96, 32) == 3


@given(st.integers(1, 20), st.floats(1e-4, 0.5), st.floats(0.0, 0.3))
def test_adamw_zero_grad_is_pure_decay(steps, lr, wd):
    theta = np.linspace(-2, 2, 9)
    opt = AdamW(9, weight_decay=wd)
    expect = theta.copy()
    for _ in range(steps):
        theta = opt.step(theta, np.zeros(9), lr)
        expect = expect * (1 - lr * wd)
    assert np.array_equal(theta, expect)


@given(st.lists(st.integers(0, 10), min_size=3, max_size=3).filter(lambda v: sum(v) > 0), st.integers(0, 1000))
def test_mixture_loss_identity(raw, seed):
    specs = make_domain_family(3, input_dim=4, num_classes=3, pool_size=400, seed=1)
    pools = [build_domain_pool(s, seed=i, domain_index=i) for i, s in enumerate(specs)]
    w = MixtureWeights.of(raw)
    data = assemble_mixture(pools, w, 300, seed)
    model = init_model(ModelConfig(input_dim=4, num_classes=3, init_seed=seed, init_scale=2.0))
    parts = [data.domain_part(i) for i in range(3)]
    combined = math.fsum(len(p) / len(data) * loss(model, p) for p in parts if len(p))
    assert loss(model, data) == pytest.approx(combined, rel=1e-10)
