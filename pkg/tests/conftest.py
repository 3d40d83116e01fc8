import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", max_examples=200, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("quick", max_examples=15, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def random_spd(rng, d, lo=1.0, hi=10.0):
    q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    h = (q * rng.uniform(lo, hi, d)) @ q.T
    return 0.5 * (h + h.T)


def small_config(out, **over):
    """A few-second experiment: K=3, six interior candidates at m=5."""
    from mixmerge.pipeline import ExperimentConfig
    from mixmerge.train import TrainConfig

    kw = dict(
        k=3,
        budget=600,
        candidates={"kind": "grid", "m": 5, "include_boundary": False},
        pretrain_budget=300,
        pretrain=TrainConfig(epochs=2),
        finetune=TrainConfig(peak_lr=0.002, epochs=2),
        benchmark_size=400,
        output_dir=str(out),
    )
    kw.update(over)
    return ExperimentConfig(**kw)
