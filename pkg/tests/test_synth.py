import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mixmerge.errors import CapacityError, ParameterError, StructuralError
from mixmerge.simplex import MixtureWeights, enumerate_grid
from mixmerge.synth import (
    DomainSpec,
    apportion,
    assemble_mixture,
    build_domain_pool,
    make_domain_family,
    random_orthogonal,
    read_sample_csv,
    write_sample_csv,
)


def square_spec(noise=1.0, pool=1000, name="d"):
    centers = ((2.0, 0.0), (0.0, 2.0), (-2.0, 0.0), (0.0, -2.0))
    return DomainSpec(name, 2, 4, centers, noise, pool)


def test_zero_noise_hits_centers():
    spec = square_spec(noise=0.0)
    pool = build_domain_pool(spec, seed=1)
    assert np.array_equal(pool.inputs, spec.class_centers()[pool.labels])


def test_class_balance_counting_oracle():
    spec = square_spec(pool=1000)
    for s in range(50):
        counts = np.bincount(build_domain_pool(spec, seed=s).labels, minlength=4)
        assert counts.sum() == 1000
        assert counts.min() >= 200 and counts.max() <= 300


def test_pool_determinism():
    spec = square_spec()
    a, b = build_domain_pool(spec, 9), build_domain_pool(spec, 9)
    assert a.identical(b)
    assert not a.identical(build_domain_pool(spec, 10))


def test_spec_validation():
    with pytest.raises(StructuralError):
        DomainSpec("x", 3, 2, ((0.0, 0.0), (1.0, 1.0)), 1.0, 10)
    with pytest.raises(ParameterError):
        DomainSpec("x", 2, 2, ((0.0, 0.0), (1.0, 1.0)), -1.0, 10)


def test_spec_dict_roundtrip():
    for spec in make_domain_family(3, seed=4):
        assert DomainSpec.from_dict(spec.to_dict()) == spec


def test_random_orthogonal(rng):
    q = random_orthogonal(7, rng)
    assert np.allclose(q @ q.T, np.eye(7), atol=1e-12)


def pools3():
    return [build_domain_pool(square_spec(name=f"d{i}"), seed=i, domain_index=i) for i in range(3)]


def test_vertex_mixture_single_domain():
    pools = pools3()[:2]
    data = assemble_mixture(pools, MixtureWeights((1.0, 0.0)), 100, seed=0)
    assert len(data) == 100 and set(data.domain_tags.tolist()) == {0}


def test_apportion_largest_remainder_ties():
    assert apportion(MixtureWeights.of([1, 1, 1]), 100) == [34, 33, 33]


def test_apportion_oracle_over_grid():
    # independent largest-remainder oracle on exact rationals
    from fractions import Fraction

    for w in enumerate_grid(3, 7):
        for n in (10, 99, 1000):
            quotas = [Fraction(x).limit_denominator(1000) * n for x in w.weights]
            base = [math.floor(q) for q in quotas]
            order = sorted(range(3), key=lambda i: (-(quotas[i] - base[i]), i))
            for i in order[: n - sum(base)]:
                base[i] += 1
            assert apportion(w, n) == base


def test_multinomial_binomial_bound():
    pools = [build_domain_pool(square_spec(pool=20000), seed=i, domain_index=i) for i in range(2)]
    data = assemble_mixture(pools, MixtureWeights((0.5, 0.5)), 10_000, seed=3, mode="multinomial")
    n0 = int(np.sum(data.domain_tags == 0))
    assert 4800 <= n0 <= 5200


def test_capacity_error_names_domain():
    pools = [build_domain_pool(square_spec(pool=50), seed=i, domain_index=i) for i in range(2)]
    with pytest.raises(CapacityError, match="alpha"):
        assemble_mixture(pools, MixtureWeights((0.9, 0.1)), 100, 0, names=["alpha", "beta"])


def test_mode_validation():
    with pytest.raises(ParameterError):
        assemble_mixture(pools3(), MixtureWeights.of([1, 1, 1]), 10, 0, mode="stratified")


@given(st.lists(st.integers(0, 20), min_size=3, max_size=3).filter(lambda v: sum(v) > 0),
       st.integers(1, 900), st.integers(0, 2**31 - 1), st.sampled_from(["apportioned", "multinomial"]))
def test_assembly_invariants(raw, n, seed, mode):
    w = MixtureWeights.of(raw)
    pools = pools3()
    data = assemble_mixture(pools, w, n, seed, mode)
    assert len(data) == n
    src = {tuple(r) for r in data.source_ids.tolist()}
    assert len(src) == n  # no repeated (pool, row)
    for (d, row), x in zip(data.source_ids, data.inputs):
        assert np.array_equal(pools[d].inputs[row], x)
    again = assemble_mixture(pools, w, n, seed, mode)
    assert data.identical(again)


@given(st.lists(st.integers(0, 50), min_size=1, max_size=6).filter(lambda v: sum(v) > 0), st.integers(0, 10_000))
def test_apportion_properties(raw, n):
    w = MixtureWeights.of(raw)
    counts = apportion(w, n)
    assert sum(counts) == n
    for c, wi in zip(counts, w.weights):
        assert c >= math.floor(wi * n)


def test_csv_roundtrip(tmp_path):
    data = assemble_mixture(pools3(), MixtureWeights.of([1, 2, 1]), 40, seed=2)
    write_sample_csv(tmp_path / "s.csv", data, {"note": "x"})
    back = read_sample_csv(tmp_path / "s.csv")
    assert back.identical(data)
