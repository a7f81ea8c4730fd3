from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from kexclusion.lattice import (
    INF,
    HeightConfig,
    OccupancyConfig,
    ProfileSpec,
    buffer_width,
    height_from_occupancy,
    interval_sum,
    occupancy_from_height,
    sample_initial,
)

from .conftest import occupancies


def test_unit_occupancy_gives_unit_heights():
    cfg = OccupancyConfig(1, 1, np.ones(8))
    z = height_from_occupancy(cfg, anchor=(0, 0))
    assert np.array_equal(z.z, np.arange(0, 9))


def test_empty_occupancy_constant_height():
    z = height_from_occupancy(OccupancyConfig(2, -3, np.zeros(6)), anchor=(0, 5))
    assert np.all(z.z == 5)


def test_round_trip_against_prefix_sums(rng):
    occ = rng.integers(0, 4, size=20)
    cfg = OccupancyConfig(3, 4, occ)
    z = height_from_occupancy(cfg)
    # prefix-sum oracle with z(lo-1) = 0
    oracle = [0]
    for v in occ:
        oracle.append(oracle[-1] + int(v))
    assert np.array_equal(z.z, oracle)
    assert occupancy_from_height(z) == cfg


@given(occupancies(), st.integers(-50, 50))
def test_bijection_any_anchor(cfg, v0):
    z = height_from_occupancy(cfg, anchor=(cfg.lo + 1, v0))
    assert z[cfg.lo + 1] == v0
    assert occupancy_from_height(z) == cfg


def test_invalid_configs_rejected():
    with pytest.raises(ValueError):
        OccupancyConfig(2, 0, [0, 3])
    with pytest.raises(ValueError):
        OccupancyConfig(1, 0, [-1])
    with pytest.raises(ValueError):
        HeightConfig(1, 0, [0, 2])
    with pytest.raises(ValueError):
        HeightConfig(INF, 0, [3, 2])


def test_deterministic_rounding_exact_count():
    cfg = sample_initial(ProfileSpec.constant(1.0), 10, (1, 10), 2)
    assert cfg.total() == 10


@given(st.lists(st.floats(0.0, 3.0), min_size=1, max_size=4), st.integers(1, 60))
def test_rounding_interval_error_aligned(rhos, m):
    p = len(rhos)
    n = p * m
    edges = [-1.0 + 2.0 * j / p for j in range(p + 1)]
    prof = ProfileSpec(tuple((a, b, r) for a, b, r in zip(edges[:-1], edges[1:], rhos)))
    cfg = sample_initial(prof, n, (-n - 2, n + 2), INF)
    for a in edges:
        for b in edges:
            if a < b:
                assert abs(interval_sum(cfg, n, a, b) - n * prof.integral(a, b)) <= 2


@given(st.lists(st.floats(0.0, 3.0), min_size=1, max_size=4), st.integers(5, 300))
def test_rounding_interval_error_unaligned(rhos, n):
    # off-lattice endpoints add at most rho_max per endpoint
    edges = np.linspace(-1.0, 1.0, len(rhos) + 1)
    prof = ProfileSpec(tuple((a, b, r) for a, b, r in zip(edges[:-1], edges[1:], rhos)))
    cfg = sample_initial(prof, n, (-n - 2, n + 2), INF)
    bound = 1 + 2 * max(rhos) + 1e-9
    for a in edges:
        for b in edges:
            if a < b:
                assert abs(interval_sum(cfg, n, a, b) - n * prof.integral(a, b)) <= bound


def test_bernoulli_mean():
    n = 10_000
    cfg = sample_initial(ProfileSpec.constant(0.5), n, (1, n), 1, "bernoulli", seed=5)
    assert abs(cfg.occ.mean() - 0.5) <= 4 * 0.5 / math.sqrt(n)


def test_geometric_mean():
    n = 10_000
    cfg = sample_initial(ProfileSpec.constant(1.0), n, (1, n), INF, "geometric", seed=5)
    # P(eta = k) = rho^k / (1+rho)^(k+1): mean rho, variance rho (1 + rho)
    assert abs(cfg.occ.mean() - 1.0) <= 4 * math.sqrt(2.0 / n)


def test_sampler_family_checks():
    with pytest.raises(ValueError):
        sample_initial(ProfileSpec.constant(0.5), 10, (0, 9), 2, "bernoulli", seed=1)
    with pytest.raises(ValueError):
        sample_initial(ProfileSpec.constant(0.5), 10, (0, 9), 1, "bernoulli")
    with pytest.raises(ValueError):
        sample_initial(ProfileSpec.constant(1.5), 10, (0, 9), 1)


def test_buffer_width_grows_like_T():
    assert buffer_width(0.0) == 10
    assert buffer_width(100.0) == 100 + 60 + 10
