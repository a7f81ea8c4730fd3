from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from kexclusion.clocks import EpochTable
from kexclusion.lattice import INF, OccupancyConfig

settings.register_profile(
    "default", deadline=None, max_examples=60,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large])
settings.load_profile("default")

CAPACITIES = [1, 2, 3, INF]


@st.composite
def occupancies(draw, K=None, min_size=3, max_size=25, inf_fill=4):
    K = draw(st.sampled_from(CAPACITIES)) if K is None else K
    top = inf_fill if K == INF else int(K)
    L = draw(st.integers(min_size, max_size))
    lo = draw(st.integers(-15, 15))
    occ = draw(st.lists(st.integers(0, top), min_size=L, max_size=L))
    return OccupancyConfig(K, lo, np.array(occ))


@st.composite
def epoch_tables(draw, lo, hi, horizon=3.0, max_events=60):
    """Hand-built epoch lists on sites lo..hi, distinct times."""
    n = draw(st.integers(0, max_events))
    times = draw(st.lists(st.floats(1e-3, horizon, allow_nan=False), min_size=n,
                          max_size=n, unique=True))
    sites = draw(st.lists(st.integers(lo, hi), min_size=n, max_size=n))
    streams: dict[int, list[float]] = {}
    for t, s in zip(times, sites):
        streams.setdefault(s, []).append(t)
    return EpochTable.from_streams(streams, horizon, (lo, hi))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
