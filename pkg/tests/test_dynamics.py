from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from kexclusion.clocks import EpochTable, RateSpec, generate
from kexclusion.dynamics import (
    WindowMismatch,
    evolve_height,
    evolve_occupancy,
    second_class_direct,
    second_class_final,
)
from kexclusion.lattice import (
    INF,
    HeightConfig,
    OccupancyConfig,
    ProfileSpec,
    height_from_occupancy,
    occupancy_from_height,
    sample_initial,
)

from .conftest import occupancies
from .oracles import naive_height, naive_occupancy, naive_second_class


def _events(tab):
    return list(zip(tab.times.tolist(), tab.sites.tolist(), tab.sizes.tolist()))


def _table(pairs, horizon=1.0, site_range=None):
    streams = {}
    for t, i in pairs:
        streams.setdefault(i, []).append(t)
    return EpochTable.from_streams(streams, horizon, site_range)


def test_golden_k2_six_sites_eight_epochs():
    # worked by hand with b = min(1, eta(i), K - eta(i+1)), sites 1..6
    init = OccupancyConfig(2, 1, [2, 1, 0, 2, 1, 0])
    tab = _table([(0.1, 1), (0.2, 2), (0.3, 3), (0.4, 4), (0.5, 3), (0.6, 5), (0.7, 1),
                  (0.8, 2)], site_range=(1, 5))
    tr = evolve_occupancy(init, tab, 1.0, record_events=True)
    assert tr.final.occ.tolist() == [0, 1, 1, 2, 1, 1]
    assert tr.event_log.moved.tolist() == [1, 1, 0, 1, 1, 1, 1, 1]


def test_lone_particle_advances_per_epoch():
    init = OccupancyConfig(1, 0, [1] + [0] * 9)
    tab = _table([(0.1 * (j + 1), j) for j in range(6)], site_range=(0, 8))
    traj = evolve_occupancy(init, tab, 1.0, snapshot_times=[0.1 * (j + 1) for j in range(6)])
    for j, (_, cfg) in enumerate(traj.snapshots[:6]):
        assert np.flatnonzero(cfg.occ).tolist() == [j + 1]


@pytest.mark.parametrize("K", [1, 2, 3])
def test_full_target_blocks(K):
    init = OccupancyConfig(K, 0, [1, K, 0])
    tab = _table([(0.5, 0)], site_range=(0, 1))
    assert evolve_occupancy(init, tab, 1.0).final == init


def test_height_rule_suppressed_decrease():
    z = HeightConfig(1, 0, [0, 0, 0])
    tab = _table([(0.5, 1)], site_range=(1, 1))
    assert evolve_height(z, tab, 1.0).final.z.tolist() == [0, 0, 0]


@pytest.mark.parametrize("K", [1, 2, 3, INF])
def test_wedge_stays_valid(K):
    idx = np.arange(-15, 16)
    # K = inf: a steep finite stand-in for the vertical wall
    z0 = np.where(idx >= 0, 0, -40 if K == INF else K * idx)
    h = HeightConfig(K, -15, z0)
    tab = generate(RateSpec.single(), (-14, 14), 6.0, seed=3)
    tr = evolve_height(h, tab, 6.0, snapshot_times=tab.times.tolist())
    for _, cfg in tr.snapshots:
        d = np.diff(cfg.z)
        assert d.min() >= 0 and (K == INF or d.max() <= K)


@given(occupancies(), st.integers(0, 2**31), st.floats(0.1, 4.0))
def test_occupancy_matches_naive_oracle(cfg, seed, T):
    tab = generate(RateSpec.single(), (cfg.lo, cfg.hi - 1), T, seed)
    got = evolve_occupancy(cfg, tab, T).final.occ
    assert np.array_equal(got, naive_occupancy(cfg.occ, cfg.lo, cfg.K, _events(tab), T))


@given(occupancies(), st.integers(0, 2**31), st.floats(0.1, 4.0))
def test_height_matches_naive_oracle(cfg, seed, T):
    z0 = height_from_occupancy(cfg)
    tab = generate(RateSpec.single(), (cfg.lo, cfg.hi - 1), T, seed)
    got = evolve_height(z0, tab, T).final.z
    K = math.inf if cfg.K == INF else cfg.K
    assert np.array_equal(got, naive_height(z0.z, z0.lo, K, _events(tab), T))


@given(occupancies(), st.integers(0, 2**31), st.floats(0.1, 4.0))
def test_eta_z_pathwise_and_conservation(cfg, seed, T):
    tab = generate(RateSpec.single(), (cfg.lo, cfg.hi - 1), T, seed)
    stops = tab.times[tab.times <= T].tolist()
    to = evolve_occupancy(cfg, tab, T, stops)
    tz = evolve_height(height_from_occupancy(cfg), tab, T, stops)
    for (_, o), (_, h) in zip(to.snapshots, tz.snapshots):
        assert o.total() == cfg.total()
        assert occupancy_from_height(h) == o


@given(st.dictionaries(st.integers(1, 3), st.floats(0.0, 2.0), min_size=1),
       st.integers(0, 2**31))
def test_batch_matches_naive_oracle(rates, seed):
    spec = RateSpec.batch(rates)
    cfg = OccupancyConfig(INF, 0, np.random.default_rng(seed).integers(0, 5, 15))
    tab = generate(spec, (0, 13), 3.0, seed)
    got = evolve_occupancy(cfg, tab, 3.0).final.occ
    assert np.array_equal(got, naive_occupancy(cfg.occ, 0, math.inf, _events(tab), 3.0))


def test_zero_rates_no_motion():
    cfg = OccupancyConfig(INF, 0, [3, 0, 2, 0])
    tab = generate(RateSpec.batch({1: 0.0, 2: 0.0}), (0, 2), 5.0, seed=1)
    assert evolve_occupancy(cfg, tab, 5.0).final == cfg


def test_window_mismatch():
    cfg = OccupancyConfig(1, 0, [1, 0, 0, 0])
    with pytest.raises(WindowMismatch):
        evolve_occupancy(cfg, generate(RateSpec.single(), (0, 1), 1.0, 1), 1.0)
    with pytest.raises(WindowMismatch):
        evolve_occupancy(cfg, generate(RateSpec.single(), (0, 2), 1.0, 1), 2.0)


def test_trajectory_csv_lf():
    cfg = OccupancyConfig(1, 0, [1, 0])
    tr = evolve_occupancy(cfg, _table([(0.5, 0)], site_range=(0, 0)), 1.0)
    text = tr.to_csv()
    assert "\r" not in text and text.splitlines()[0] == "time,site,value"


# ---------------------------------------------------------------- second class


def test_golden_second_class_five_events():
    # K = 2, sites 0..5, X0 = 3; worked by hand:
    # 0.1 D_2: eta(2)=1 arrives at 3 where eta(3)=K-1 -> X to 2 (left rule)
    # 0.2 D_2: X=2 empty but eta(3)=K -> stays
    # 0.3 D_3: first-class 3 -> 4
    # 0.4 D_2: X=2 empty, eta(3)=1 < K -> X to 3 (right rule)
    # 0.5 D_3: first-class at X's site jumps, X stays
    init = OccupancyConfig(2, 0, [0, 0, 1, 1, 0, 0])
    tab = _table([(0.1, 2), (0.2, 2), (0.3, 3), (0.4, 2), (0.5, 3)], site_range=(0, 4))
    tr, path = second_class_direct(init, 3, tab, 1.0)
    assert path.times.tolist() == [0.0, 0.1, 0.4]
    assert path.positions.tolist() == [3, 2, 3]
    assert tr.final.occ.tolist() == [0, 0, 0, 0, 2, 0]


def test_second_class_no_epochs():
    init = OccupancyConfig(2, 0, [1, 0, 1, 0])
    tab = EpochTable.from_streams({}, 1.0, (0, 2))
    _, path = second_class_direct(init, 1, tab, 1.0)
    assert path.final == 1 and path.times.tolist() == [0.0]


def test_second_class_on_empty_lattice_follows_own_clock():
    init = OccupancyConfig(1, -5, np.zeros(60, int))
    tab = generate(RateSpec.single(), (-5, 53), 8.0, seed=4)
    _, path = second_class_direct(init, 0, tab, 8.0)
    x, expect = 0, [0]
    for t, i in zip(tab.times, tab.sites):
        if i == x:
            x += 1
            expect.append(x)
    assert path.positions.tolist() == expect


@pytest.mark.parametrize("seed", range(20))
def test_second_class_kinf_never_left(seed):
    init = sample_initial(ProfileSpec.constant(1.0), 1, (-40, 40), INF, "geometric", seed)
    tab = generate(RateSpec.single(), (-40, 39), 10.0, seed)
    _, path = second_class_direct(init, 0, tab, 10.0)
    assert np.all(np.diff(path.positions) > 0)


@given(occupancies(), st.integers(0, 2**31), st.floats(0.1, 4.0), st.data())
def test_second_class_matches_naive_oracle(cfg, seed, T, data):
    free = [cfg.lo + j for j, v in enumerate(cfg.occ) if v < cfg.K]
    if not free:
        return
    X0 = data.draw(st.sampled_from(free))
    tab = generate(RateSpec.single(), (cfg.lo, cfg.hi - 1), T, seed)
    K = math.inf if cfg.K == INF else cfg.K
    final, npath = naive_second_class(cfg.occ, cfg.lo, K, X0, _events(tab), T)
    tr, path = second_class_direct(cfg, X0, tab, T)
    assert np.array_equal(tr.final.occ, final)
    assert list(zip(path.times.tolist(), path.positions.tolist())) == npath
    assert second_class_final(cfg, X0, tab, [T]).tolist() == [npath[-1][1]]


@given(st.integers(0, 2**31))
def test_batch_second_class_matches_naive_oracle(seed):
    rng = np.random.default_rng(seed)
    cfg = OccupancyConfig(INF, 0, rng.integers(0, 4, 20))
    tab = generate(RateSpec.batch({1: 0.7, 2: 0.6, 3: 0.3}), (0, 18), 3.0, seed)
    final, npath = naive_second_class(cfg.occ, 0, math.inf, 7, _events(tab), 3.0)
    tr, path = second_class_direct(cfg, 7, tab, 3.0)
    assert np.array_equal(tr.final.occ, final)
    assert path.positions.tolist() == [x for _, x in npath]


def test_second_class_rejects_full_site():
    with pytest.raises(ValueError):
        second_class_direct(OccupancyConfig(1, 0, [1, 1, 0]), 1,
                            EpochTable.from_streams({}, 1.0, (0, 1)), 1.0)
