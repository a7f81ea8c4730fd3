from __future__ import annotations

import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from kexclusion.clocks import EpochTable, RateSpec, generate, shift
from kexclusion.coupling import (
    WindowTooSmall,
    envelope,
    envelope_heights,
    envelope_search,
    evolve_xi,
    k1_monitor,
    ordering_holds,
    restart,
    second_class_discrepancy,
    second_class_variational,
    variational_path,
    wedge_heights,
    window_policy,
    xi_family,
)
from kexclusion.dynamics import evolve_height, second_class_direct
from kexclusion.lattice import (
    INF,
    HeightConfig,
    OccupancyConfig,
    ProfileSpec,
    height_from_occupancy,
    sample_initial,
)

from .conftest import occupancies


def _instance(K, seed, L=30, T=3.0):
    rng = np.random.default_rng(seed)
    top = 3 if K == INF else int(K)
    occ = rng.integers(0, top + 1, L)
    cfg = OccupancyConfig(K, 0, occ)
    tab = generate(RateSpec.single(), (0, L - 2), T, seed)
    return cfg, tab


def _free_site(cfg, rng):
    free = np.flatnonzero(cfg.occ < cfg.K)
    return cfg.lo + int(rng.choice(free)) if free.size else None


# ---------------------------------------------------------------- xi processes


@pytest.mark.parametrize("K", [1, 2, INF])
def test_xi_at_time_zero_is_wedge(K):
    tab = generate(RateSpec.single(), (-10, 10), 1.0, seed=1)
    fam = xi_family(tab, K, (-10, 10), 1e-9)[-1]
    idx = np.arange(-10, 11)
    assert np.array_equal(fam.W, wedge_heights(K, idx, idx))


def test_xi_k1_bounded_by_own_epochs():
    tab = generate(RateSpec.single(), (-30, 30), 4.0, seed=5)
    for k in (-3, 0, 4):
        xi = evolve_xi(k, tab, (-25, 25), 4.0, 1)
        assert xi[0] <= tab.epochs(k).size


def test_xi_family_member_matches_single_process():
    tab = generate(RateSpec.single(), (-20, 20), 3.0, seed=2)
    fam = xi_family(tab, 2, (-20, 20), 3.0, k_range=(-2, 2))[-1]
    for k in (-2, 0, 2):
        xi = evolve_xi(k, tab, (-20 - k, 20 - k), 3.0, 2)
        for j in range(-5, 6):
            assert fam.xi(k, j) == xi[j]


def test_xi_shift_invariance_in_law():
    a, b = [], []
    for s in range(500):
        tab = generate(RateSpec.single(), (-20, 40), 2.0, seed=s)
        a.append(evolve_xi(0, tab, (-18, 18), 2.0, 1)[0])
        b.append(evolve_xi(17, tab, (-18, 18), 2.0, 1)[0])
    a, b = np.array(a, float), np.array(b, float)
    se = np.sqrt(a.var(ddof=1) / a.size + b.var(ddof=1) / b.size)
    assert abs(a.mean() - b.mean()) <= 4 * se


# ---------------------------------------------------------------- envelope


def test_envelope_at_time_zero_touches_at_apex():
    cfg, tab = _instance(2, 0)
    z0 = height_from_occupancy(cfg)
    fam = xi_family(tab, 2, (z0.lo, z0.hi), 1e-9)[-1]
    for i in range(z0.lo, z0.hi + 1):
        res = envelope_search(fam, z0, i)
        assert res.value == z0[i] and res.k_min <= i <= res.k_max
        assert fam.candidates(z0, i)[0, i - fam.k_lo] == z0[i]


@pytest.mark.parametrize("seed", range(50))
def test_envelope_k1_window_30(seed):
    cfg, tab = _instance(1, seed)
    z0 = height_from_occupancy(cfg)
    direct = evolve_height(z0, tab, 3.0).final
    fam = xi_family(tab, 1, (z0.lo, z0.hi), 3.0)[-1]
    assert np.array_equal(envelope_heights(fam, z0), direct.z)


@given(occupancies(), st.integers(0, 2**31), st.floats(0.05, 5.0))
def test_envelope_identity_property(cfg, seed, T):
    z0 = height_from_occupancy(cfg)
    tab = generate(RateSpec.single(), (cfg.lo, cfg.hi - 1), T, seed)
    fam = xi_family(tab, cfg.K, (z0.lo, z0.hi), T)[-1]
    assert np.array_equal(envelope_heights(fam, z0), evolve_height(z0, tab, T).final.z)
    for i in range(fam.lo, fam.hi + 1):
        assert ordering_holds(fam, z0, i)


def test_window_policy_formula():
    assert window_policy(0, 1.0, 100) == (-300, 300)
    assert window_policy(7, 0.5, 10) == (7 - 25, 7 + 25)


@pytest.mark.parametrize("seed", range(20))
def test_policy_window_matches_exhaustive(seed):
    cfg, tab = _instance(2, 100 + seed, L=20, T=2.0)
    z0 = height_from_occupancy(cfg)
    i = 10
    lo, hi = window_policy(i, 2.0 / 5, 5)
    k_window = (max(lo, z0.lo), min(hi, z0.hi))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", WindowTooSmall)
        assert envelope(z0, tab, i, 2.0, k_window) == envelope(z0, tab, i, 2.0)


@pytest.mark.slow
def test_policy_window_flag_clear_at_scale():
    # n = 200, t = 1: flat data, apex window from the policy, far from the edges
    n, t = 200, 1.0
    for seed in range(200):
        cfg = sample_initial(ProfileSpec.constant(0.5), n, (-3 * n, 3 * n), 1)
        z0 = height_from_occupancy(cfg)
        tab = generate(RateSpec.single(), (cfg.lo, cfg.hi - 1), n * t, seed)
        k_window = window_policy(0, t, n)
        fam = xi_family(tab, 1, (z0.lo, z0.hi), n * t, k_window)[-1]
        assert not envelope_search(fam, z0, 0).at_boundary


# ---------------------------------------------------------------- second class


@given(occupancies(K=None), st.integers(0, 2**31), st.floats(0.05, 5.0), st.data())
def test_three_routes_agree(cfg, seed, T, data):
    if cfg.K == INF:
        cfg = OccupancyConfig(3, cfg.lo, np.minimum(cfg.occ, 3))
    free = [cfg.lo + j for j, v in enumerate(cfg.occ) if v < cfg.K]
    if not free:
        return
    X0 = data.draw(st.sampled_from(free))
    tab = generate(RateSpec.single(), (cfg.lo, cfg.hi - 1), T, seed)
    _, direct = second_class_direct(cfg, X0, tab, T)
    disc = second_class_discrepancy(cfg, X0, tab, T)
    assert direct.same_path(disc)
    times = [0.0] + tab.times[tab.times <= T].tolist() + [T]
    checks = variational_path(cfg, X0, tab, times, verify=True)
    assert [c.X_inf for c in checks] == direct.sample(times).tolist()
    for c in checks:
        assert c.consistent, c.statements


def test_discrepancy_no_epochs():
    cfg = OccupancyConfig(2, 0, [1, 2, 0, 1])
    p = second_class_discrepancy(cfg, 2, EpochTable.from_streams({}, 1.0, (0, 2)), 1.0)
    assert p.final == 2


def test_variational_time_zero():
    cfg, tab = _instance(3, 4)
    z0 = height_from_occupancy(cfg)
    fam = xi_family(tab, 3, (z0.lo, z0.hi), 1e-9)[-1]
    X0 = _free_site(cfg, np.random.default_rng(0))
    assert second_class_variational(z0, z0, fam, X0) == X0


@pytest.mark.parametrize("seed", range(20))
def test_kinf_geometric_second_class_nondecreasing(seed):
    cfg = sample_initial(ProfileSpec.constant(1.0), 1, (-30, 30), INF, "geometric", seed)
    tab = generate(RateSpec.single(), (-30, 29), 5.0, seed)
    p = second_class_discrepancy(cfg, 0, tab, 5.0)
    assert np.all(np.diff(p.positions) >= 0)


@pytest.mark.parametrize("K", [1, 2, 3])
def test_k1_monitor(K):
    for seed in range(30):
        cfg, tab = _instance(K, seed, L=25, T=4.0)
        X0 = _free_site(cfg, np.random.default_rng(seed))
        s = k1_monitor(cfg, X0, tab, 4.0)
        assert s.k1[0] >= X0
        assert s.monotone, s.violations


def test_k1_finite_with_room_to_the_right():
    # a free site at the right end of the window keeps k1 inside it
    cfg = OccupancyConfig(2, 0, [2] * 10 + [0] * 5)
    tab = generate(RateSpec.single(), (0, 13), 3.0, seed=8)
    s = k1_monitor(cfg, 10, tab, 3.0)
    assert np.all(s.k1 <= cfg.hi)


def test_restart_tau_zero_matches_original():
    cfg, tab = _instance(2, 9)
    X0 = _free_site(cfg, np.random.default_rng(1))
    assert shift(tab, 0.0) is tab
    r = restart(cfg, X0, tab, 0.0, 3.0)
    assert r.ok


@pytest.mark.parametrize("seed", range(50))
def test_restart_matches_direct(seed):
    K = (1, 2, 3)[seed % 3]
    cfg, tab = _instance(K, 200 + seed, L=25, T=4.0)
    X0 = _free_site(cfg, np.random.default_rng(seed))
    tau = float(np.random.default_rng(seed).uniform(0.2, 3.5))
    r = restart(cfg, X0, tab, tau, 4.0)
    assert r.envelope_equal and r.X_restart == r.X_direct


def test_height_config_for_family_needs_single_clocks():
    tab = generate(RateSpec.batch({2: 1.0}), (0, 5), 1.0, seed=1)
    with pytest.raises(ValueError):
        xi_family(tab, INF, (0, 6), 1.0)
    with pytest.raises(ValueError):
        evolve_height(HeightConfig(INF, 0, [0, 1, 2, 3, 4, 5, 6]), tab, 1.0)
