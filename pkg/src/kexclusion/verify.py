"""Exact identity checks on small random instances.

Each suite draws its own instances from a seeded generator, runs them, and
records every failing instance with enough data to replay it.  Nothing in
here is statistical: any recorded failure is a genuine disagreement.
"""

from __future__ import annotations

import time
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from .clocks import EpochTable, RateSpec, generate, replica_seed
from .coupling import (
    envelope_heights,
    k1_monitor,
    ordering_holds,
    second_class_discrepancy,
    variational_path,
    xi_family,
)
from .dynamics import evolve_height, evolve_occupancy, second_class_direct
from .lattice import (
    INF,
    OccupancyConfig,
    check_capacity,
    height_from_occupancy,
    is_infinite,
    occupancy_from_height,
)

SUITES = ("envelope", "second_class", "conservation", "ordering", "statements", "k1")


@dataclass
class VerifyConfig:
    instances: int = 200
    Ks: tuple = (1, 2, 3, INF)
    max_window: int = 40
    max_T: float = 5.0
    seed: int = 0
    inf_fill: int = 3  # largest initial occupancy drawn when K = inf

    def __post_init__(self):
        self.Ks = tuple(check_capacity(K) for K in self.Ks)
        if self.instances < 1:
            raise ValueError("need at least one instance")
        if self.max_window < 4:
            raise ValueError("max_window must be >= 4")
        if not self.max_T > 0:
            raise ValueError("max_T must be positive")


@dataclass
class Instance:
    K: float
    init: OccupancyConfig
    clocks: EpochTable
    T: float
    X0: int
    seed: int


@dataclass
class SuiteResult:
    name: str
    instances: int = 0
    failures: list[dict] = field(default_factory=list)
    elapsed: float = 0.0

    @property
    def passed(self) -> bool:
        return self.instances > 0 and not self.failures

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return (f"{tag} {self.name}: {self.instances} instances, "
                f"{len(self.failures)} failures, {self.elapsed:.2f}s")


def random_instance(K: float, seed: int, max_window: int = 40, max_T: float = 5.0,
                    inf_fill: int = 3) -> Instance:
    """A random window, initial configuration, horizon and second-class site."""
    K = check_capacity(K)
    rng = np.random.default_rng(seed)
    L = int(rng.integers(4, max_window + 1))
    lo = int(rng.integers(-20, 1))
    top = inf_fill if is_infinite(K) else int(K)
    occ = rng.integers(0, top + 1, size=L)
    if not is_infinite(K) and np.all(occ >= K):
        occ[int(rng.integers(L))] = 0
    init = OccupancyConfig(K, lo, occ)
    T = float(rng.uniform(0.05, max_T))
    clocks = generate(RateSpec.single(), (lo, lo + L - 2), T, seed)
    free = np.flatnonzero(occ < K) if not is_infinite(K) else np.arange(L)
    X0 = lo + int(rng.choice(free))
    return Instance(K, init, clocks, T, X0, seed)


def _event_times(inst: Instance) -> list[float]:
    n = inst.clocks.count_until(inst.T)
    return [0.0] + [float(t) for t in inst.clocks.times[:n]] + [inst.T]


def _instances(cfg: VerifyConfig, Ks: Sequence[float], tag: int):
    for K in Ks:
        for r in range(cfg.instances):
            s = replica_seed(cfg.seed, tag * 1_000_003 + r + (0 if is_infinite(K) else
                                                               int(K) * 10_007))
            yield random_instance(K, s, cfg.max_window, cfg.max_T, cfg.inf_fill)


def _fail(inst: Instance, **info) -> dict:
    return {"K": str(inst.K), "seed": inst.seed, "lo": inst.init.lo,
            "sites": int(inst.init.occ.size), "T": inst.T, "X0": inst.X0, **info}


def check_envelope(inst: Instance) -> dict | None:
    z0 = height_from_occupancy(inst.init)
    direct = evolve_height(z0, inst.clocks, inst.T).final
    fam = xi_family(inst.clocks, inst.K, (z0.lo, z0.hi), inst.T)[-1]
    env = envelope_heights(fam, z0)
    if not np.array_equal(env, direct.z):
        bad = np.flatnonzero(env != direct.z)
        return _fail(inst, index=int(z0.lo + bad[0]), direct=int(direct.z[bad[0]]),
                     envelope=int(env[bad[0]]))
    return None


def check_second_class(inst: Instance) -> dict | None:
    T = inst.T
    _, p_dir = second_class_direct(inst.init, inst.X0, inst.clocks, T)
    p_dis = second_class_discrepancy(inst.init, inst.X0, inst.clocks, T)
    if not p_dir.same_path(p_dis):
        return _fail(inst, route="discrepancy", direct=p_dir.positions.tolist(),
                     other=p_dis.positions.tolist())
    times = _event_times(inst)
    var = np.array(variational_path(inst.init, inst.X0, inst.clocks, times), dtype=np.int64)
    ref = p_dir.sample(times)
    if not np.array_equal(var, ref):
        j = int(np.flatnonzero(var != ref)[0])
        return _fail(inst, route="variational", time=times[j], direct=int(ref[j]),
                     other=int(var[j]))
    return None


def check_conservation(inst: Instance) -> dict | None:
    times = _event_times(inst)
    tr_o = evolve_occupancy(inst.init, inst.clocks, inst.T, times)
    z0 = height_from_occupancy(inst.init)
    tr_z = evolve_height(z0, inst.clocks, inst.T, times)
    mass = inst.init.total()
    for (t, o), (_, h) in zip(tr_o.snapshots, tr_z.snapshots):
        if o.total() != mass:
            return _fail(inst, time=t, check="mass", mass=o.total(), expected=mass)
        if occupancy_from_height(h) != o:
            return _fail(inst, time=t, check="eta-z")
    return None


def check_ordering(inst: Instance) -> dict | None:
    z0 = height_from_occupancy(inst.init)
    fam = xi_family(inst.clocks, inst.K, (z0.lo, z0.hi), inst.T)[-1]
    for i in range(fam.lo, fam.hi + 1):
        if not ordering_holds(fam, z0, i):
            return _fail(inst, index=i)
    return None


def check_statements(inst: Instance) -> dict | None:
    times = _event_times(inst)
    checks = variational_path(inst.init, inst.X0, inst.clocks, times, verify=True)
    for t, c in zip(times, checks):
        if not c.consistent:
            return _fail(inst, time=t, X_inf=c.X_inf, X_sup=c.X_sup,
                         statements={k: v for k, v in c.statements.items() if not v})
    return None


def check_k1(inst: Instance) -> dict | None:
    s = k1_monitor(inst.init, inst.X0, inst.clocks, inst.T)
    if not s.monotone:
        return _fail(inst, violations=s.violations)
    return None


_CHECKS = {
    "envelope": (check_envelope, None),
    "second_class": (check_second_class, (1, 2, 3)),
    "conservation": (check_conservation, None),
    "ordering": (check_ordering, None),
    "statements": (check_statements, (1, 2, 3)),
    "k1": (check_k1, (1, 2, 3)),
}


def run_suite(name: str, cfg: VerifyConfig) -> SuiteResult:
    """Run one suite over ``cfg.instances`` instances per capacity."""
    if name not in _CHECKS:
        raise ValueError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
    fn, allowed = _CHECKS[name]
    Ks = [K for K in cfg.Ks if allowed is None or K in allowed]
    res = SuiteResult(name)
    start = time.perf_counter()
    for inst in _instances(cfg, Ks, SUITES.index(name) + 1):
        res.instances += 1
        bad = fn(inst)
        if bad is not None:
            res.failures.append(bad)
    res.elapsed = time.perf_counter() - start
    return res


def run_verify(cfg: VerifyConfig, suites: Sequence[str] = SUITES) -> list[SuiteResult]:
    return [run_suite(s, cfg) for s in suites]
