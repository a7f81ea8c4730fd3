"""Variational coupling: wedge processes, envelope identity, second-class formulas.

The auxiliary processes are stored through w^k(i-k, t) = z(k,0) - xi^k(i-k, t).
A ``XiFamily`` keeps, for a block of apexes k, the array
``W[i, k] = -xi^k(i-k, t)`` in absolute coordinates i, so that

    z(i, t) = max_k { z(k, 0) + W[i, k] }

is a row-wise max-reduction.  Every member of the family reads the same
clocks and uses the same frozen window edges as the height process it is
compared with, which makes the identities exact on a finite window.
"""

from __future__ import annotations

import math
import warnings
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from ._kernels import NEG
from .clocks import EpochTable, shift
from .dynamics import SecondClassPath, WindowMismatch, _check_cover, _stops
from .lattice import (
    HeightConfig,
    OccupancyConfig,
    height_from_occupancy,
    is_infinite,
    kernel_capacity,
)

XI_INF = -NEG


class WindowTooSmall(UserWarning):
    """A max or witness search touched the edge of its index window."""


def wedge_heights(K: float, idx: np.ndarray, apex: int | np.ndarray) -> np.ndarray:
    """-xi^k(i-k, 0): 0 for i >= k and K (i-k) for i < k (NEG when K = inf)."""
    d = np.asarray(idx)[..., None] - np.asarray(apex)[None, ...] if np.ndim(apex) else (
        np.asarray(idx) - apex)
    if is_infinite(K):
        return np.where(d >= 0, 0, NEG).astype(np.int64)
    return np.where(d >= 0, 0, int(K) * d).astype(np.int64)


@dataclass
class XiProcess:
    """xi^k(j, t) for j in ``lo .. lo+len(values)-1``; XI_INF encodes +infinity."""

    k: int
    K: float
    lo: int
    values: np.ndarray
    t: float

    @property
    def hi(self) -> int:
        return self.lo + self.values.size - 1

    def __getitem__(self, j: int) -> float:
        v = int(self.values[j - self.lo])
        return math.inf if v >= XI_INF // 2 else v


def evolve_xi(k: int, clocks: EpochTable, window: tuple[int, int], T: float,
              K: float) -> XiProcess:
    """Evolve xi^k on index window ``[jlo, jhi]`` reading D_{j+k}; edges frozen."""
    jlo, jhi = int(window[0]), int(window[1])
    if jhi - jlo < 1:
        raise ValueError("xi window needs at least two indices")
    _check_cover(clocks, jlo + 1 + k, jhi + k, T)
    if not clocks.single_mode():
        raise ValueError("xi processes need single-jump clocks")
    Ki, kinf = kernel_capacity(K)
    w = wedge_heights(K, np.arange(jlo, jhi + 1), 0)
    _kernels.height_advance(w, jlo, Ki, kinf, clocks.times, clocks.sites, 0,
                            float(T), k)
    xi = np.where(w <= NEG // 2, XI_INF, -w)
    return XiProcess(k, K, jlo, xi, float(T))


@dataclass
class XiFamily:
    """W[i - lo, k - k_lo] = -xi^k(i-k, t) on the absolute window ``[lo, hi]``."""

    K: float
    lo: int
    k_lo: int
    W: np.ndarray
    t: float

    @property
    def hi(self) -> int:
        return self.lo + self.W.shape[0] - 1

    @property
    def k_hi(self) -> int:
        return self.k_lo + self.W.shape[1] - 1

    @property
    def ks(self) -> np.ndarray:
        return np.arange(self.k_lo, self.k_hi + 1)

    def xi(self, k: int, j: int) -> float:
        v = int(self.W[j + k - self.lo, k - self.k_lo])
        return math.inf if v <= NEG // 2 else -v

    def candidates(self, z0: HeightConfig, i: int | np.ndarray) -> np.ndarray:
        """z(k,0) - xi^k(i-k,t) for every k of the family (rows follow ``i``)."""
        zk = z0.z[self.k_lo - z0.lo: self.k_hi - z0.lo + 1]
        return zk[None, :] + self.W[np.atleast_1d(i) - self.lo, :]


def xi_family(
    clocks: EpochTable,
    K: float,
    window: tuple[int, int],
    T: float,
    k_range: tuple[int, int] | None = None,
    snapshot_times: Iterable[float] = (),
) -> list[XiFamily]:
    """Evolve the wedge processes with apexes in ``k_range`` on ``window``.

    Returns one ``XiFamily`` per stop time (snapshot times and T).
    """
    lo, hi = int(window[0]), int(window[1])
    k_lo, k_hi = (lo, hi) if k_range is None else (int(k_range[0]), int(k_range[1]))
    if not lo <= k_lo <= k_hi <= hi:
        raise ValueError(f"apex range [{k_lo}, {k_hi}] not inside window [{lo}, {hi}]")
    _check_cover(clocks, lo + 1, hi, T)
    if not clocks.single_mode():
        raise ValueError("the variational coupling needs single-jump clocks")
    Ki, kinf = kernel_capacity(K)
    W = np.ascontiguousarray(
        wedge_heights(K, np.arange(lo, hi + 1), np.arange(k_lo, k_hi + 1)))
    out = []
    idx = 0
    for stop in _stops(T, snapshot_times):
        idx = _kernels.family_advance(W, lo, Ki, kinf, clocks.times, clocks.sites,
                                      idx, stop)
        out.append(XiFamily(K, lo, k_lo, W.copy(), stop))
    return out


@dataclass
class EnvelopeResult:
    value: int
    k_min: int
    k_max: int
    at_boundary: bool


def envelope_search(fam: XiFamily, z0: HeightConfig, i: int) -> EnvelopeResult:
    """max_k {z(k,0) - xi^k(i-k,t)} over the family's apexes, with argmax extremes."""
    cand = fam.candidates(z0, i)[0]
    v = int(cand.max())
    hits = np.flatnonzero(cand == v) + fam.k_lo
    k_min, k_max = int(hits[0]), int(hits[-1])
    # a window that already reaches the frozen edge cannot be enlarged
    at_edge = ((k_min == fam.k_lo and fam.k_lo > z0.lo)
               or (k_max == fam.k_hi and fam.k_hi < z0.hi))
    return EnvelopeResult(v, k_min, k_max, bool(at_edge))


def envelope(
    z0: HeightConfig,
    clocks: EpochTable,
    i: int,
    t: float,
    k_window: tuple[int, int] | None = None,
) -> int:
    """z(i, t) through the variational formula; warns if the window looks too small."""
    fam = xi_family(clocks, z0.K, (z0.lo, z0.hi), t, k_window)[-1]
    res = envelope_search(fam, z0, i)
    if res.at_boundary:
        warnings.warn(f"envelope max at apex window edge for i={i}", WindowTooSmall,
                      stacklevel=2)
    return res.value


def envelope_heights(fam: XiFamily, z0: HeightConfig) -> np.ndarray:
    """Envelope prediction of z(., t) on the whole window."""
    idx = np.arange(fam.lo, fam.hi + 1)
    return fam.candidates(z0, idx).max(axis=1)


def window_policy(i: int, t: float, n: float) -> tuple[int, int]:
    """Apex window [i - ceil(n r), i + ceil(n r)] with r = t + 2 (scaled time t)."""
    if not t > 0:
        raise ValueError("window policy needs t > 0")
    half = int(math.ceil(n * (t + 2.0)))
    return i - half, i + half


def ordering_holds(fam: XiFamily, z0: HeightConfig, i: int) -> bool:
    """Check w^l(i-l,t) <= w^k(i-k,t) + z(l,0) - z(k,0) for all k < l."""
    row = fam.W[i - fam.lo, :]
    # -xi^l <= -xi^k for all k < l: the row must be nonincreasing in k
    finite = row > NEG // 2
    r = row[finite]
    return bool(np.all(np.diff(r) <= 0)) and _finite_prefix(finite)


def _finite_prefix(finite: np.ndarray) -> bool:
    # for K = inf the finite apexes k <= i come first; no finite entry may follow -inf
    if finite.all():
        return True
    first_inf = int(np.argmin(finite))
    return not finite[first_inf:].any()


# --------------------------------------------------------------------------
# second-class particle through the basic coupling


def _tilde(z0: HeightConfig, X0: int) -> HeightConfig:
    zt = z0.z + (np.arange(z0.lo, z0.hi + 1) >= X0)
    return HeightConfig(z0.K, z0.lo, zt)


def second_class_discrepancy(
    init: OccupancyConfig,
    X0: int,
    clocks: EpochTable,
    T: float | None = None,
) -> SecondClassPath:
    """Track the unique discrepancy between z and z + 1{i >= X0} under shared clocks."""
    T = clocks.horizon if T is None else float(T)
    if not clocks.single_mode():
        raise ValueError("the height coupling needs single-jump clocks")
    if not init.lo <= X0 <= init.hi or init[X0] >= init.K:
        raise ValueError(f"X0={X0} must be a non-full site of the window")
    z0 = height_from_occupancy(init)
    _check_cover(clocks, z0.lo + 1, z0.hi, T)
    Ki, kinf = kernel_capacity(init.K)
    z = z0.z.copy()
    zt = _tilde(z0, X0).z.copy()
    nmax = clocks.count_until(T) + 1
    path_t = np.empty(nmax)
    path_x = np.empty(nmax, np.int64)
    path_t[0], path_x[0] = 0.0, X0
    _, X, npath, status = _kernels.pair_advance(
        z, zt, z0.lo, Ki, kinf, clocks.times, clocks.sites, 0, T, int(X0),
        path_t, path_x, 1)
    if status:
        raise RuntimeError("discrepancy between coupled height processes was lost")
    occ = np.diff(z)
    return SecondClassPath(path_t[:npath].copy(), path_x[:npath].copy(),
                           OccupancyConfig(init.K, init.lo, occ))


@dataclass
class VariationalCheck:
    """Outcome of the variational second-class formulas at one time."""

    X_inf: int
    X_sup: int | None = None
    statements: dict[str, bool] = field(default_factory=dict)

    @property
    def consistent(self) -> bool:
        return (self.X_sup is None or self.X_sup == self.X_inf) and all(
            self.statements.values())


def second_class_variational(
    z0: HeightConfig,
    zt: HeightConfig,
    fam: XiFamily,
    X0: int,
    verify: bool = False,
) -> int | VariationalCheck:
    """X(t) = inf{i : z(i,t) = z(k,0) - xi^k(i-k,t) for some k >= X0}.

    ``zt`` is z(., t) and ``fam`` the wedge family at the same time.  With
    ``verify=True`` also evaluates the supremum form over the shifted
    configuration and the four statements characterizing X(t), returning a
    ``VariationalCheck``.
    """
    idx = np.arange(fam.lo, fam.hi + 1)
    zi = zt.z[fam.lo - zt.lo: fam.hi - zt.lo + 1]
    cand = fam.candidates(z0, idx)
    right = fam.ks >= X0
    if not right.any():
        raise WindowMismatch("no apex k >= X0 in the family")
    witness_r = (cand[:, right] == zi[:, None]).any(axis=1)
    hits = np.flatnonzero(witness_r)
    if hits.size == 0:
        warnings.warn("no witness k >= X0 inside the window", WindowTooSmall, stacklevel=2)
        raise WindowMismatch("empty witness set")
    X = int(idx[hits[0]])
    if not verify:
        return X

    z0t = _tilde(z0, X0)
    cand_t = fam.candidates(z0t, idx)
    zti = cand_t.max(axis=1)  # envelope for the shifted process
    left = ~right
    below = idx < X
    st = {}
    st["lower_strict"] = bool(np.all((cand[below][:, right] < zi[below, None])))
    st["upper_witness"] = bool(np.all(witness_r[~below]))
    if left.any():
        wit_l = (cand_t[:, left] == zti[:, None]).any(axis=1)
        st["tilde_lower_witness"] = bool(np.all(wit_l[below]))
        st["tilde_upper_strict"] = bool(np.all(cand_t[~below][:, left] < zti[~below, None]))
        hl = np.flatnonzero(wit_l)
        X_sup = int(idx[hl[-1]]) + 1 if hl.size else None
    else:
        X_sup = None
    st["tilde_shift"] = bool(np.array_equal(zti - zi, (idx >= X).astype(np.int64)))
    return VariationalCheck(X, X_sup, st)


def variational_path(
    init: OccupancyConfig,
    X0: int,
    clocks: EpochTable,
    times: Sequence[float],
    verify: bool = False,
) -> list[int | VariationalCheck]:
    """X at each time in ``times`` from the variational formula on the full window."""
    z0 = height_from_occupancy(init)
    T = max(times)
    fams = xi_family(clocks, init.K, (z0.lo, z0.hi), T, snapshot_times=times)
    by_t = {f.t: f for f in fams}
    out = []
    for t in times:
        fam = by_t[float(t)]
        zt = HeightConfig(init.K, z0.lo, envelope_heights(fam, z0))
        out.append(second_class_variational(z0, zt, fam, X0, verify))
    return out


# --------------------------------------------------------------------------
# k1 monitor


@dataclass
class K1Series:
    """Maximal witness k1(t) sampled along a realization."""

    times: np.ndarray
    k1: np.ndarray
    X: np.ndarray
    at_edge: np.ndarray
    violations: list[tuple[float, int, int]]

    @property
    def monotone(self) -> bool:
        return not self.violations


def k1_monitor(
    init: OccupancyConfig,
    X0: int,
    clocks: EpochTable,
    T: float | None = None,
    sample_times: Sequence[float] | None = None,
) -> K1Series:
    """Record k1(t) = max{k >= X0 : z(X(t),t) = w^k(X(t)-k,t)} and check monotonicity.

    By default samples after every epoch that falls inside the window.
    Violations are reported as ``(time, previous k1, new k1)``; nothing is
    corrected.  ``at_edge`` marks samples where k1 sits on the last apex of
    the window, i.e. where the true maximal witness may lie beyond it.
    """
    T = clocks.horizon if T is None else float(T)
    z0 = height_from_occupancy(init)
    lo, hi = z0.lo, z0.hi
    _check_cover(clocks, lo + 1, hi, T)
    if init[X0] >= init.K:
        raise ValueError(f"X0={X0} at a full site")
    Ki, kinf = kernel_capacity(init.K)
    times = clocks.times
    if sample_times is None:
        nev = clocks.count_until(T)
        inside = (clocks.sites[:nev] > lo) & (clocks.sites[:nev] < hi)
        sample_times = np.concatenate(([0.0], times[:nev][inside]))
    W = np.ascontiguousarray(
        wedge_heights(init.K, np.arange(lo, hi + 1), np.arange(lo, hi + 1)))
    z = z0.z.copy()
    zt = _tilde(z0, X0).z.copy()
    X = int(X0)
    idx_w = idx_p = 0
    empty_t, empty_x = np.empty(0), np.empty(0, np.int64)
    ks = np.arange(lo, hi + 1)
    right = ks >= X0
    rec_k, rec_x, rec_e, viol = [], [], [], []
    for s in sample_times:
        idx_w = _kernels.family_advance(W, lo, Ki, kinf, times, clocks.sites, idx_w, s)
        idx_p, X, _, status = _kernels.pair_advance(
            z, zt, lo, Ki, kinf, times, clocks.sites, idx_p, s, X, empty_t, empty_x, 0)
        if status:
            raise RuntimeError("discrepancy lost")
        row = z0.z + W[X - lo, :]
        wit = np.flatnonzero(right & (row == z[X - lo]))
        if wit.size == 0:
            raise RuntimeError(f"no witness k >= X0 at time {s}")
        k1 = int(ks[wit[-1]])
        if rec_k and k1 < rec_k[-1]:
            viol.append((float(s), rec_k[-1], k1))
        rec_k.append(k1)
        rec_x.append(X)
        rec_e.append(k1 == hi)
    return K1Series(np.asarray(sample_times, float), np.array(rec_k), np.array(rec_x),
                    np.array(rec_e), viol)


# --------------------------------------------------------------------------
# restart at an intermediate time


@dataclass
class RestartCheck:
    tau: float
    t: float
    envelope_equal: bool
    X_restart: int
    X_direct: int

    @property
    def ok(self) -> bool:
        return self.envelope_equal and self.X_restart == self.X_direct


def restart(
    init: OccupancyConfig,
    X0: int,
    clocks: EpochTable,
    tau: float,
    t: float,
) -> RestartCheck:
    """Re-express z(., t) and X(t) from time tau using the clocks restarted at tau."""
    if not 0 <= tau < t <= clocks.horizon:
        raise ValueError("need 0 <= tau < t <= horizon")
    path = second_class_discrepancy(init, X0, clocks, t)
    z0 = height_from_occupancy(init)
    if tau > 0:
        mid = second_class_discrepancy(init, X0, clocks, tau)
        z_tau = height_from_occupancy(mid.final_config)
        X_tau = mid.final
    else:
        z_tau, X_tau = z0, X0
    # direct heights at t, anchored like z0
    z_t = height_from_occupancy(path.final_config)
    later = shift(clocks, tau)
    fam = xi_family(later, init.K, (z0.lo, z0.hi), t - tau)[-1]
    env = envelope_heights(fam, z_tau)
    X_r = second_class_variational(z_tau, HeightConfig(init.K, z0.lo, env), fam, X_tau)
    return RestartCheck(tau, t, bool(np.array_equal(env, z_t.z)), int(X_r), path.final)
