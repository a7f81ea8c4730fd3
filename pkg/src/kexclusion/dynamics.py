"""Exact event-driven evolution of the occupancy, height and second-class processes.

Every evolution reads a shared ``EpochTable`` and processes its epochs in
global time order.  Sites outside the configuration window never fire, and
an epoch at site i acts only if both i and i+1 are inside the window, so the
window edges are frozen and the particle count is conserved.
"""

from __future__ import annotations

import csv
import io
from collections.abc import Iterable
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .clocks import EpochTable
from .lattice import (
    HeightConfig,
    OccupancyConfig,
    check_increments,
    kernel_capacity,
)


class WindowMismatch(ValueError):
    """The clocks do not cover the active sites of a configuration."""


@dataclass
class Trajectory:
    """Snapshots at requested times plus an optional event log.

    ``event_log`` rows are ``(time, site, batch size, particles moved)``.
    """

    snapshots: list[tuple[float, OccupancyConfig | HeightConfig]]
    event_log: np.ndarray | None = None

    @property
    def final(self) -> OccupancyConfig | HeightConfig:
        return self.snapshots[-1][1]

    @property
    def times(self) -> list[float]:
        return [t for t, _ in self.snapshots]

    def at(self, t: float) -> OccupancyConfig | HeightConfig:
        for s, cfg in self.snapshots:
            if s == t:
                return cfg
        raise KeyError(f"no snapshot at time {t}")

    def to_csv(self, fh=None) -> str | None:
        """Write ``time,site,value`` rows (LF line endings)."""
        own = fh is None
        if own:
            fh = io.StringIO()
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["time", "site", "value"])
        for t, cfg in self.snapshots:
            vals = cfg.occ if isinstance(cfg, OccupancyConfig) else cfg.z
            for i, v in enumerate(vals):
                w.writerow([repr(float(t)), cfg.lo + i, int(v)])
        return fh.getvalue() if own else None


@dataclass
class SecondClassPath:
    """Piecewise-constant path of a second-class particle: jump times and sites."""

    times: np.ndarray
    positions: np.ndarray
    final_config: OccupancyConfig | None = field(default=None, repr=False)

    def at(self, t: float) -> int:
        j = int(np.searchsorted(self.times, t, side="right")) - 1
        return int(self.positions[max(j, 0)])

    @property
    def final(self) -> int:
        return int(self.positions[-1])

    def sample(self, ts: Iterable[float]) -> np.ndarray:
        return np.array([self.at(t) for t in ts], dtype=np.int64)

    def same_path(self, other: SecondClassPath) -> bool:
        return (np.array_equal(self.times, other.times)
                and np.array_equal(self.positions, other.positions))


def _check_cover(clocks: EpochTable, lo: int, hi: int, T: float) -> None:
    # active sites are lo .. hi-1
    if hi - 1 >= lo and (clocks.site_lo > lo or clocks.site_hi < hi - 1):
        raise WindowMismatch(
            f"clocks cover sites [{clocks.site_lo}, {clocks.site_hi}] but the "
            f"window needs [{lo}, {hi - 1}]"
        )
    if T > clocks.horizon:
        raise WindowMismatch(f"time {T} beyond clock horizon {clocks.horizon}")
    if T < 0:
        raise ValueError("negative time")


def _stops(T: float, snapshot_times: Iterable[float]) -> list[float]:
    stops = sorted({float(s) for s in snapshot_times if 0 <= s <= T} | {float(T)})
    return stops


def evolve_occupancy(
    init: OccupancyConfig,
    clocks: EpochTable,
    T: float | None = None,
    snapshot_times: Iterable[float] = (),
    record_events: bool = False,
) -> Trajectory:
    """Run the K-exclusion (or batch) dynamics from ``init`` up to time T."""
    T = clocks.horizon if T is None else float(T)
    _check_cover(clocks, init.lo, init.hi, T)
    K, kinf = kernel_capacity(init.K)
    occ = init.occ.copy()
    times, sites, sizes = clocks.times, clocks.sites, clocks.sizes
    nmax = clocks.count_until(T) if record_events else 0
    log_idx = np.empty(nmax, np.int64)
    log_moved = np.empty(nmax, np.int64)
    nlog = 0
    idx = 0
    snaps = []
    for stop in _stops(T, snapshot_times):
        idx, nlog, status = _kernels.occupancy_advance(
            occ, init.lo, K, kinf, times, sites, sizes, idx, stop,
            log_idx, log_moved, nlog)
        if status:
            raise OverflowError("occupancy exceeded the K=inf practical cap")
        snaps.append((stop, OccupancyConfig(init.K, init.lo, occ)))
    log = None
    if record_events:
        ii = log_idx[:nlog]
        log = np.rec.fromarrays(
            [times[ii], sites[ii], sizes[ii], log_moved[:nlog]],
            names="time,site,size,moved")
    return Trajectory(snaps, log)


def evolve_height(
    init: HeightConfig,
    clocks: EpochTable,
    T: float | None = None,
    snapshot_times: Iterable[float] = (),
) -> Trajectory:
    """Run the height process under the max-rule at epochs of D_i.

    Only single jumps are supported; batch tables are rejected because the
    batch analogue of the max-rule is not used here (difference the
    occupancy process instead).
    """
    T = clocks.horizon if T is None else float(T)
    if not clocks.single_mode():
        raise ValueError("height evolution needs single-jump clocks")
    # height indices lo..hi drive occupancy sites lo+1..hi; active sites lo+1..hi-1
    _check_cover(clocks, init.lo + 1, init.hi, T)
    K, kinf = kernel_capacity(init.K)
    z = init.z.copy()
    idx = 0
    snaps = []
    for stop in _stops(T, snapshot_times):
        idx = _kernels.height_advance(z, init.lo, K, kinf, clocks.times,
                                      clocks.sites, idx, stop, 0)
        check_increments(z, init.K)
        snaps.append((stop, HeightConfig(init.K, init.lo, z)))
    return Trajectory(snaps)


def second_class_direct(
    init: OccupancyConfig,
    X0: int,
    clocks: EpochTable,
    T: float | None = None,
    snapshot_times: Iterable[float] = (),
) -> tuple[Trajectory, SecondClassPath]:
    """Evolve eta together with a second-class particle started at X0.

    At an epoch of D_i with X = i the particle steps right iff it would be
    moved in the coupled configuration with one extra particle at i; at an
    epoch of D_{i-1} it steps left iff arriving first-class particles fill
    site i.  For single jumps these are the rules eta(i) = 0, eta(i+1) < K
    and eta(i-1) >= 1, eta(i) = K-1 respectively.
    """
    T = clocks.horizon if T is None else float(T)
    _check_cover(clocks, init.lo, init.hi, T)
    if not init.lo <= X0 <= init.hi:
        raise ValueError(f"X0={X0} outside window")
    if init[X0] >= init.K:
        raise ValueError(f"second-class particle placed at full site {X0}")
    K, kinf = kernel_capacity(init.K)
    occ = init.occ.copy()
    nmax = clocks.count_until(T) + 1
    path_t = np.empty(nmax)
    path_x = np.empty(nmax, np.int64)
    path_t[0] = 0.0
    path_x[0] = X0
    npath = 1
    x = int(X0)
    idx = 0
    snaps = []
    for stop in _stops(T, snapshot_times):
        idx, x, npath, status = _kernels.second_class_advance(
            occ, init.lo, K, kinf, clocks.times, clocks.sites, clocks.sizes,
            idx, stop, x, path_t, path_x, npath)
        if status:
            raise OverflowError("occupancy exceeded the K=inf practical cap")
        snaps.append((stop, OccupancyConfig(init.K, init.lo, occ)))
    path = SecondClassPath(path_t[:npath].copy(), path_x[:npath].copy(), snaps[-1][1])
    return Trajectory(snaps), path


def second_class_final(init: OccupancyConfig, X0: int, clocks: EpochTable,
                       checkpoints: Iterable[float]) -> np.ndarray:
    """Positions X(t) at the given times, without keeping the full path."""
    pts = sorted(float(t) for t in checkpoints)
    _check_cover(clocks, init.lo, init.hi, pts[-1])
    if init[X0] >= init.K:
        raise ValueError(f"second-class particle placed at full site {X0}")
    K, kinf = kernel_capacity(init.K)
    occ = init.occ.copy()
    empty_t = np.empty(0)
    empty_x = np.empty(0, np.int64)
    x = int(X0)
    idx = 0
    out = []
    for stop in pts:
        idx, x, _, status = _kernels.second_class_advance(
            occ, init.lo, K, kinf, clocks.times, clocks.sites, clocks.sizes,
            idx, stop, x, empty_t, empty_x, 0)
        if status:
            raise OverflowError("occupancy exceeded the K=inf practical cap")
        out.append(x)
    return np.array(out, dtype=np.int64)
