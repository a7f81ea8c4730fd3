"""Reproducible Poisson epoch streams for the graphical construction.

Every site ``i`` (and, in batch mode, every batch size ``h``) owns an
independent Poisson process D_i^h.  All streams of a table are generated up
front and merged into one globally time-ordered event sequence so that any
number of coupled processes can read the same realization.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field

import numpy as np

from ._kernels import time_order

_SEED_MASK = (1 << 64) - 1
_SITE_OFFSET = 1 << 31


@dataclass(frozen=True)
class RateSpec:
    """Jump rates: rate-1 single jumps, or batch sizes ``h`` with rates ``beta_h``."""

    mode: str = "single"
    batch_rates: tuple[tuple[int, float], ...] = ()

    def __post_init__(self):
        if self.mode not in ("single", "batch"):
            raise ValueError(f"unknown rate mode {self.mode!r}")
        if self.mode == "batch":
            seen = set()
            for h, beta in self.batch_rates:
                if int(h) != h or h < 1:
                    raise ValueError(f"batch size must be a positive integer, got {h}")
                if not beta >= 0 or not math.isfinite(beta):
                    raise ValueError(f"batch rate must be finite and >= 0, got {beta}")
                if h in seen:
                    raise ValueError(f"batch size {h} listed twice")
                seen.add(h)

    @classmethod
    def single(cls) -> RateSpec:
        return cls("single", ())

    @classmethod
    def batch(cls, rates: Mapping[int, float] | Iterable[tuple[int, float]]) -> RateSpec:
        items = rates.items() if isinstance(rates, Mapping) else rates
        return cls("batch", tuple(sorted((int(h), float(b)) for h, b in items)))

    def streams(self) -> list[tuple[int, float]]:
        """(batch size, rate) pairs; single mode is one rate-1 stream of size 1."""
        if self.mode == "single":
            return [(1, 1.0)]
        return [(h, b) for h, b in self.batch_rates]

    def check_capacity(self, K: float) -> None:
        """Reject batch sizes above a finite capacity that carry positive rate."""
        if math.isinf(K):
            return
        for h, b in self.streams():
            if h > K and b > 0:
                raise ValueError(f"batch size {h} exceeds capacity K={K} with rate {b}")

    def second_moment(self) -> float:
        return sum(b * h * h for h, b in self.streams())


@dataclass(frozen=True, eq=False)
class EpochTable:
    """Sorted epochs on ``(0, horizon]`` for sites ``site_lo..site_hi``.

    ``times``, ``sites`` and ``sizes`` are parallel arrays holding every
    epoch of every stream in increasing time order.  The raw times are kept
    together with an ``origin`` so that repeated shifts compose exactly.
    """

    raw_horizon: float
    site_lo: int
    site_hi: int
    raw_times: np.ndarray
    sites: np.ndarray
    sizes: np.ndarray
    origin: float = 0.0
    rate_spec: RateSpec = field(default_factory=RateSpec.single)

    @property
    def horizon(self) -> float:
        return self.raw_horizon - self.origin

    @property
    def times(self) -> np.ndarray:
        if self.origin == 0.0:
            return self.raw_times
        return self.raw_times - self.origin

    @property
    def site_range(self) -> tuple[int, int]:
        return self.site_lo, self.site_hi

    def __len__(self) -> int:
        return self.raw_times.size

    def epochs(self, site: int, h: int = 1) -> np.ndarray:
        """Epochs of the single stream (site, h), increasing."""
        mask = (self.sites == site) & (self.sizes == h)
        return self.times[mask]

    def streams(self) -> dict[tuple[int, int], np.ndarray]:
        out: dict[tuple[int, int], np.ndarray] = {}
        keys = np.stack([self.sites, self.sizes], axis=1)
        uniq = np.unique(keys, axis=0) if keys.size else keys
        for s, h in uniq:
            out[(int(s), int(h))] = self.epochs(int(s), int(h))
        return out

    def count_until(self, t: float) -> int:
        """Number of events with time <= t."""
        return int(np.searchsorted(self.times, t, side="right"))

    def identical(self, other: EpochTable) -> bool:
        return (
            self.horizon == other.horizon
            and self.site_range == other.site_range
            and np.array_equal(self.times, other.times)
            and np.array_equal(self.sites, other.sites)
            and np.array_equal(self.sizes, other.sizes)
        )

    def single_mode(self) -> bool:
        return bool(np.all(self.sizes == 1))

    @classmethod
    def from_streams(
        cls,
        streams: Mapping[int | tuple[int, int], Iterable[float]],
        horizon: float,
        site_range: tuple[int, int] | None = None,
    ) -> EpochTable:
        """Build a table from explicit epoch lists keyed by site or (site, h)."""
        if not horizon > 0:
            raise ValueError("horizon must be positive")
        ts, ss, hs = [], [], []
        for key, values in streams.items():
            site, h = (key, 1) if isinstance(key, (int, np.integer)) else key
            arr = np.asarray(sorted(float(v) for v in values), dtype=float)
            if arr.size and (arr[0] <= 0 or arr[-1] > horizon):
                raise ValueError(f"epochs of stream {key} must lie in (0, horizon]")
            if np.any(np.diff(arr) <= 0):
                raise ValueError(f"epochs of stream {key} must be strictly increasing")
            ts.append(arr)
            ss.append(np.full(arr.size, site, dtype=np.int64))
            hs.append(np.full(arr.size, h, dtype=np.int64))
        if site_range is None:
            keys = [k if isinstance(k, (int, np.integer)) else k[0] for k in streams]
            site_range = (min(keys), max(keys)) if keys else (0, 0)
        times = np.concatenate(ts) if ts else np.empty(0)
        sites = np.concatenate(ss) if ss else np.empty(0, np.int64)
        sizes = np.concatenate(hs) if hs else np.empty(0, np.int64)
        order = np.argsort(times, kind="stable")
        times = times[order]
        if np.any(np.diff(times) == 0):
            raise ValueError("two streams share an epoch")
        spec = RateSpec.single() if np.all(sizes == 1) else RateSpec.batch(
            {int(h): 1.0 for h in np.unique(sizes)}
        )
        return cls(float(horizon), int(site_range[0]), int(site_range[1]),
                   times, sites[order], sizes[order], 0.0, spec)


def _stream_rng(seed: int, site: int, h: int, attempt: int) -> np.random.Generator:
    key = [seed & _SEED_MASK, site + _SITE_OFFSET, h, attempt]
    return np.random.default_rng(np.random.SeedSequence(key))


def _draw_stream(seed: int, site: int, h: int, rate: float, horizon: float,
                 attempt: int) -> np.ndarray:
    while True:
        rng = _stream_rng(seed, site, h, attempt)
        count = rng.poisson(rate * horizon)
        # horizon - U[0, T) lies in (0, T]
        times = np.sort(horizon - rng.uniform(0.0, horizon, count))
        if count < 2 or np.all(np.diff(times) > 0):
            return times
        attempt += 1


def generate(
    rate_spec: RateSpec,
    site_range: tuple[int, int],
    horizon: float,
    seed: int,
) -> EpochTable:
    """Draw independent Poisson streams for every (site, batch size).

    Stream (i, h) is seeded from ``(seed, i, h)`` so a stream's epochs do not
    depend on the rest of the table.  Cross-stream ties, which have
    probability zero but do occur in floating point for very large tables,
    are removed by redrawing one of the two streams.
    """
    if not horizon > 0 or not math.isfinite(horizon):
        raise ValueError(f"horizon must be positive and finite, got {horizon}")
    lo, hi = int(site_range[0]), int(site_range[1])
    if hi < lo:
        raise ValueError(f"empty site range [{lo}, {hi}]")
    if abs(lo) >= _SITE_OFFSET or abs(hi) >= _SITE_OFFSET:
        raise ValueError("site indices must fit in 31 bits")
    seed = int(seed)
    horizon = float(horizon)
    streams = [(h, r) for h, r in rate_spec.streams() if r > 0]
    attempts: dict[tuple[int, int], int] = {}
    data: dict[tuple[int, int], np.ndarray] = {}
    for site in range(lo, hi + 1):
        for h, r in streams:
            data[(site, h)] = _draw_stream(seed, site, h, r, horizon, 0)

    while True:
        keys = list(data)
        if keys:
            times = np.concatenate([data[k] for k in keys])
            counts = [data[k].size for k in keys]
            sites = np.repeat(np.array([k[0] for k in keys], np.int64), counts)
            sizes = np.repeat(np.array([k[1] for k in keys], np.int64), counts)
        else:
            times = np.empty(0)
            sites = sizes = np.empty(0, np.int64)
        order = time_order(times, horizon)
        times, sites, sizes = times[order], sites[order], sizes[order]
        ties = np.flatnonzero(times[1:] == times[:-1])
        if ties.size == 0:
            break
        for p in ties:
            key = (int(sites[p + 1]), int(sizes[p + 1]))
            attempts[key] = attempts.get(key, 0) + 1
            rate = dict(streams)[key[1]]
            data[key] = _draw_stream(seed, key[0], key[1], rate, horizon,
                                     attempts[key] * 1_000_003)
    return EpochTable(horizon, lo, hi, times, sites, sizes, 0.0, rate_spec)


def shift(table: EpochTable, tau: float) -> EpochTable:
    """Restart the clocks at time ``tau``: keep epochs t > tau as t - tau."""
    if not 0 <= tau <= table.horizon:
        raise ValueError(f"shift {tau} outside [0, {table.horizon}]")
    if tau == 0:
        return table
    origin = table.origin + tau
    keep = table.raw_times > origin
    return EpochTable(table.raw_horizon, table.site_lo, table.site_hi,
                      table.raw_times[keep], table.sites[keep], table.sizes[keep],
                      origin, table.rate_spec)


def replica_seed(master: int, replica: int) -> int:
    """Derive an independent 64-bit seed for replica ``replica``."""
    ss = np.random.SeedSequence([int(master) & _SEED_MASK, int(replica), 0xC10C])
    return int(ss.generate_state(1, np.uint64)[0])
