"""Occupancy and height configurations, and initial-condition samplers."""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from ._kernels import OCC_CAP

INF = math.inf


def is_infinite(K: float) -> bool:
    return isinstance(K, float) and math.isinf(K)


def check_capacity(K: float) -> float:
    """Normalize ``K`` to an int >= 1 or ``math.inf``."""
    if is_infinite(K) and K > 0:
        return INF
    if int(K) != K or K < 1:
        raise ValueError(f"capacity K must be a positive integer or inf, got {K}")
    return int(K)


def kernel_capacity(K: float) -> tuple[int, bool]:
    """(integer K, is_infinite) pair in the form the numba kernels expect."""
    if is_infinite(K):
        return 0, True
    return int(K), False


def buffer_width(T: float) -> int:
    """Frozen-boundary margin so influence from the window edge stays out of reach."""
    return int(math.ceil(T + 6.0 * math.sqrt(T))) + 10


@dataclass(eq=False)
class OccupancyConfig:
    """Occupation numbers eta(i) for sites ``lo .. lo+len(occ)-1``."""

    K: float
    lo: int
    occ: np.ndarray

    def __post_init__(self):
        self.K = check_capacity(self.K)
        self.lo = int(self.lo)
        self.occ = np.asarray(self.occ, dtype=np.int64).copy()
        if self.occ.ndim != 1 or self.occ.size == 0:
            raise ValueError("occupancy must be a non-empty 1-d array")
        if self.occ.min() < 0:
            raise ValueError("negative occupancy")
        cap = OCC_CAP if is_infinite(self.K) else self.K
        if self.occ.max() > cap:
            raise ValueError(f"occupancy exceeds capacity {cap}")

    @property
    def hi(self) -> int:
        return self.lo + self.occ.size - 1

    @property
    def sites(self) -> np.ndarray:
        return np.arange(self.lo, self.hi + 1)

    def __getitem__(self, site: int) -> int:
        j = site - self.lo
        if not 0 <= j < self.occ.size:
            raise IndexError(f"site {site} outside window [{self.lo}, {self.hi}]")
        return int(self.occ[j])

    def total(self) -> int:
        return int(self.occ.sum())

    def copy(self) -> OccupancyConfig:
        return OccupancyConfig(self.K, self.lo, self.occ.copy())

    def __eq__(self, other):
        if not isinstance(other, OccupancyConfig):
            return NotImplemented
        return (self.K == other.K and self.lo == other.lo
                and np.array_equal(self.occ, other.occ))


@dataclass(eq=False)
class HeightConfig:
    """Labeled-particle heights z(i) for indices ``lo .. lo+len(z)-1``.

    Consecutive increments satisfy 0 <= z(i+1) - z(i) <= K.  A height config
    on ``[lo, hi]`` corresponds to occupancies on sites ``[lo+1, hi]``.
    """

    K: float
    lo: int
    z: np.ndarray

    def __post_init__(self):
        self.K = check_capacity(self.K)
        self.lo = int(self.lo)
        self.z = np.asarray(self.z, dtype=np.int64).copy()
        if self.z.ndim != 1 or self.z.size < 2:
            raise ValueError("height config needs at least two indices")
        check_increments(self.z, self.K)

    @property
    def hi(self) -> int:
        return self.lo + self.z.size - 1

    def __getitem__(self, i: int) -> int:
        j = i - self.lo
        if not 0 <= j < self.z.size:
            raise IndexError(f"index {i} outside [{self.lo}, {self.hi}]")
        return int(self.z[j])

    def copy(self) -> HeightConfig:
        return HeightConfig(self.K, self.lo, self.z.copy())

    def __eq__(self, other):
        if not isinstance(other, HeightConfig):
            return NotImplemented
        return (self.K == other.K and self.lo == other.lo
                and np.array_equal(self.z, other.z))


def check_increments(z: np.ndarray, K: float) -> None:
    d = np.diff(z)
    if d.size and d.min() < 0:
        raise ValueError("height increments must be >= 0")
    if not is_infinite(K) and d.size and d.max() > K:
        raise ValueError(f"height increments must be <= K={K}")


def height_from_occupancy(cfg: OccupancyConfig,
                          anchor: tuple[int, int] | None = None) -> HeightConfig:
    """Partial sums of ``cfg`` with z(i0) = v0; default anchor z(lo-1) = 0."""
    i0, v0 = (cfg.lo - 1, 0) if anchor is None else anchor
    zlo = cfg.lo - 1
    z = np.concatenate(([0], np.cumsum(cfg.occ)))
    j0 = i0 - zlo
    if not 0 <= j0 < z.size:
        raise ValueError(f"anchor index {i0} outside [{zlo}, {cfg.hi}]")
    z = z - z[j0] + int(v0)
    return HeightConfig(cfg.K, zlo, z)


def occupancy_from_height(h: HeightConfig) -> OccupancyConfig:
    """eta(i) = z(i) - z(i-1) on sites ``[h.lo+1, h.hi]``."""
    return OccupancyConfig(h.K, h.lo + 1, np.diff(h.z))


@dataclass(frozen=True)
class ProfileSpec:
    """Piecewise-constant macroscopic density rho_0 on a partition ``(a, b, rho)``.

    Endpoints may be infinite.  Beyond a finite outer endpoint the outermost
    density is continued as a constant, which is how Riemann data such as
    ``[(-inf, 0, 0.8), (0, inf, 0.2)]`` and bounded profiles are treated
    uniformly.
    """

    pieces: tuple[tuple[float, float, float], ...]

    def __post_init__(self):
        pieces = tuple((float(a), float(b), float(r)) for a, b, r in self.pieces)
        if not pieces:
            raise ValueError("profile needs at least one piece")
        for (a, b, r) in pieces:
            if not a < b:
                raise ValueError(f"empty interval ({a}, {b})")
            if not r >= 0 or math.isinf(r):
                raise ValueError(f"density {r} out of range")
        for (_, b0, _), (a1, _, _) in zip(pieces, pieces[1:]):
            if b0 != a1:
                raise ValueError("profile intervals must be contiguous")
        object.__setattr__(self, "pieces", pieces)

    @classmethod
    def constant(cls, rho: float) -> ProfileSpec:
        return cls(((-INF, INF, rho),))

    @classmethod
    def riemann(cls, left: float, right: float, at: float = 0.0) -> ProfileSpec:
        return cls(((-INF, at, left), (at, INF, right)))

    def check_capacity(self, K: float) -> None:
        for _, _, r in self.pieces:
            if r > K:
                raise ValueError(f"density {r} exceeds capacity {K}")

    @property
    def breakpoints(self) -> np.ndarray:
        pts = [p[0] for p in self.pieces] + [self.pieces[-1][1]]
        return np.array([p for p in pts if math.isfinite(p)])

    @property
    def max_density(self) -> float:
        return max(r for _, _, r in self.pieces)

    def density(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        edges = np.array([p[1] for p in self.pieces[:-1]])
        rhos = np.array([p[2] for p in self.pieces])
        return rhos[np.searchsorted(edges, x, side="right")]

    def antiderivative(self, x) -> np.ndarray:
        """u_0(x) with u_0(0) = 0 and u_0(b) - u_0(a) = integral of rho_0."""
        x = np.asarray(x, dtype=float)
        out = np.zeros(np.shape(x))
        last = len(self.pieces) - 1
        for p, (a, b, r) in enumerate(self.pieces):
            a = -INF if p == 0 else a
            b = INF if p == last else b
            out = out + r * (np.clip(x, a, b) - min(max(0.0, a), b))
        return out

    def integral(self, a: float, b: float) -> float:
        return float(self.antiderivative(b) - self.antiderivative(a))

    def lipschitz(self) -> float:
        return self.max_density


def sample_initial(
    profile: ProfileSpec,
    n: int,
    window: tuple[int, int],
    K: float,
    family: str = "deterministic",
    seed: int | None = None,
) -> OccupancyConfig:
    """Initial occupancies on sites ``window`` realizing the profile at scale n.

    ``deterministic`` rounds the scaled antiderivative, so every interval sum
    is within 1 of ``n * integral`` at lattice-aligned endpoints.
    ``bernoulli`` (K = 1) and ``geometric`` (K = inf) draw independent sites
    with the cell-averaged density.
    """
    K = check_capacity(K)
    profile.check_capacity(K)
    lo, hi = int(window[0]), int(window[1])
    if hi < lo:
        raise ValueError("empty window")
    edges = np.arange(lo - 1, hi + 1) / n
    cum = n * profile.antiderivative(edges)
    if family in ("deterministic", "deterministic-rounding"):
        c = np.floor(cum + 1e-9)
        occ = np.diff(c).astype(np.int64)
        return OccupancyConfig(K, lo, occ)
    rho = np.diff(cum)
    if seed is None:
        raise ValueError(f"family {family!r} needs a seed")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed) & ((1 << 64) - 1), 0x1A77]))
    if family == "bernoulli":
        if K != 1:
            raise ValueError("bernoulli initial data requires K=1")
        if rho.max() > 1 + 1e-12:
            raise ValueError("bernoulli density must lie in [0, 1]")
        occ = (rng.random(rho.size) < rho).astype(np.int64)
    elif family == "geometric":
        if not is_infinite(K):
            raise ValueError("geometric initial data requires K=inf")
        occ = rng.geometric(1.0 / (1.0 + rho)) - 1
    else:
        raise ValueError(f"unknown initial family {family!r}")
    return OccupancyConfig(K, lo, occ)


def interval_sum(cfg: OccupancyConfig, n: int, a: float, b: float) -> int:
    """Sum of eta(i) over sites [na]+1 .. [nb]."""
    # same 1e-9 snap as the sampler, so float endpoints like 1/3 land on the lattice
    i0 = math.floor(n * a + 1e-9) + 1
    i1 = math.floor(n * b + 1e-9)
    if i0 < cfg.lo or i1 > cfg.hi:
        raise ValueError("interval not inside the window")
    return int(cfg.occ[i0 - cfg.lo: i1 - cfg.lo + 1].sum())


def window_for(intervals: Sequence[tuple[float, float]], n: int, T: float) -> tuple[int, int]:
    """Simulation window covering scaled intervals plus a frozen-edge buffer."""
    a = min(p[0] for p in intervals)
    b = max(p[1] for p in intervals)
    pad = buffer_width(T)
    return math.floor(n * a) - pad, math.floor(n * b) + pad
