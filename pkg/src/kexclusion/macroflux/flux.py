"""Concave flux functions, their convex conjugates and one-sided derivatives."""

from __future__ import annotations

import math
from collections.abc import Callable, Mapping
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from ..clocks import RateSpec
from ..lattice import INF, check_capacity, is_infinite

_SLOPE_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class PiecewiseLinear:
    """Continuous piecewise-linear function through ``(xs, ys)``.

    Beyond the outer nodes the function continues with ``left_slope`` and
    ``right_slope``.  Collinear interior nodes are kept; ``kinks`` lists the
    nodes where the slope actually changes.
    """

    xs: np.ndarray
    ys: np.ndarray
    left_slope: float
    right_slope: float

    def __post_init__(self):
        xs = np.asarray(self.xs, dtype=float)
        ys = np.asarray(self.ys, dtype=float)
        if xs.ndim != 1 or xs.shape != ys.shape or xs.size == 0:
            raise ValueError("nodes must be matching non-empty 1-d arrays")
        if np.any(np.diff(xs) <= 0):
            raise ValueError("nodes must be strictly increasing")
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)

    @property
    def slopes(self) -> np.ndarray:
        """Slopes of all pieces, outer ones included (length len(xs)+1)."""
        inner = np.diff(self.ys) / np.diff(self.xs)
        return np.concatenate(([self.left_slope], inner, [self.right_slope]))

    @property
    def kinks(self) -> np.ndarray:
        s = self.slopes
        jump = np.abs(np.diff(s)) > _SLOPE_TOL * np.maximum(1.0, np.abs(s[1:]))
        return self.xs[jump]

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.interp(x, self.xs, self.ys)
        with np.errstate(invalid="ignore"):
            out = np.where(x < self.xs[0], self.ys[0] + self.left_slope * (x - self.xs[0]), out)
            return np.where(x > self.xs[-1], self.ys[-1] + self.right_slope * (x - self.xs[-1]),
                            out)

    def one_sided(self, x: float) -> tuple[float, float]:
        s = self.slopes
        j = int(np.searchsorted(self.xs, x, side="left"))
        if j < self.xs.size and self.xs[j] == x:
            return float(s[j]), float(s[j + 1])
        return float(s[j]), float(s[j])

    def lipschitz(self) -> float:
        return float(np.max(np.abs(self.slopes)))


# --------------------------------------------------------------------------
# flux functions


@dataclass(frozen=True, eq=False)
class FluxFunction:
    """Concave flux on [0, K].

    Forms: ``closed-K1`` rho(1-rho), ``closed-Kinf`` rho/(1+rho), ``batch-Kinf``
    the batch series in q = rho/(1+rho), ``tabulated`` concave piecewise
    linear, and ``numeric`` (an arbitrary concave callable, e.g. recovered
    from a conjugate).
    """

    K: float
    form: str
    rates: tuple[tuple[int, float], ...] = ()
    table: PiecewiseLinear | None = None
    func: Callable[[float], float] | None = field(default=None, repr=False)

    # -- constructors -----------------------------------------------------
    @classmethod
    def k1(cls) -> FluxFunction:
        return cls(1, "closed-K1")

    @classmethod
    def kinf(cls) -> FluxFunction:
        return cls(INF, "closed-Kinf")

    @classmethod
    def batch_kinf(cls, rates: RateSpec | Mapping[int, float]) -> FluxFunction:
        spec = rates if isinstance(rates, RateSpec) else RateSpec.batch(rates)
        items = tuple((h, b) for h, b in spec.streams())
        if spec.mode == "single":
            return cls.kinf()
        return cls(INF, "batch-Kinf", items)

    @classmethod
    def tabulated(cls, rho, values, K: float) -> FluxFunction:
        K = check_capacity(K)
        if is_infinite(K):
            raise ValueError("tabulated fluxes need a finite K")
        rho = np.asarray(rho, dtype=float)
        values = np.asarray(values, dtype=float)
        if rho[0] != 0 or rho[-1] != K:
            raise ValueError("tabulation must span [0, K]")
        if abs(values[0]) > 1e-12:
            raise ValueError("flux must vanish at rho = 0")
        pl = PiecewiseLinear(rho, values, math.inf, -math.inf)
        s = np.diff(values) / np.diff(rho)
        if np.any(np.diff(s) > 1e-10 * max(1.0, float(np.abs(s).max()))):
            raise ValueError("tabulated flux is not concave")
        return cls(K, "tabulated", table=pl)

    @classmethod
    def numeric(cls, func: Callable[[float], float], K: float) -> FluxFunction:
        return cls(check_capacity(K), "numeric", func=func)

    # -- evaluation -------------------------------------------------------
    def _check_domain(self, rho: np.ndarray) -> None:
        hi = math.inf if is_infinite(self.K) else self.K + 1e-12
        if np.any(rho < -1e-12) or np.any(rho > hi) or np.any(np.isnan(rho)):
            raise ValueError(f"density outside [0, {self.K}]")

    def __call__(self, rho) -> np.ndarray:
        rho = np.asarray(rho, dtype=float)
        self._check_domain(rho)
        rho = np.clip(rho, 0.0, None if is_infinite(self.K) else float(self.K))
        if self.form == "closed-K1":
            return rho * (1.0 - rho)
        if self.form == "closed-Kinf":
            return np.where(np.isinf(rho), 1.0, rho / (1.0 + rho))
        if self.form == "batch-Kinf":
            q = np.where(np.isinf(rho), 1.0, rho / (1.0 + rho))
            out = np.zeros_like(q)
            for h, b in self.rates:
                out = out + b * sum(q**j for j in range(1, h + 1))
            return out
        if self.form == "tabulated":
            return self.table(rho)
        return np.vectorize(self.func, otypes=[float])(rho)

    def derivative(self, rho) -> np.ndarray:
        """f'(rho) for the smooth forms."""
        rho = np.asarray(rho, dtype=float)
        self._check_domain(rho)
        if self.form == "closed-K1":
            return 1.0 - 2.0 * rho
        if self.form == "closed-Kinf":
            return 1.0 / (1.0 + rho) ** 2
        if self.form == "batch-Kinf":
            q = rho / (1.0 + rho)
            out = np.zeros_like(q)
            for h, b in self.rates:
                out = out + b * sum(j * q ** (j - 1) for j in range(1, h + 1))
            return out / (1.0 + rho) ** 2
        raise ValueError(f"flux form {self.form!r} has no closed derivative")

    def one_sided(self, rho: float) -> tuple[float, float]:
        """(left, right) derivative at rho; nan where the side leaves [0, K]."""
        self._check_domain(np.asarray(rho))
        if self.form == "tabulated":
            left, right = self.table.one_sided(float(rho))
        elif self.form == "numeric":
            h = 1e-6
            f = self.func
            left = (f(rho) - f(rho - h)) / h if rho - h >= 0 else math.nan
            top = math.inf if is_infinite(self.K) else self.K
            right = (f(rho + h) - f(rho)) / h if rho + h <= top else math.nan
        else:
            d = float(self.derivative(rho))
            left = right = d
        if rho <= 0:
            left = math.nan
        if not is_infinite(self.K) and rho >= self.K:
            right = math.nan
        return float(left), float(right)

    @property
    def speed_range(self) -> tuple[float, float]:
        """(f'(K-), f'(0+)): slowest and fastest characteristic speeds."""
        if self.form == "closed-K1":
            return -1.0, 1.0
        if self.form == "closed-Kinf":
            return 0.0, 1.0
        if self.form == "batch-Kinf":
            return 0.0, float(sum(b for _, b in self.rates))
        if self.form == "tabulated":
            s = self.table.slopes[1:-1]
            return float(s[-1]), float(s[0])
        return self.one_sided(self.K)[0], self.one_sided(0.0)[1]

    @property
    def strictly_concave(self) -> bool:
        return self.form in ("closed-K1", "closed-Kinf", "batch-Kinf")

    def inverse_derivative(self, v: float) -> float:
        """The density rho with f'(rho) = v, clipped to [0, K] (smooth forms)."""
        lo, hi = self.speed_range
        if v >= hi:
            return 0.0
        if v <= lo:
            return math.inf if is_infinite(self.K) else float(self.K)
        if self.form == "closed-K1":
            return (1.0 - v) / 2.0
        if self.form == "closed-Kinf":
            return 1.0 / math.sqrt(v) - 1.0
        if self.form == "batch-Kinf":
            top = 1.0
            while float(self.derivative(top)) > v:
                top *= 2.0
            return brentq(lambda r: float(self.derivative(r)) - v, 0.0, top, xtol=1e-14)
        raise ValueError(f"flux form {self.form!r} is not smooth")

    def symmetry_defect(self, npts: int = 101) -> float:
        """max |f(rho) - f(K-rho)| on a grid (finite K)."""
        if is_infinite(self.K):
            raise ValueError("symmetry needs a finite K")
        r = np.linspace(0.0, float(self.K), npts)
        return float(np.max(np.abs(self(r) - self(self.K - r))))


def corner_flux(K: int = 2) -> FluxFunction:
    """min(rho, K - rho) with a single corner at K/2."""
    if K != 2:
        raise ValueError("the corner flux is defined for K = 2")
    return FluxFunction.tabulated([0.0, 1.0, 2.0], [0.0, 1.0, 0.0], 2)


# --------------------------------------------------------------------------
# conjugates


@dataclass(frozen=True, eq=False)
class ConjugateG:
    """Convex nonincreasing g(x) = sup_{0<=rho<=K} {f(rho) - x rho}.

    Forms: ``closed-K1``, ``closed-Kinf``, ``pl`` (exact piecewise linear),
    ``table`` (smooth, from a dense parametric tabulation) and ``numeric``
    (pointwise maximization).  For K = inf, g = +inf on x < 0.
    """

    K: float
    form: str
    pl: PiecewiseLinear | None = None
    flux: FluxFunction | None = field(default=None, repr=False)
    table: tuple[np.ndarray, np.ndarray, np.ndarray] | None = field(default=None, repr=False)

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.form == "closed-K1":
            return np.where(x >= 1, 0.0, np.where(x <= -1, -x, ((1.0 - x) / 2.0) ** 2))
        if self.form == "pl":
            return self.pl(x)
        with np.errstate(invalid="ignore"):
            if self.form == "closed-Kinf":
                out = np.where(x >= 1, 0.0, (1.0 - np.sqrt(np.abs(x))) ** 2)
            elif self.form == "table":
                xs, gs, _ = self.table
                out = np.where(x >= xs[-1], 0.0, np.interp(x, xs, gs))
            else:
                out = np.vectorize(self._numeric, otypes=[float])(x)
        return np.where(x < 0, math.inf, out) if is_infinite(self.K) else out

    def _numeric(self, x: float) -> float:
        f = self.flux
        if is_infinite(self.K):
            if x < 0:
                return math.inf
            top = 1.0
            while float(f(2 * top)) - 2 * top * x > float(f(top)) - top * x:
                top *= 2.0
            hi = 2 * top
        else:
            hi = float(self.K)
        res = minimize_scalar(lambda r: -(float(f(r)) - x * r), bounds=(0.0, hi),
                              method="bounded", options={"xatol": 1e-12})
        ends = [float(f(0.0)), float(f(hi)) - x * hi]
        return max(-float(res.fun), *ends)

    def derivative(self, x) -> np.ndarray:
        """g'(x) = -rho*(x) where g is differentiable."""
        x = np.asarray(x, dtype=float)
        if self.form == "closed-K1":
            return np.where(x >= 1, 0.0, np.where(x <= -1, -1.0, -(1.0 - x) / 2.0))
        if self.form == "closed-Kinf":
            with np.errstate(divide="ignore", invalid="ignore"):
                d = -(1.0 - np.sqrt(x)) / np.sqrt(x)
            return np.where(x >= 1, 0.0, d)
        if self.form == "table":
            xs, _, rs = self.table
            return np.where(x >= xs[-1], 0.0, -np.interp(x, xs, rs))
        left_right = np.array([self.one_sided(float(v)) for v in np.atleast_1d(x)])
        return left_right[:, 1].reshape(x.shape)

    def one_sided(self, x: float) -> tuple[float, float]:
        if is_infinite(self.K) and x < 0:
            raise ValueError("g is infinite for x < 0 when K = inf")
        if self.form == "pl":
            return self.pl.one_sided(float(x))
        if self.form == "numeric":
            h = 1e-6
            return (float(self(x) - self(x - h)) / h if not (is_infinite(self.K) and x - h < 0)
                    else -math.inf, float(self(x + h) - self(x)) / h)
        d = float(self.derivative(x))
        if is_infinite(self.K) and x == 0:
            return -math.inf, d
        return d, d

    @property
    def kinks(self) -> np.ndarray:
        return self.pl.kinks if self.form == "pl" else np.empty(0)

    def differentiable_at(self, x: float, tol: float = 1e-6) -> bool:
        """False at (or within ``tol`` of) a corner of g, or where g' is infinite."""
        if self.form == "pl":
            return not np.any(np.abs(self.kinks - x) <= tol)
        if is_infinite(self.K) and x <= tol:
            return False
        if self.form == "numeric":
            left, right = self.one_sided(x)
            return abs(left - right) <= 1e-4
        return True

    @property
    def speed_range(self) -> tuple[float, float]:
        """Interval outside which g is affine with slope -K or 0."""
        if self.flux is not None:
            return self.flux.speed_range
        if self.form == "closed-K1":
            return -1.0, 1.0
        if self.form == "closed-Kinf":
            return 0.0, 1.0
        k = self.pl.kinks
        return (float(k[0]), float(k[-1])) if k.size else (-1.0, 1.0)

    @property
    def strictly_convex(self) -> bool:
        return self.form in ("closed-K1", "closed-Kinf", "table")


def conjugate(f: FluxFunction) -> ConjugateG:
    """Legendre conjugate of a concave flux."""
    if f.form == "closed-K1":
        return ConjugateG(1, "closed-K1", flux=f)
    if f.form == "closed-Kinf":
        return ConjugateG(INF, "closed-Kinf", flux=f)
    if f.form == "tabulated":
        # g = max_j (f_j - x rho_j); its kinks sit at the segment slopes
        rho, fv = f.table.xs, f.table.ys
        s = np.diff(fv) / np.diff(rho)
        keep = np.concatenate(([True], np.abs(np.diff(s)) > _SLOPE_TOL))
        s = s[keep]
        xs = s[::-1]
        vals = np.max(fv[None, :] - xs[:, None] * rho[None, :], axis=1)
        return ConjugateG(f.K, "pl", PiecewiseLinear(xs, vals, -float(f.K), 0.0), flux=f)
    if f.form == "batch-Kinf":
        return ConjugateG(INF, "table", flux=f, table=_parametric_table(f))
    return ConjugateG(f.K, "numeric", flux=f)


def _parametric_table(f: FluxFunction, npts: int = 400_001):
    # x = f'(rho), g = f(rho) - rho f'(rho) along a dense rho grid
    u = np.linspace(0.0, 1.0, npts)[:-1]
    rho = u / (1.0 - u) ** 2
    x = f.derivative(rho)
    g = f(rho) - rho * x
    order = np.argsort(x)
    x, g, rho = x[order], g[order], rho[order]
    keep = np.concatenate(([True], np.diff(x) > 0))
    return x[keep], g[keep], rho[keep]


def flux_from_g(g: ConjugateG, K: float | None = None) -> FluxFunction:
    """f(rho) = inf_x {g(x) + rho x}; exact for piecewise-linear g."""
    K = check_capacity(g.K if K is None else K)
    if g.form == "pl":
        if is_infinite(K):
            raise ValueError("piecewise-linear conjugates need a finite K")
        xs, gv = g.pl.xs, g.pl.ys
        rho = np.unique(np.concatenate(([0.0, float(K)],
                                        np.clip(-g.pl.slopes, 0.0, float(K)))))
        vals = np.min(gv[None, :] + rho[:, None] * xs[None, :], axis=1)
        vals[0] = 0.0 if abs(vals[0]) < 1e-12 else vals[0]
        return FluxFunction.tabulated(rho, vals, K)
    lo, hi = g.speed_range
    if is_infinite(K):
        lo = 0.0

    def f(r: float) -> float:
        res = minimize_scalar(lambda x: float(g(x)) + r * x, bounds=(lo, hi),
                              method="bounded", options={"xatol": 1e-13})
        ends = [float(g(v)) + r * v for v in (lo, hi)]
        return min(float(res.fun), *ends)

    return FluxFunction.numeric(f, K)


def one_sided_derivatives(fn: FluxFunction | ConjugateG | PiecewiseLinear,
                          x: float) -> tuple[float, float]:
    """(left, right) derivatives from the representation itself."""
    return fn.one_sided(x)


def flux_bounds_k(rho) -> tuple[np.ndarray, np.ndarray]:
    """Lower and upper bounds min{rho(1-rho), 1/4} and rho/(1+rho) for 2 <= K < inf."""
    rho = np.asarray(rho, dtype=float)
    return np.minimum(rho * (1.0 - rho), 0.25), rho / (1.0 + rho)
