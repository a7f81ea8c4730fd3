"""Hopf-Lax evaluation, extreme maximizers, characteristics and densities.

For base time s and data u(., s), the field evaluates

    u(x, t) = max_y { u(y, s) - (t-s) g((x-y)/(t-s)) }

over y in [x - (t-s) s_max, x - (t-s) s_min], where [s_min, s_max] is the
range of characteristic speeds.  Outside that range g is affine with slope
-K or 0 and the objective is monotone, so nothing is lost.
"""

from __future__ import annotations

import math
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.interpolate import PchipInterpolator
from scipy.optimize import minimize_scalar

from ..lattice import ProfileSpec, is_infinite
from .flux import ConjugateG, FluxFunction, PiecewiseLinear

# relative tolerance separating exact ties from genuinely smaller maxima
_TIE = 1e-11
_BISECT_TOL = 1e-6


@njit(cache=True)
def _maxplus(uy, gk, nx):
    # out[i] = max_k uy[i + (nk-1) - k] - gk[k], i.e. u at x_i from y = x_i - k d
    nk = gk.size
    out = np.empty(nx)
    for i in range(nx):
        best = -np.inf
        for k in range(nk):
            v = uy[i + nk - 1 - k] - gk[k]
            if v > best:
                best = v
        out[i] = best
    return out


def profile_antiderivative(profile: ProfileSpec) -> PiecewiseLinear:
    """u_0 as a piecewise-linear function with u_0(0) = 0."""
    bp = profile.breakpoints
    xs = bp if bp.size else np.array([0.0])
    return PiecewiseLinear(xs, profile.antiderivative(xs), profile.pieces[0][2],
                           profile.pieces[-1][2])


@dataclass(eq=False)
class SmoothTable:
    """Monotone C^1 (PCHIP) interpolant of tabulated u(., s), linear outside.

    Linear interpolation would put a small corner at every node; in a fan
    each such corner emits its own micro-fan of characteristics, so the
    restarted field uses a C^1 interpolant instead.
    """

    xs: np.ndarray
    ys: np.ndarray
    left_slope: float
    right_slope: float

    def __post_init__(self):
        # near-zero secant slopes overflow scipy's harmonic mean; it still returns 0
        with np.errstate(over="ignore", divide="ignore"):
            self._p = PchipInterpolator(self.xs, self.ys, extrapolate=False)
        self._dp = self._p.derivative()

    @property
    def slopes(self) -> np.ndarray:
        return np.concatenate(([self.left_slope], self._dp(self.xs), [self.right_slope]))

    @property
    def kinks(self) -> np.ndarray:
        return np.empty(0)

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        xc = np.clip(x, self.xs[0], self.xs[-1])
        out = self._p(xc)
        out = np.where(x < self.xs[0], self.ys[0] + self.left_slope * (x - self.xs[0]), out)
        return np.where(x > self.xs[-1], self.ys[-1] + self.right_slope * (x - self.xs[-1]),
                        out)

    def one_sided(self, x: float) -> tuple[float, float]:
        if x < self.xs[0]:
            return self.left_slope, self.left_slope
        if x > self.xs[-1]:
            return self.right_slope, self.right_slope
        d = float(self._dp(x))
        return d, d

    def lipschitz(self) -> float:
        return float(np.max(np.abs(self.slopes)))


@dataclass
class DensityResult:
    """rho^- and rho^+ (None where g has a corner) and the numeric slope of u."""

    rho_minus: float | None
    rho_plus: float | None
    rho_numeric: float
    y_minus: float
    y_plus: float

    @property
    def defined(self) -> bool:
        return self.rho_minus is not None and self.rho_plus is not None


@dataclass(eq=False)
class HopfLaxField:
    """Evaluator for u(x, t) from data ``u0`` at base time ``t0``.

    ``dy`` is the y-grid spacing, ``eps_u`` the argmax-set tolerance
    (default 10 dy Lip(u0)) and ``h`` the central-difference step
    (default 10 dy).
    """

    u0: PiecewiseLinear | SmoothTable
    g: ConjugateG
    dy: float = 1e-4
    eps_u: float | None = None
    h: float | None = None
    t0: float = 0.0

    def __post_init__(self):
        if not self.dy > 0:
            raise ValueError("dy must be positive")
        if self.eps_u is None:
            self.eps_u = 10.0 * self.dy * max(self.u0.lipschitz(), 1e-12)
        if self.h is None:
            self.h = 10.0 * self.dy
        slopes = self.u0.slopes
        if np.any(slopes < -1e-12):
            raise ValueError("u0 must be nondecreasing")
        if not is_infinite(self.g.K) and np.any(slopes > self.g.K + 1e-9):
            raise ValueError("u0 must be Lipschitz with constant <= K")
        # node sets added to every y-grid: corners of u0 and of g
        self._u0_nodes = self.u0.kinks if self.u0.kinks.size <= 5000 else np.empty(0)
        self._g_nodes = self.g.kinks

    @classmethod
    def from_profile(cls, profile: ProfileSpec, g: ConjugateG, **kw) -> HopfLaxField:
        profile.check_capacity(g.K)
        return cls(profile_antiderivative(profile), g, **kw)

    # -- objective --------------------------------------------------------
    def _range(self, x: float, t: float) -> tuple[float, float, float]:
        tau = t - self.t0
        s_min, s_max = self.g.speed_range
        return tau, x - tau * s_max, x - tau * s_min

    def _phi(self, x: float, tau: float, y) -> np.ndarray:
        s_min, s_max = self.g.speed_range
        v = np.clip((x - np.asarray(y, dtype=float)) / tau, s_min, s_max)
        return self.u0(y) - tau * self.g(v)

    def _grid(self, x: float, t: float):
        tau, a, b = self._range(x, t)
        n = max(2, int(math.ceil((b - a) / self.dy)))
        ys = a + self.dy * np.arange(n + 1)
        ys[-1] = b
        extra = [self._u0_nodes, x - tau * self._g_nodes]
        extra = np.concatenate(extra)
        extra = extra[(extra > a) & (extra < b)]
        if extra.size:
            ys = np.union1d(ys, extra)
        return tau, ys, self._phi(x, tau, ys)

    def _refine(self, x, tau, ys, vals, k) -> tuple[float, float]:
        lo = ys[max(k - 1, 0)]
        hi = ys[min(k + 1, ys.size - 1)]
        best = (float(ys[k]), float(vals[k]))
        if hi > lo:
            res = minimize_scalar(lambda y: -float(self._phi(x, tau, y)), bounds=(lo, hi),
                                  method="bounded", options={"xatol": 1e-12})
            if -res.fun > best[1]:
                best = (float(res.x), float(-res.fun))
        return best

    def _edge(self, x, tau, y_in, y_out, level) -> float:
        # bisect for the end of the set {phi >= level} between y_in (inside) and y_out
        for _ in range(60):
            if abs(y_out - y_in) < 1e-12:
                break
            mid = 0.5 * (y_in + y_out)
            if float(self._phi(x, tau, mid)) >= level:
                y_in = mid
            else:
                y_out = mid
        return y_in

    # -- public evaluations -----------------------------------------------
    def u(self, x: float, t: float) -> float:
        if t < self.t0:
            raise ValueError("t before the base time")
        if t == self.t0:
            return float(self.u0(x))
        tau, ys, vals = self._grid(x, t)
        k = int(np.argmax(vals))
        return self._refine(x, tau, ys, vals, k)[1]

    def u_grid(self, xs, t: float) -> np.ndarray:
        return np.array([self.u(float(x), t) for x in np.atleast_1d(xs)])

    def minimizers(self, x: float, t: float) -> tuple[float, float]:
        """Least and greatest maximizers y^-(x; t0, t) <= y^+(x; t0, t)."""
        if not t > self.t0:
            raise ValueError("minimizers need t > base time")
        tau, ys, vals = self._grid(x, t)
        M = float(vals.max())
        near = vals >= M - self.eps_u
        # contiguous runs of near-maximal nodes
        idx = np.flatnonzero(near)
        breaks = np.flatnonzero(np.diff(idx) > 1)
        runs = np.split(idx, breaks + 1)
        cands = []
        for run in runs:
            k = int(run[np.argmax(vals[run])])
            cands.append((run, k, *self._refine(x, tau, ys, vals, k)))
        top = max(c[3] for c in cands)
        tie = _TIE * max(1.0, abs(top))
        lows, highs = [], []
        for run, k, yc, vc in cands:
            if vc < top - tie:
                continue
            level = vc - tie
            flat = run[vals[run] >= level]
            yl, yr = yc, yc
            # flat pieces of the argmax set reach beyond the best node
            if flat.size and flat[0] < k:
                j = flat[0]
                yl = ys[j] if j == 0 else self._edge(x, tau, ys[j], ys[j - 1], level)
            if flat.size and flat[-1] > k:
                j = flat[-1]
                yr = ys[j] if j == ys.size - 1 else self._edge(x, tau, ys[j], ys[j + 1], level)
            lows.append(min(yl, yc))
            highs.append(max(yr, yc))
        return float(min(lows)), float(max(highs))

    def characteristics(self, b: float, t: float) -> tuple[float, float]:
        """x^-(b) = inf{x : y^+(x) >= b} and x^+(b) = sup{x : y^-(x) <= b}."""
        tau = t - self.t0
        if not tau > 0:
            raise ValueError("characteristics need t > base time")
        s_min, s_max = self.g.speed_range
        lo0, hi0 = b + tau * s_min, b + tau * s_max

        def bisect(pred_true_at_hi: Callable[[float], bool], lo, hi):
            while hi - lo > _BISECT_TOL:
                mid = 0.5 * (lo + hi)
                if pred_true_at_hi(mid):
                    hi = mid
                else:
                    lo = mid
            return 0.5 * (lo + hi)

        if self.minimizers(lo0, t)[1] >= b:
            x_minus = lo0
        else:
            x_minus = bisect(lambda x: self.minimizers(x, t)[1] >= b, lo0, hi0)
        if self.minimizers(hi0, t)[0] <= b:
            x_plus = hi0
        else:
            x_plus = bisect(lambda x: self.minimizers(x, t)[0] > b, lo0, hi0)
        return x_minus, x_plus

    def density(self, x: float, t: float, kink_tol: float = 1e-6) -> DensityResult:
        """Lax-Oleinik densities -g'((x - y^{-/+})/tau) and the central difference of u."""
        tau = t - self.t0
        ym, yp = self.minimizers(x, t)
        out = []
        for y in (ym, yp):
            v = (x - y) / tau
            if self.g.differentiable_at(v, kink_tol):
                out.append(float(-self.g.derivative(v)))
            else:
                out.append(None)
        num = (self.u(x + self.h, t) - self.u(x - self.h, t)) / (2.0 * self.h)
        return DensityResult(out[0], out[1], num, ym, yp)

    def density_function(self) -> Callable[[float, np.ndarray], np.ndarray]:
        """rho(x, s) as a callable: numeric slope of u for s > t0, u0' at s = t0."""

        def rho(x: float, s) -> np.ndarray:
            out = []
            for si in np.atleast_1d(s):
                if si <= self.t0:
                    out.append(self.u0.one_sided(float(x))[1])
                else:
                    out.append((self.u(x + self.h, si) - self.u(x - self.h, si)) / (2 * self.h))
            return np.array(out)

        return rho

    def restarted(self, s: float, span: tuple[float, float], dy_table: float | None = None
                  ) -> HopfLaxField:
        """Field with base time s and u(., s) tabulated on ``span``."""
        if not s > self.t0:
            return self
        d = self.dy if dy_table is None else dy_table
        n = int(math.ceil((span[1] - span[0]) / d))
        xs = span[0] + d * np.arange(n + 1)
        tau = s - self.t0
        s_min, s_max = self.g.speed_range
        # y = x - k d with k d / tau covering the speed range
        k_lo = int(math.floor(tau * s_min / d))
        k_hi = int(math.ceil(tau * s_max / d))
        ks = np.arange(k_lo, k_hi + 1)
        gk = tau * np.asarray(self.g(np.clip(ks * d / tau, s_min, s_max)), dtype=float)
        ygrid = span[0] + d * np.arange(-k_hi, n - k_lo + 1)
        vals = _maxplus(np.asarray(self.u0(ygrid), dtype=float), gk, n + 1)
        left = float(self.u0.left_slope)
        right = float(self.u0.right_slope)
        tab = SmoothTable(xs, vals, left, right)
        new = HopfLaxField(tab, self.g, self.dy, self.eps_u, self.h, s)
        new._u0_nodes = np.empty(0)
        return new


# --------------------------------------------------------------------------
# maximal-current comparator


@dataclass
class CurrentComparison:
    x: float
    t: float
    lambda_current: float
    rho_current: float
    verdict: str
    tol: float


def current_compare(
    field: HopfLaxField,
    flux: FluxFunction,
    lam: Callable[[float, np.ndarray], np.ndarray],
    x: float,
    t: float,
    steps: int = 2000,
    tol: float | None = None,
) -> CurrentComparison:
    """Compare time-integrated currents past x of a candidate lambda and of rho.

    The lambda current is a trapezoid sum of f(lambda(x, s)) on ``steps``
    intervals; the rho current is u(x, t0) - u(x, t), which is exact for
    the Hopf-Lax solution.
    """
    s = np.linspace(field.t0, t, steps + 1)
    lv = np.asarray(lam(x, s), dtype=float)
    top = math.inf if is_infinite(flux.K) else flux.K
    if np.any(lv < -1e-12) or np.any(lv > top + 1e-12):
        raise ValueError("candidate density leaves [0, K]")
    fl = flux(np.clip(lv, 0.0, top))
    j_lam = float(np.trapezoid(fl, s)) if hasattr(np, "trapezoid") else float(np.trapz(fl, s))
    j_rho = float(field.u0(x) - field.u(x, t))
    tol = 1e-3 * max(1.0, t - field.t0) if tol is None else tol
    if abs(j_lam - j_rho) <= tol:
        verdict = "equal"
    elif j_lam <= j_rho + tol:
        verdict = "maximal current holds"
    else:
        verdict = "violated"
    return CurrentComparison(x, t, j_lam, j_rho, verdict, tol)


def riemann_solution(flux: FluxFunction, left: float, right: float, at: float = 0.0
                     ) -> Callable[[float, np.ndarray], np.ndarray]:
    """Entropy solution of the Riemann problem for a smooth strictly concave flux."""

    def lam(x: float, s) -> np.ndarray:
        s = np.atleast_1d(np.asarray(s, dtype=float))
        out = np.empty_like(s)
        for i, si in enumerate(s):
            if si <= 0:
                out[i] = left if x < at else right
            elif left < right:
                sigma = float((flux(right) - flux(left)) / (right - left))
                out[i] = left if x - at < sigma * si else right
            elif left == right:
                out[i] = left
            else:
                v = (x - at) / si
                r = flux.inverse_derivative(v)
                out[i] = min(max(r, right), left)
        return out

    return lam


def standing_shock(left: float, right: float, at: float = 0.0
                   ) -> Callable[[float, np.ndarray], np.ndarray]:
    """Density jump frozen at ``at`` for all times (a weak solution iff f(left) = f(right))."""

    def lam(x: float, s) -> np.ndarray:
        return np.full(np.shape(np.atleast_1d(s)), left if x < at else right, dtype=float)

    return lam
