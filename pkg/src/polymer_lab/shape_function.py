"""Deterministic shape-function layer of the log-gamma polymer.

With bulk weights inverse-gamma(2 alpha):

    g(z)   = psi_1(2a - z) / psi_1(z)                    (0, 2a) -> (0, inf)
    f(x)   = x psi_0(g^-1(x)) + psi_0(2a - g^-1(x))      slope form
    f(x,y) = -y f(x/y)                                   two-argument form
    F(z)   = -[psi_1(2a-z) psi_0(z) + psi_1(z) psi_0(2a-z)] / [psi_1(z) + psi_1(2a-z)]

so that ``log Z(N, T) ~ -N f(T/N) = (N + T) F(g^-1(T/N))`` and
``f'(x) = psi_0(g^-1(x))``.  The ``check_*`` functions evaluate the gap
inequalities used to keep off-window paths and boundary contributions
subleading, and fit the (unnamed) constants in them on grids.
"""

import math
from dataclasses import dataclass

import numba as nb
import numpy as np

from .special_functions import _psi0, _psi1

__all__ = [
    "ShapeContext",
    "SlopeGapReport",
    "ExpansionReport",
    "g",
    "g_inverse",
    "f_slope",
    "f_prime",
    "f_two",
    "shape_F",
    "check_slope_gap",
    "check_rect_gap",
    "check_quadratic_expansion",
    "scan_slope_gap",
    "scan_rect_gap",
    "shape_table",
]


@dataclass(frozen=True)
class ShapeContext:
    """Bulk shape half-parameter; bulk weights are inverse-gamma(2 * alpha)."""

    alpha: float

    def __post_init__(self):
        if not (math.isfinite(self.alpha) and self.alpha > 0):
            raise ValueError(f"alpha must be positive, got {self.alpha!r}")


@dataclass(frozen=True)
class SlopeGapReport:
    N: int
    T: int
    k: int
    lhs: float
    rhs: float
    margin: float
    fitted_C0: float


@dataclass
class ExpansionReport:
    z: np.ndarray
    peak_gap: np.ndarray  # F(alpha) - F(alpha + z), must be >= 0
    C1: float
    C2: float
    C3: float
    C4: float
    remainder2: np.ndarray  # |g^-1(m) - alpha - C1 (m - 1)| at m = g(alpha + z)
    remainder4: np.ndarray  # |F(alpha + z) - F(alpha) + C3 z^2|

    @property
    def peak_ok(self):
        return bool(np.all(self.peak_gap >= 0.0))


# ---------------------------------------------------------------------------
# compiled kernels


@nb.njit(cache=True)
def _g(alpha, z):
    return _psi1(2.0 * alpha - z) / _psi1(z)


@nb.njit(cache=True)
def _g_inverse(alpha, x):
    """Bisection root of g(z) = x; returns nan when no bracket exists."""
    two_a = 2.0 * alpha
    lo = alpha
    hi = alpha
    if x < 1.0:
        while True:
            lo *= 0.5
            if lo == 0.0:
                return np.nan
            if _g(alpha, lo) < x:
                break
    elif x > 1.0:
        gap = alpha
        while True:
            gap *= 0.5
            hi = two_a - gap
            if hi == two_a:
                return np.nan
            if _g(alpha, hi) > x:
                break
    else:
        return alpha
    glo = _g(alpha, lo)
    ghi = _g(alpha, hi)
    for _ in range(2000):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        gm = _g(alpha, mid)
        if gm < x:
            lo, glo = mid, gm
        elif gm > x:
            hi, ghi = mid, gm
        else:
            return mid
    if abs(glo - x) <= abs(ghi - x):
        return lo
    return hi


@nb.njit(cache=True)
def _f_slope(alpha, x):
    if x == 0.0:
        return _psi0(2.0 * alpha)
    z = _g_inverse(alpha, x)
    return x * _psi0(z) + _psi0(2.0 * alpha - z)


@nb.njit(cache=True)
def _f_two(alpha, x, y):
    return -y * _f_slope(alpha, x / y)


@nb.njit(cache=True)
def _shape_F(alpha, z):
    w = 2.0 * alpha - z
    p1z = _psi1(z)
    p1w = _psi1(w)
    return -(p1w * _psi0(z) + p1z * _psi0(w)) / (p1z + p1w)


# ---------------------------------------------------------------------------
# public surface


def _ctx(ctx):
    return ctx if isinstance(ctx, ShapeContext) else ShapeContext(float(ctx))


def _check_interval(alpha, zeta):
    zeta = float(zeta)
    if not (0.0 < zeta < 2.0 * alpha):
        raise ValueError(f"zeta must lie in (0, {2 * alpha}), got {zeta!r}")
    return zeta


def g(ctx, zeta):
    ctx = _ctx(ctx)
    return float(_g(ctx.alpha, _check_interval(ctx.alpha, zeta)))


def g_inverse(ctx, x):
    """The unique zeta in (0, 2 alpha) with g(zeta) = x."""
    ctx = _ctx(ctx)
    x = float(x)
    if not (math.isfinite(x) and x > 0):
        raise ValueError(f"g_inverse needs a finite positive argument, got {x!r}")
    z = _g_inverse(ctx.alpha, x)
    if math.isnan(z):
        raise ArithmeticError(f"could not bracket g^-1({x}) for alpha={ctx.alpha}")
    return float(z)


def f_slope(ctx, x):
    """f(x) = x psi_0(g^-1(x)) + psi_0(2 alpha - g^-1(x)); f(0) = psi_0(2 alpha) by continuity."""
    ctx = _ctx(ctx)
    x = float(x)
    if x < 0 or not math.isfinite(x):
        raise ValueError(f"f needs a finite nonnegative slope, got {x!r}")
    if x > 0:
        g_inverse(ctx, x)  # surfaces bracketing failures
    return float(_f_slope(ctx.alpha, x))


def f_prime(ctx, x):
    return float(_psi0(g_inverse(ctx, x)))


def f_two(ctx, x, y):
    """f(x, y) = -y f(x / y): leading order of log Z over an x-by-y box."""
    ctx = _ctx(ctx)
    x, y = float(x), float(y)
    if not y > 0:
        raise ValueError(f"f(x, y) needs y > 0, got {y!r}")
    if x < 0:
        raise ValueError(f"f(x, y) needs x >= 0, got {x!r}")
    return -y * f_slope(ctx, x / y)


def shape_F(ctx, zeta):
    ctx = _ctx(ctx)
    return float(_shape_F(ctx.alpha, _check_interval(ctx.alpha, zeta)))


def _check_gap_inputs(N, T, k, delta, kappa):
    if not (isinstance(N, (int, np.integer)) and N >= 1):
        raise ValueError(f"N must be a positive integer, got {N!r}")
    if not 1 <= k <= T:
        raise ValueError(f"need 1 <= k <= T, got k={k}, T={T}")
    cap = 1.0 - kappa * N ** (-1.0 / 3.0 + delta)
    if not 0 < T / N <= cap:
        raise ValueError(f"need T/N in (0, {cap:.6g}], got T/N={T / N:.6g}")


def check_slope_gap(ctx, N, T, k, delta, kappa):
    """Linear gap: -N f(T/N) >= -N f((T-k)/N) - k psi_0(alpha) + C0 k N^(-1/3+delta).

    ``fitted_C0`` is the largest C0 for which this instance holds.
    """
    ctx = _ctx(ctx)
    _check_gap_inputs(N, T, k, delta, kappa)
    lhs = -N * f_slope(ctx, T / N)
    rhs = -N * f_slope(ctx, (T - k) / N) - k * _psi0(ctx.alpha)
    margin = lhs - rhs
    return SlopeGapReport(N, T, k, lhs, rhs, margin, margin / (k * N ** (-1.0 / 3.0 + delta)))


def check_rect_gap(ctx, N, T, k, delta, kappa):
    """Rectangle gap: -N f(T/N) >= -(N+T-k) psi_0(3 alpha/2) - k psi_0(alpha) + C0 N."""
    ctx = _ctx(ctx)
    _check_gap_inputs(N, T, k, delta, kappa)
    a = ctx.alpha
    lhs = -N * f_slope(ctx, T / N)
    rhs = -(N + T - k) * _psi0(1.5 * a) - k * _psi0(a)
    margin = lhs - rhs
    return SlopeGapReport(N, T, k, lhs, rhs, margin, margin / N)


def _gap_grid(N, delta, kappa):
    t_max = int(math.floor(N * (1.0 - kappa * N ** (-1.0 / 3.0 + delta))))
    ts = sorted({t for t in (max(1, N // 10), N // 2, t_max) if 1 <= t <= t_max})
    for T in ts:
        for k in sorted({1, max(1, T // 10), max(1, T // 2), T}):
            yield T, k


def scan_slope_gap(ctx, Ns, delta=0.1, kappa=0.5):
    """check_slope_gap over a default (T, k) grid for each N; returns the reports."""
    return [check_slope_gap(ctx, N, T, k, delta, kappa) for N in Ns for T, k in _gap_grid(N, delta, kappa)]


def scan_rect_gap(ctx, Ns, delta=0.1, kappa=0.5):
    return [check_rect_gap(ctx, N, T, k, delta, kappa) for N in Ns for T, k in _gap_grid(N, delta, kappa)]


def _richardson_second(fn, x0, h):
    d = lambda s: (fn(x0 + s) - 2.0 * fn(x0) + fn(x0 - s)) / (s * s)
    return (4.0 * d(h / 2) - d(h)) / 3.0


def _richardson_first(fn, x0, h):
    d = lambda s: (fn(x0 + s) - fn(x0 - s)) / (2.0 * s)
    return (4.0 * d(h / 2) - d(h)) / 3.0


def check_quadratic_expansion(ctx, z_grid, h=1e-2):
    """Peak and Taylor-remainder checks for F and g^-1 around zeta = alpha.

    C1 = d g^-1/dm at m = 1 and C3 = -F''(alpha)/2 come from Richardson
    finite differences; C2 and C4 are the smallest constants for which the
    second- and fourth-order remainder bounds hold on ``z_grid``.  The
    expansion of g^-1 is probed at m = g(alpha + z), so g^-1(m) - alpha = z.
    """
    ctx = _ctx(ctx)
    a = ctx.alpha
    z = np.asarray(z_grid, dtype=float)
    if np.any(np.abs(z) >= a):
        raise ValueError("z values must lie in (-alpha, alpha)")
    F_peak = float(_shape_F(a, a))
    F_vals = np.array([_shape_F(a, a + zi) for zi in z])
    m_vals = np.array([_g(a, a + zi) for zi in z])

    C1 = _richardson_first(lambda m: float(_g_inverse(a, m)), 1.0, h)
    C3 = -0.5 * _richardson_second(lambda s: float(_shape_F(a, s)), a, h)

    r2 = np.abs(z - C1 * (m_vals - 1.0))
    r4 = np.abs(F_vals - F_peak + C3 * z * z)
    nz = z != 0
    C2 = float(np.max(r2[nz] / (m_vals[nz] - 1.0) ** 2)) if nz.any() else 0.0
    C4 = float(np.max(r4[nz] / z[nz] ** 4)) if nz.any() else 0.0
    r2[~nz] = 0.0
    r4[~nz] = 0.0
    return ExpansionReport(z, F_peak - F_vals, C1, C2, C3, C4, r2, r4)


def shape_table(ctx, x0, x1, steps):
    """Rows (x, g^-1(x), f(x), F(g^-1(x)), f'(x)) on an evenly spaced grid of positive slopes."""
    ctx = _ctx(ctx)
    if steps < 1:
        raise ValueError("steps must be >= 1")
    xs = np.linspace(x0, x1, steps + 1) if steps > 1 or x0 != x1 else np.array([x0])
    rows = []
    for x in xs:
        zeta = g_inverse(ctx, x)
        rows.append((float(x), zeta, f_slope(ctx, x), float(_shape_F(ctx.alpha, zeta)), float(_psi0(zeta))))
    return rows
