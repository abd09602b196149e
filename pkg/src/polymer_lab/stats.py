"""Numerical-statistics kernels: stable log arithmetic, KS comparison, tail
curves, exponent regression and the fractional-moment (Markov) tail bound
for thin rectangles."""

import math
from dataclasses import dataclass

import numpy as np

from .special_functions import log_gamma

__all__ = [
    "logsumexp",
    "logdiffexp",
    "Sample",
    "KSResult",
    "ks_critical_value",
    "ks_two_sample",
    "fit_exponent",
    "chernoff_bound_thin",
    "chernoff_bound_thin_min",
    "TailCurve",
    "empirical_tail",
    "dominance_violation",
    "Moments",
    "moment_agreement",
]

NEG_INF = -math.inf


def logsumexp(a, b):
    """log(e^a + e^b); -inf acts as the additive identity."""
    if a == NEG_INF:
        return float(b)
    if b == NEG_INF:
        return float(a)
    if a < b:
        a, b = b, a
    return float(a + math.log1p(math.exp(b - a)))


def logdiffexp(a, b):
    """log(e^a - e^b) for a >= b; equal arguments give -inf."""
    if b > a:
        raise ValueError(f"logdiffexp needs a >= b, got a={a}, b={b}")
    if b == NEG_INF:
        return float(a)
    if a == b:
        return NEG_INF
    return float(a + math.log(-math.expm1(b - a)))


@dataclass
class Sample:
    values: np.ndarray
    weights: np.ndarray | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).ravel()
        if self.values.size == 0:
            raise ValueError("empty sample")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("sample values must be finite")
        if self.weights is not None:
            self.weights = np.asarray(self.weights, dtype=float).ravel()
            if self.weights.shape != self.values.shape or np.any(self.weights < 0) or self.weights.sum() <= 0:
                raise ValueError("weights must be nonnegative, not all zero, one per value")

    def __len__(self):
        return self.values.size


def _as_sample(s):
    return s if isinstance(s, Sample) else Sample(s)


def ks_critical_value(level):
    """Asymptotic c(level) with P(sqrt(nm/(n+m)) D > c) ~ level."""
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")
    return math.sqrt(-0.5 * math.log(level / 2.0))


@dataclass(frozen=True)
class KSResult:
    D: float
    n: int
    m: int

    def threshold_at(self, level):
        return ks_critical_value(level) * math.sqrt((self.n + self.m) / (self.n * self.m))

    def rejects(self, level):
        return self.D >= self.threshold_at(level)


def _ecdf(values, weights, at):
    order = np.argsort(values, kind="stable")
    v = values[order]
    w = np.ones_like(v) if weights is None else weights[order]
    cw = np.concatenate([[0.0], np.cumsum(w)])
    return cw[np.searchsorted(v, at, side="right")] / cw[-1]


def ks_two_sample(s1, s2):
    """sup_x |F1(x) - F2(x)| between two empirical distributions."""
    s1, s2 = _as_sample(s1), _as_sample(s2)
    grid = np.concatenate([s1.values, s2.values])
    d = np.max(np.abs(_ecdf(s1.values, s1.weights, grid) - _ecdf(s2.values, s2.weights, grid)))
    return KSResult(float(d), len(s1), len(s2))


def dominance_violation(low, high):
    """max_x [F_high(x) - F_low(x)]: positive part measures failure of ``high`` to dominate ``low``."""
    low, high = _as_sample(low), _as_sample(high)
    grid = np.concatenate([low.values, high.values])
    return float(np.max(_ecdf(high.values, high.weights, grid) - _ecdf(low.values, low.weights, grid)))


def fit_exponent(xs, ys):
    """Least-squares slope of log y against log x, with its standard error."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.size < 3 or x.size != y.size:
        raise ValueError("need at least three (x, y) pairs")
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("fit_exponent needs positive values")
    lx, ly = np.log(x), np.log(y)
    sxx = np.sum((lx - lx.mean()) ** 2)
    if sxx <= 1e-300:
        raise ValueError("degenerate x values")
    slope = np.sum((lx - lx.mean()) * (ly - ly.mean())) / sxx
    resid = ly - ly.mean() - slope * (lx - lx.mean())
    stderr = math.sqrt(max(np.sum(resid**2), 0.0) / (x.size - 2) / sxx)
    return float(slope), float(stderr)


def _log_binom(n, k):
    return log_gamma(n + 1.0) - log_gamma(k + 1.0) - log_gamma(n - k + 1.0)


def chernoff_bound_thin(alpha, N, T, lam, u):
    """Markov bound on P(log Z^full(N, T) >= u) from the lam-th moment.

    exp(-lam u + log C(N+T-2, N-1) + (N+T-1) log(Gamma(2a - lam) / Gamma(2a))),
    clamped to 1.  Binomials and gamma ratios are evaluated with log_gamma.
    """
    if not 0 < lam < min(1.0, 2.0 * alpha):
        raise ValueError(f"lambda must lie in (0, min(1, 2 alpha)), got {lam}")
    if N < 1 or T < 1:
        raise ValueError("N and T must be >= 1")
    a2 = 2.0 * alpha
    log_moment = _log_binom(N + T - 2, N - 1) + (N + T - 1) * (log_gamma(a2 - lam) - log_gamma(a2))
    return float(math.exp(min(0.0, -lam * u + log_moment)))


def chernoff_bound_thin_min(alpha, N, T, u, lambdas=None):
    """Minimum of chernoff_bound_thin over a lambda grid; returns (bound, lambda used)."""
    if lambdas is None:
        top = min(1.0, 2.0 * alpha)
        lambdas = np.linspace(0.01, 0.99, 99) * top
    best = (math.inf, None)
    for lam in lambdas:
        b = chernoff_bound_thin(alpha, N, T, float(lam), u)
        if b < best[0]:
            best = (b, float(lam))
    return best


@dataclass
class TailCurve:
    thresholds: np.ndarray
    exceed_prob: np.ndarray
    half_width: np.ndarray
    n: int


def empirical_tail(sample, thresholds, z=1.96):
    """P(X >= x) on a threshold grid, with normal-approximation binomial half-widths."""
    s = _as_sample(sample)
    thr = np.asarray(thresholds, dtype=float)
    if thr.size > 1 and np.any(np.diff(thr) <= 0):
        raise ValueError("thresholds must be strictly increasing")
    v = np.sort(s.values)
    p = 1.0 - np.searchsorted(v, thr, side="left") / v.size
    hw = z * np.sqrt(p * (1.0 - p) / v.size)
    return TailCurve(thr, p, hw, int(v.size))


@dataclass
class Moments:
    """Mergeable count / sum / sum of squares; merge order does not matter."""

    n: int = 0
    total: float = 0.0
    total_sq: float = 0.0

    def add(self, x):
        x = np.asarray(x, dtype=float).ravel()
        self.n += x.size
        self.total += float(np.sum(x))
        self.total_sq += float(np.sum(x * x))
        return self

    def merge(self, other):
        return Moments(self.n + other.n, self.total + other.total, self.total_sq + other.total_sq)

    @property
    def mean(self):
        return self.total / self.n

    @property
    def variance(self):
        return max(self.total_sq / self.n - self.mean**2, 0.0) * self.n / (self.n - 1)


def _var_stderr(x):
    # standard error of the sample variance: sqrt((m4 - s^4) / n)
    c = x - x.mean()
    m2 = np.mean(c * c)
    m4 = np.mean(c**4)
    return math.sqrt(max(m4 - m2 * m2, 0.0) / x.size)


def moment_agreement(x, y):
    """z-scores of the differences in mean and variance between two independent samples."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    se_mean = math.sqrt(x.var(ddof=1) / x.size + y.var(ddof=1) / y.size)
    se_var = math.sqrt(_var_stderr(x) ** 2 + _var_stderr(y) ** 2)
    z_mean = (x.mean() - y.mean()) / se_mean if se_mean > 0 else 0.0
    z_var = (x.var(ddof=1) - y.var(ddof=1)) / se_var if se_var > 0 else 0.0
    return float(z_mean), float(z_var)
