"""Log-gamma and the polygamma functions psi_0, psi_1, psi_2 on (0, inf).

Evaluation scheme:

* large arguments (x >= 10): Stirling / de Moivre asymptotic series with
  Bernoulli-number coefficients;
* arguments near 1 and 2: Taylor series in ``z = x - 1`` (or ``x - 2``) whose
  coefficients are ``zeta(k) - 1``, which keeps full relative accuracy near the
  zeros of log-gamma at 1 and 2 and near the zero of psi_0 at 1.4616...;
* everything else is moved into one of those regions by the recurrences
  ``Gamma(x+1) = x Gamma(x)`` and its derivatives, choosing the direction in
  which the accumulated terms all have the same sign.

Accuracy is about 1e-14 relative on [1e-3, 1e6]; arguments outside that
window are accepted and evaluated with the same formulas, but only
best-effort accuracy is claimed there.  The compiled kernels (``_lgamma``,
``_psi0``, ...) skip argument validation and are meant for other numba code.
"""

import math

import numba as nb
import numpy as np

__all__ = ["EULER_GAMMA", "log_gamma", "polygamma", "digamma", "trigamma", "tetragamma"]

EULER_GAMMA = 0.57721566490153286060651209008240243

_ASYMPTOTIC_FROM = 10.0
_N_SERIES = 48

# B_2, B_4, ..., B_22
_BERNOULLI = np.array([
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
    43867.0 / 798.0,
    -174611.0 / 330.0,
    854513.0 / 138.0,
])


def _zeta_minus_one(k, m=20, terms=8):
    # Euler-Maclaurin for sum_{n>=2} n^-k: direct sum below m, tail corrections above.
    direct = math.fsum(n ** -float(k) for n in range(2, m))
    tail = m ** (1.0 - k) / (k - 1.0) + 0.5 * m ** -float(k)
    rising = float(k)  # k (k+1) ... (k + 2j - 2)
    fact = 2.0  # (2j)!
    for j in range(1, terms + 1):
        if j > 1:
            rising *= (k + 2 * j - 3) * (k + 2 * j - 2)
            fact *= (2 * j - 1) * (2 * j)
        tail += _BERNOULLI[j - 1] / fact * rising * m ** (-k - 2.0 * j + 1.0)
    return direct + tail


# (-1)^k (zeta(k) - 1) for k = 2 .. _N_SERIES + 1
_ZETA_SERIES = np.array([(-1.0) ** k * _zeta_minus_one(k) for k in range(2, _N_SERIES + 2)])


@nb.njit(cache=True)
def _lgamma_near_one(z):
    # log Gamma(1 + z) + log1p(z) for |z| <= 0.5
    acc = 0.0
    zk = z
    for idx in range(_ZETA_SERIES.shape[0]):
        zk *= z
        term = _ZETA_SERIES[idx] * zk / (idx + 2)
        acc += term
        if abs(term) < 1e-18 * abs(acc):
            break
    return z * (1.0 - EULER_GAMMA) + acc


@nb.njit(cache=True)
def _lgamma_stirling(x):
    inv = 1.0 / x
    inv2 = inv * inv
    acc = 0.0
    p = inv
    for k in range(1, _BERNOULLI.shape[0] + 1):
        acc += _BERNOULLI[k - 1] / (2 * k * (2 * k - 1)) * p
        p *= inv2
    return (x - 0.5) * math.log(x) - x + 0.5 * math.log(2.0 * math.pi) + acc


@nb.njit(cache=True)
def _lgamma(x):
    if x >= _ASYMPTOTIC_FROM:
        return _lgamma_stirling(x)
    if x < 0.5:
        # log Gamma(x) = log Gamma(x + 1) - log x, with x + 1 in [1, 1.5)
        return _lgamma_near_one(x) - math.log1p(x) - math.log(x)
    if x <= 1.5:
        z = x - 1.0
        return _lgamma_near_one(z) - math.log1p(z)
    if x < 2.5:
        # log Gamma(2 + z) = log(1 + z) + log Gamma(1 + z)
        return _lgamma_near_one(x - 2.0)
    acc = 0.0
    while x >= 2.5:
        x -= 1.0
        acc += math.log(x)
    return acc + _lgamma_near_one(x - 2.0)


@nb.njit(cache=True)
def _psi0_near_one(z):
    # psi_0(1 + z) for |z| <= 0.5
    acc = 0.0
    zk = 1.0
    for idx in range(_ZETA_SERIES.shape[0]):
        zk *= z
        term = _ZETA_SERIES[idx] * zk
        acc += term
        if abs(term) < 1e-18 * (abs(acc) + 1e-300):
            break
    return -EULER_GAMMA + z / (1.0 + z) + acc


@nb.njit(cache=True)
def _psi0(x):
    if x >= _ASYMPTOTIC_FROM:
        inv = 1.0 / x
        inv2 = inv * inv
        acc = 0.0
        p = inv2
        for k in range(1, _BERNOULLI.shape[0] + 1):
            acc += _BERNOULLI[k - 1] / (2 * k) * p
            p *= inv2
        return math.log(x) - 0.5 * inv - acc
    if x < 0.5:
        return _psi0_near_one(x) - 1.0 / x
    acc = 0.0
    while x > 1.5:
        x -= 1.0
        acc += 1.0 / x
    return _psi0_near_one(x - 1.0) + acc


@nb.njit(cache=True)
def _psi1(x):
    acc = 0.0
    while x < _ASYMPTOTIC_FROM:
        acc += 1.0 / (x * x)
        x += 1.0
    inv = 1.0 / x
    inv2 = inv * inv
    tail = 0.0
    p = inv2 * inv
    for k in range(1, _BERNOULLI.shape[0] + 1):
        tail += _BERNOULLI[k - 1] * p
        p *= inv2
    return acc + inv + 0.5 * inv2 + tail


@nb.njit(cache=True)
def _psi2(x):
    acc = 0.0
    while x < _ASYMPTOTIC_FROM:
        acc -= 2.0 / (x * x * x)
        x += 1.0
    inv = 1.0 / x
    inv2 = inv * inv
    tail = 0.0
    p = inv2 * inv2
    for k in range(1, _BERNOULLI.shape[0] + 1):
        tail += _BERNOULLI[k - 1] * (2 * k + 1) * p
        p *= inv2
    return acc - inv2 - inv2 * inv - tail


def _check_positive(x):
    x = float(x)
    if not math.isfinite(x) or x <= 0.0:
        raise ValueError(f"argument must be finite and positive, got {x!r}")
    return x


def log_gamma(x):
    """Natural log of the gamma function for finite ``x > 0``."""
    return float(_lgamma(_check_positive(x)))


def polygamma(order, x):
    """psi_order(x) for order in {0, 1, 2} and finite ``x > 0``.

    psi_0 is the digamma function, psi_1 = psi_0' and psi_2 = psi_1'.
    """
    if order not in (0, 1, 2):
        raise ValueError(f"polygamma order must be 0, 1 or 2, got {order!r}")
    x = _check_positive(x)
    if order == 0:
        return float(_psi0(x))
    if order == 1:
        return float(_psi1(x))
    return float(_psi2(x))


def digamma(x):
    return polygamma(0, x)


def trigamma(x):
    return polygamma(1, x)


def tetragamma(x):
    return polygamma(2, x)
