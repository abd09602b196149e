"""KPZ scaling layer: lattice images of continuum points, the centred and
rescaled free energies, and the deterministic shape inequality that keeps
boundary-touching paths subleading.

Coordinates follow

    x_bar = floor(N^(2/3) x / q^2) + 1,   s_N = floor(2 N s)
    x~ = x_bar + s_N + floor(N^(2/3+delta)),   s~ = s_N
    y~ = y_bar + t_N + floor(N^(2/3+delta)) - 1,   t~ = t_N - 1

and ``h = q sigma_p / (sqrt(2) N^(1/3)) * [log Z(x~, s~; y~, t~) - p (y_bar - x_bar + 4Nt - 4Ns)]``.
"""

import enum
import math
from dataclasses import dataclass

import numba as nb
import numpy as np

from .polymer_core import Variant, log_partition
from .shape_function import _f_two
from .special_functions import _psi0, digamma

__all__ = [
    "ScalingFrame",
    "ContinuumPoint",
    "LatticeCoords",
    "HVariant",
    "lattice_coords",
    "required_extents",
    "h_scaled",
    "coupling_gap",
    "shape_inequality_margin",
]


def _floor(v):
    # floor that forgives representation error, e.g. 1000 ** (2/3) = 99.99999999999997
    r = round(v)
    if abs(v - r) <= 1e-9 * max(1.0, abs(v)):
        return int(r)
    return math.floor(v)


@dataclass(frozen=True)
class ScalingFrame:
    N: int
    delta: float
    alpha: float
    q: float = 1.0
    sigma_p: float = 1.0
    p_override: float | None = None

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be >= 1")
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if not (self.q > 0 and self.sigma_p > 0):
            raise ValueError("q and sigma_p must be positive")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")

    @property
    def p(self):
        """Centering slope; defaults to -psi_0(alpha), the per-site free energy on the diagonal."""
        return -digamma(self.alpha) if self.p_override is None else self.p_override

    @property
    def prefactor(self):
        return self.q * self.sigma_p / (math.sqrt(2.0) * self.N ** (1.0 / 3.0))

    @property
    def shift(self):
        return _floor(self.N ** (2.0 / 3.0 + self.delta))


@dataclass(frozen=True)
class ContinuumPoint:
    x: float
    s: float
    y: float
    t: float

    def __post_init__(self):
        if not self.t > self.s:
            raise ValueError(f"need t > s, got s={self.s}, t={self.t}")

    def in_Q(self, b):
        """Membership in Q_b = [-b, b]^4 with t - s > 1/b."""
        return all(abs(v) <= b for v in (self.x, self.s, self.y, self.t)) and self.t - self.s > 1.0 / b

    def on_lattice(self, frame):
        """Whether N^(2/3) x / q^2, N^(2/3) y / q^2, 2 N s and 2 N t are integers."""
        scale = frame.N ** (2.0 / 3.0) / frame.q**2
        vals = (scale * self.x, scale * self.y, 2 * frame.N * self.s, 2 * frame.N * self.t)
        return all(abs(v - round(v)) <= 1e-9 * max(1.0, abs(v)) for v in vals)


class HVariant(enum.Enum):
    FULL = "Full"
    FULL_DELTA = "FullDelta"
    HALF_DELTA = "HalfDelta"


@dataclass(frozen=True)
class LatticeCoords:
    x_tilde: int
    s_tilde: int
    y_tilde: int
    t_tilde: int
    x_bar: int
    y_bar: int
    s_N: int
    t_N: int

    @property
    def start(self):
        return (self.x_tilde, self.s_tilde)

    @property
    def end(self):
        return (self.y_tilde, self.t_tilde)


def lattice_coords(frame, pt, shifted=True):
    """Integer endpoints of the free energy at ``pt``; ``shifted=False`` drops the N^(2/3+delta) offset."""
    N, q = frame.N, frame.q
    scale = N ** (2.0 / 3.0) / q**2
    x_bar = _floor(scale * pt.x) + 1
    y_bar = _floor(scale * pt.y) + 1
    s_N = _floor(2 * N * pt.s)
    t_N = _floor(2 * N * pt.t)
    shift = frame.shift if shifted else 0
    return LatticeCoords(x_bar + s_N + shift, s_N, y_bar + t_N + shift - 1, t_N - 1, x_bar, y_bar, s_N, t_N)


def required_extents(frame, pt, shifted=True):
    """(i_lo, i_hi, j_lo, j_hi) box that contains every path of the free energy at ``pt``."""
    c = lattice_coords(frame, pt, shifted)
    if c.y_tilde < c.x_tilde or c.t_tilde < c.s_tilde:
        raise ValueError(f"endpoints are not ordered: {c.start} -> {c.end}")
    return (c.x_tilde, c.y_tilde, c.s_tilde, c.t_tilde)


def _centering(frame, pt, c):
    N = frame.N
    return frame.p * (c.y_bar - c.x_bar + 4 * N * pt.t - 4 * N * pt.s)


def h_scaled(frame, variant, field, pt):
    """Centred, rescaled free energy.

    ``field`` is the full-space field for Full / FullDelta and the half-space
    field for HalfDelta; a ``(full, half)`` pair is also accepted.
    """
    variant = HVariant(variant)
    if isinstance(field, tuple):
        field = field[1] if variant is HVariant.HALF_DELTA else field[0]
    c = lattice_coords(frame, pt, shifted=variant is not HVariant.FULL)
    dp_variant = Variant.HALF if variant is HVariant.HALF_DELTA else Variant.FULL
    for i, j in (c.start, c.end):
        if not field.in_box(i, j):
            raise ValueError(f"lattice point ({i}, {j}) outside the field box")
    lz = log_partition(field, dp_variant, c.start, c.end)
    return frame.prefactor * (lz - _centering(frame, pt, c))


def coupling_gap(frame, full, half, pt):
    """|h_full^{N,delta} - h_half^{N,delta}| on a coupled pair (the centerings cancel)."""
    return abs(h_scaled(frame, HVariant.FULL_DELTA, full, pt) - h_scaled(frame, HVariant.HALF_DELTA, half, pt))


@nb.njit(cache=True)
def _max_split(alpha, xt, st, yt, tt, lo, hi):
    best = -np.inf
    arg = lo
    for i in range(lo, hi + 1):
        v = _f_two(alpha, float(i - xt), float(i - st)) + _f_two(alpha, float(tt - i), float(yt - i))
        if v > best:
            best = v
            arg = i
    return best, arg


def shape_inequality_margin(frame, b, pt, return_argmax=False):
    """-(t~ + y~ - s~ - x~) psi_0(alpha) - max_i [f(i - x~, i - s~) + f(t~ - i, y~ - i)].

    The max runs over diagonal sites max(x~, s~) <= i <= min(y~, t~).  Divided
    by N^(1/3 + 2 delta), the margin should stay bounded away from zero.
    """
    if not pt.in_Q(b):
        raise ValueError(f"{pt} is not in Q_{b}")
    if not pt.on_lattice(frame):
        raise ValueError(f"{pt} is not on the N={frame.N} lattice")
    c = lattice_coords(frame, pt)
    lo, hi = max(c.x_tilde, c.s_tilde), min(c.y_tilde, c.t_tilde)
    if lo > hi:
        raise ValueError(f"no diagonal index between {c.start} and {c.end}")
    if not (c.x_tilde > c.s_tilde and c.y_tilde > c.t_tilde):
        raise ValueError("endpoints must lie strictly below the diagonal; N is too small for this delta and b")
    lhs = -(c.t_tilde + c.y_tilde - c.s_tilde - c.x_tilde) * _psi0(frame.alpha)
    best, arg = _max_split(frame.alpha, c.x_tilde, c.s_tilde, c.y_tilde, c.t_tilde, lo, hi)
    margin = float(lhs - best)
    return (margin, int(arg)) if return_argmax else margin
