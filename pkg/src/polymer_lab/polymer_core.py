"""Log-space dynamic programming for every partition-function variant.

All variants share one kernel: a row sweep over the box spanned by the two
endpoints that carries two layers, paths that have not (yet) visited a
"marked" site and paths that have.  Restricting the admissible sites and
choosing the marked set gives

    Full      all sites of a full-space field
    Half      sites with i >= j
    In        sites with i > j (never touches the diagonal)
    Boundary  half-space paths that touch the diagonal     (marked = diagonal)
    Exit      full-space paths that touch the diagonal     (marked = diagonal)
    InParallelogram / ExitParallelogram   paths inside / leaving R^k_{a,b}

so decompositions such as Z^half = Z^in + Z^b are computed without
subtracting large numbers.  An empty path set is reported as ``-inf``.
"""

import enum
import math
from dataclasses import dataclass

import numba as nb
import numpy as np

from .sampling import Geometry, Stream, WeightField, build_inhomogeneous_field
from .stats import logdiffexp, logsumexp

__all__ = [
    "Variant",
    "Mode",
    "Endpoint",
    "Parallelogram",
    "LogPartitionTable",
    "log_partition",
    "log_partition_table",
    "log_partition_flagged",
    "log_partition_parallelogram",
    "log_point_to_line",
    "log_partition_inhom",
    "parallelogram_member",
]

NEG_INF = -math.inf


class Variant(enum.Enum):
    FULL = "Full"
    HALF = "Half"
    IN = "In"
    BOUNDARY = "Boundary"
    EXIT = "Exit"
    IN_PARALLELOGRAM = "InParallelogram"
    EXIT_PARALLELOGRAM = "ExitParallelogram"
    POINT_TO_LINE = "PointToLine"
    INHOM_FULL = "InhomFull"


class Mode(enum.Enum):
    INSIDE = "Inside"
    EXITING = "Exiting"


@dataclass(frozen=True, order=True)
class Endpoint:
    i: int
    j: int

    def precedes(self, other):
        """Partial order: self <= other coordinatewise."""
        return self.i <= other.i and self.j <= other.j


@dataclass(frozen=True)
class Parallelogram:
    """R^k_{a,b}: vertices a +- (-k, k) and b +- (-k, k)."""

    a: Endpoint
    b: Endpoint
    k: float

    def __post_init__(self):
        if not self.a.precedes(self.b):
            raise ValueError(f"parallelogram needs a <= b, got {self.a} and {self.b}")
        if self.a == self.b:
            raise ValueError("degenerate parallelogram: a == b")
        if not self.k >= 1:
            raise ValueError(f"parallelogram half-width must be >= 1, got {self.k}")


@dataclass
class LogPartitionTable:
    """log Z from ``origin`` to every site of the box [origin, (i1, j1)]; -inf where no path exists."""

    variant: Variant
    origin: Endpoint
    values: np.ndarray

    def at(self, i, j):
        a, b = i - self.origin.i, j - self.origin.j
        if a < 0 or b < 0 or a >= self.values.shape[0] or b >= self.values.shape[1]:
            return NEG_INF
        return float(self.values[a, b])


# ---------------------------------------------------------------------------
# kernels


@nb.njit(inline="always")
def _lse(a, b):
    if a == -np.inf:
        return b
    if b == -np.inf:
        return a
    if a > b:
        return a + math.log1p(math.exp(b - a))
    return b + math.log1p(math.exp(a - b))


@nb.njit(cache=True)
def _sweep(logw, allowed, marked, keep_table):
    """Two-layer DP from cell (0, 0) to every cell of the box.

    Returns (clean, touched) either as full tables or, without ``keep_table``,
    as the last row only (O(width) memory).
    """
    ni, nj = logw.shape
    rows = ni if keep_table else 1
    clean = np.full((rows, nj), -np.inf)
    touched = np.full((rows, nj), -np.inf)
    prev_c = np.full(nj, -np.inf)
    prev_t = np.full(nj, -np.inf)
    cur_c = np.full(nj, -np.inf)
    cur_t = np.full(nj, -np.inf)
    for a in range(ni):
        for b in range(nj):
            if not allowed[a, b]:
                cur_c[b] = -np.inf
                cur_t[b] = -np.inf
                continue
            lw = logw[a, b]
            if a == 0 and b == 0:
                in_c = 0.0
                in_t = -np.inf
            else:
                in_c = -np.inf
                in_t = -np.inf
                if a > 0:
                    in_c = prev_c[b]
                    in_t = prev_t[b]
                if b > 0:
                    in_c = _lse(in_c, cur_c[b - 1])
                    in_t = _lse(in_t, cur_t[b - 1])
            if marked[a, b]:
                cur_c[b] = -np.inf
                cur_t[b] = lw + _lse(in_c, in_t)
            else:
                cur_c[b] = lw + in_c
                cur_t[b] = lw + in_t
        if keep_table:
            clean[a, :] = cur_c
            touched[a, :] = cur_t
        prev_c, cur_c = cur_c, prev_c
        prev_t, cur_t = cur_t, prev_t
    if not keep_table:
        clean[0, :] = prev_c
        touched[0, :] = prev_t
    return clean, touched


# ---------------------------------------------------------------------------
# masks


def _coords(start, end):
    ii = np.arange(start.i, end.i + 1)[:, None]
    jj = np.arange(start.j, end.j + 1)[None, :]
    return ii, jj


def parallelogram_member(para, i, j):
    """Exact membership test for R^k_{a,b} (boundary counts as inside).

    Writes p = a + t (b - a) + s (-1, 1) and checks t in [0, 1], |s| <= k,
    all in integer arithmetic scaled by D = (b-a)_i + (b-a)_j.
    """
    di, dj = para.b.i - para.a.i, para.b.j - para.a.j
    D = di + dj
    pi = np.asarray(i) - para.a.i
    pj = np.asarray(j) - para.a.j
    tD = pi + pj
    sD = tD * di - pi * D
    return (tD >= 0) & (tD <= D) & (np.abs(sD) <= para.k * D)


def _as_endpoint(p):
    return p if isinstance(p, Endpoint) else Endpoint(int(p[0]), int(p[1]))


def _window(field, start, end):
    if not start.precedes(end):
        raise ValueError(f"need start <= end in the partial order, got {start} and {end}")
    if not (field.in_box(start.i, start.j) and field.in_box(end.i, end.j)):
        raise ValueError(f"endpoints {start}, {end} outside field box [{field.i0},{field.i1}]x[{field.j0},{field.j1}]")
    sa, sb = start.i - field.i0, start.j - field.j0
    ea, eb = end.i - field.i0, end.j - field.j0
    logw = np.ascontiguousarray(field.log_w[sa : ea + 1, sb : eb + 1])
    live = field.live[sa : ea + 1, sb : eb + 1]
    return logw, live


_FULL_ONLY = {Variant.FULL, Variant.EXIT, Variant.IN_PARALLELOGRAM, Variant.EXIT_PARALLELOGRAM, Variant.INHOM_FULL}
_HALF_ONLY = {Variant.HALF, Variant.BOUNDARY}


def _check_geometry(field, variant):
    if variant in _FULL_ONLY and field.geometry.is_half:
        raise ValueError(f"variant {variant.value} needs a full-space field, got {field.geometry.value}")
    if variant in _HALF_ONLY and not field.geometry.is_half:
        raise ValueError(f"variant {variant.value} needs a half-space field, got {field.geometry.value}")
    if variant is Variant.INHOM_FULL and not field.meta.get("inhomogeneous"):
        raise ValueError("variant InhomFull needs an inhomogeneous field")


def _masks(variant, field, start, end, k):
    logw, live = _window(field, start, end)
    ii, jj = _coords(start, end)
    no_mark = np.zeros(live.shape, bool)
    if variant in (Variant.FULL, Variant.INHOM_FULL):
        return logw, live, no_mark
    if variant is Variant.HALF:
        return logw, live & (ii >= jj), no_mark
    if variant is Variant.IN:
        return logw, live & (ii > jj), no_mark
    if variant is Variant.BOUNDARY:
        return logw, live & (ii >= jj), np.broadcast_to(ii == jj, live.shape).copy()
    if variant is Variant.EXIT:
        return logw, live.copy(), np.broadcast_to(ii == jj, live.shape).copy()
    if variant in (Variant.IN_PARALLELOGRAM, Variant.EXIT_PARALLELOGRAM):
        if k is None:
            raise ValueError(f"variant {variant.value} needs a half-width k")
        member = parallelogram_member(Parallelogram(start, end, k), ii, jj)
        if variant is Variant.IN_PARALLELOGRAM:
            return logw, live & member, no_mark
        return logw, live.copy(), ~member
    raise ValueError(f"variant {variant.value} has no point-to-point mask")


_TOUCHING = {Variant.BOUNDARY, Variant.EXIT, Variant.EXIT_PARALLELOGRAM}


def _run(variant, field, start, end, k, keep_table):
    logw, allowed, marked = _masks(variant, field, start, end, k)
    logw = np.where(allowed, logw, 0.0)
    clean, touched = _sweep(logw, np.ascontiguousarray(allowed), np.ascontiguousarray(marked), keep_table)
    return touched if variant in _TOUCHING else clean


def log_partition(field, variant, start, end, k=None):
    """log of the sum over admissible up-right paths start -> end of prod omega.

    Returns -inf when the variant's path set is empty.  ``k`` is the half-width
    for the parallelogram variants.
    """
    variant = Variant(variant)
    start, end = _as_endpoint(start), _as_endpoint(end)
    if variant is Variant.POINT_TO_LINE:
        return log_point_to_line(field)
    if variant is Variant.EXIT_PARALLELOGRAM:
        if start == end:
            raise ValueError("degenerate parallelogram: a == b")
        return log_partition_parallelogram(field, Parallelogram(start, end, k), Mode.EXITING)
    _check_geometry(field, variant)
    return float(_run(variant, field, start, end, k, False)[0, -1])


def log_partition_table(field, variant, origin, end=None, k=None):
    """Full DP table from ``origin`` to every site up to ``end`` (default: the field's far corner)."""
    variant = Variant(variant)
    origin = _as_endpoint(origin)
    end = Endpoint(field.i1, field.j1) if end is None else _as_endpoint(end)
    if variant in (Variant.POINT_TO_LINE, Variant.IN_PARALLELOGRAM, Variant.EXIT_PARALLELOGRAM):
        raise ValueError(f"no table form for variant {variant.value}")
    _check_geometry(field, variant)
    return LogPartitionTable(variant, origin, _run(variant, field, origin, end, k, True))


def log_partition_flagged(field, start, end):
    """(log Z^in, log Z^touch) from one two-layer pass.

    On a half-space field the touching part is Z^b (half-space paths meeting
    the diagonal), on a full-space field it is Z^exit; either way
    ``logsumexp(log_in, log_touch)`` is the unrestricted log partition whenever
    the start lies in the half-space (a full-space path from i < j that never
    meets the diagonal is in neither part).
    """
    start, end = _as_endpoint(start), _as_endpoint(end)
    logw, live = _window(field, start, end)
    ii, jj = _coords(start, end)
    allowed = live & (ii >= jj) if field.geometry.is_half else live.copy()
    marked = np.broadcast_to(ii == jj, live.shape).copy()
    logw = np.where(allowed, logw, 0.0)
    clean, touched = _sweep(logw, np.ascontiguousarray(allowed), marked, False)
    # diagonal-avoiding paths stay on the side of their start; only i > j counts as In
    log_in = float(clean[0, -1]) if start.i > start.j else NEG_INF
    return log_in, float(touched[0, -1])


# largest absolute error tolerated from the subtraction before recomputing directly
_FALLBACK_ABS = 1e-12
_EPS = np.finfo(float).eps


def log_partition_parallelogram(field, para, mode):
    """log Z over paths a -> b inside R^k_{a,b} (Inside) or leaving it (Exiting).

    Exiting is ``logdiffexp(full, inside)``.  Rounding in the two logs costs
    about eps * |log Z| / share in the difference, so when the exiting share of
    the full partition function is small enough for that to exceed 1e-12 the
    value is recomputed directly by the flagged DP.
    """
    mode = Mode(mode)
    if field.geometry.is_half:
        raise ValueError("parallelogram partition functions live on full-space fields")
    inside = float(_run(Variant.IN_PARALLELOGRAM, field, para.a, para.b, para.k, False)[0, -1])
    if mode is Mode.INSIDE:
        return inside
    full = float(_run(Variant.FULL, field, para.a, para.b, None, False)[0, -1])
    if inside == NEG_INF:
        return full
    share = -math.expm1(inside - full) if full != NEG_INF else 0.0
    if share <= 0.0 or 4 * _EPS * (1.0 + abs(full)) / share > _FALLBACK_ABS:
        return float(_run(Variant.EXIT_PARALLELOGRAM, field, para.a, para.b, para.k, False)[0, -1])
    return logdiffexp(full, inside)


def log_point_to_line(field):
    """log Z_2: half-space partition function from (1, 1) summed over the endpoints (2n-k+m+1, k), k = 1..n."""
    if field.geometry is not Geometry.BW_TRAPEZOID:
        raise ValueError(f"point-to-line needs the BWTrapezoid geometry, got {field.geometry.value}")
    n, m = field.meta["n"], field.meta["m"]
    logw = np.where(field.live, field.log_w, 0.0)
    clean, _ = _sweep(np.ascontiguousarray(logw), np.ascontiguousarray(field.live), np.zeros(field.live.shape, bool), True)
    total = NEG_INF
    for k in range(1, n + 1):
        total = logsumexp(total, float(clean[2 * n - k + m, k - 1]))
    return total


def log_partition_inhom(alpha, N, T, theta, seed, stream=Stream.INHOMOGENEOUS):
    """log Z_theta(N, T) on [1, N] x [1, T] with column-1 shape theta + alpha, all else 2 alpha."""
    if N < 1 or T < 1:
        raise ValueError("N and T must be >= 1")
    field = build_inhomogeneous_field(alpha, theta, N, T, seed, stream)
    return log_partition(field, Variant.INHOM_FULL, (1, 1), (N, T))
