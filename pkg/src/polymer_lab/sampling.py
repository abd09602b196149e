"""Seeded inverse-gamma weight fields.

Every random number is a pure function of (master seed, replica, stream tag,
site coordinates, draw counter): a SplitMix64-style mixer is applied to the
packed key, so a field is bit-identical no matter in which order, or in how
many processes, its sites are generated.  Because keys depend on absolute
lattice coordinates, two fields built from the same seed agree on every site
they draw from the same stream; this is what couples the full-space and
half-space fields (shared bulk stream on i > j, separate boundary stream on
the diagonal).

Weights are stored as ``log W``; W itself overflows for small shapes.
"""

import enum
import math
from dataclasses import dataclass, field as dc_field

import numba as nb
import numpy as np

__all__ = [
    "Geometry",
    "Stream",
    "PolymerParams",
    "SeedSpec",
    "WeightField",
    "sample_log_inverse_gamma",
    "sample_inverse_gamma",
    "build_field",
    "build_coupled_fields",
    "build_inhomogeneous_field",
    "bw_rect_shapes",
    "bw_trapezoid_shapes",
]

_MASK64 = (1 << 64) - 1
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_COORD_OFFSET = 1 << 31


class Geometry(enum.Enum):
    FULL_RECT = "FullRect"
    HALF_TRAPEZOID = "HalfTrapezoid"
    BW_RECT = "BWRect"
    BW_TRAPEZOID = "BWTrapezoid"

    @property
    def is_half(self):
        return self in (Geometry.HALF_TRAPEZOID, Geometry.BW_TRAPEZOID)


class Stream(enum.IntEnum):
    """Independent random streams; equal tags at equal sites give equal draws."""

    BULK = 1
    BOUNDARY = 2
    BW_RECT = 3
    BW_TRAPEZOID = 4
    INHOMOGENEOUS = 5
    INHOMOGENEOUS_REFERENCE = 6
    SCRATCH = 7


@dataclass(frozen=True)
class SeedSpec:
    master_seed: int
    replica_index: int = 0

    def __post_init__(self):
        if not 0 <= self.master_seed <= _MASK64:
            raise ValueError("master_seed must fit in an unsigned 64-bit integer")
        if self.replica_index < 0:
            raise ValueError("replica_index must be nonnegative")


@dataclass(frozen=True)
class PolymerParams:
    """Bulk alpha, boundary tilt theta and (optionally) the BW parameter vectors."""

    alpha: float
    theta: float = 0.0
    bw_alpha0: float | None = None
    bw_alphas: tuple = ()
    bw_betas: tuple = ()

    def __post_init__(self):
        if not (math.isfinite(self.alpha) and self.alpha > 0):
            raise ValueError(f"alpha must be positive, got {self.alpha!r}")
        if not (math.isfinite(self.theta) and self.theta >= 0):
            raise ValueError(f"theta must be >= 0 (non-attractive regime), got {self.theta!r}")
        object.__setattr__(self, "bw_alphas", tuple(float(a) for a in self.bw_alphas))
        object.__setattr__(self, "bw_betas", tuple(float(b) for b in self.bw_betas))
        if self.has_bw:
            a0, al, be = self.bw_alpha0, self.bw_alphas, self.bw_betas
            if not al or not be:
                raise ValueError("BW parameters need at least one alpha_i and one beta_k")
            for ai in al:
                if not ai + a0 > 0:
                    raise ValueError(f"compatibility violated: alpha_i + alpha0 = {ai + a0} <= 0")
                for aj in al:
                    if not ai + aj > 0:
                        raise ValueError(f"compatibility violated: alpha_i + alpha_j = {ai + aj} <= 0")
                for bk in be:
                    if not ai + bk > 0:
                        raise ValueError(f"compatibility violated: alpha_i + beta_k = {ai + bk} <= 0")

    @property
    def has_bw(self):
        return self.bw_alpha0 is not None

    @property
    def bw_n(self):
        return len(self.bw_alphas)

    @property
    def bw_m(self):
        return len(self.bw_betas)


@dataclass
class WeightField:
    """Log-weights on a box [i0, i0+ni) x [j0, j0+nj); dead sites are NaN.

    ``shape`` holds the Gamma shape that generated each live site.
    """

    geometry: Geometry
    i0: int
    j0: int
    log_w: np.ndarray
    shape: np.ndarray
    live: np.ndarray
    meta: dict = dc_field(default_factory=dict)

    @property
    def i1(self):
        return self.i0 + self.log_w.shape[0] - 1

    @property
    def j1(self):
        return self.j0 + self.log_w.shape[1] - 1

    def in_box(self, i, j):
        return self.i0 <= i <= self.i1 and self.j0 <= j <= self.j1

    def is_live(self, i, j):
        return self.in_box(i, j) and bool(self.live[i - self.i0, j - self.j0])

    def log_weight(self, i, j):
        if not self.is_live(i, j):
            raise KeyError(f"site ({i}, {j}) is not part of this field")
        return float(self.log_w[i - self.i0, j - self.j0])

    def shape_at(self, i, j):
        if not self.is_live(i, j):
            raise KeyError(f"site ({i}, {j}) is not part of this field")
        return float(self.shape[i - self.i0, j - self.j0])

    def sites(self):
        """Live sites as (i, j, log_w, shape) rows in row-major order."""
        idx = np.argwhere(self.live)
        return [
            (int(a + self.i0), int(b + self.j0), float(self.log_w[a, b]), float(self.shape[a, b]))
            for a, b in idx
        ]

    def dump_csv(self, path):
        with open(path, "w") as fh:
            fh.write("i,j,ln_w,shape\n")
            for i, j, lw, sh in self.sites():
                fh.write(f"{i},{j},{lw!r},{sh!r}\n")

    def dump_binary(self, path):
        """Little-endian float64 records (i, j, ln_w, shape), no header."""
        rows = np.array(self.sites(), dtype="<f8").reshape(-1, 4)
        rows.tofile(path)

    def with_log_weights(self, log_w):
        return WeightField(self.geometry, self.i0, self.j0, np.asarray(log_w, float), self.shape, self.live, dict(self.meta))


# ---------------------------------------------------------------------------
# counter-based generator


@nb.njit(cache=True)
def _mix64(z):
    z = np.uint64(z)
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


@nb.njit(cache=True)
def _stream_key(master_seed, replica, tag):
    k = _mix64(np.uint64(master_seed) ^ _GOLDEN)
    k = _mix64(k ^ (np.uint64(replica) * _GOLDEN + np.uint64(0x632BE59BD9B4E019)))
    return _mix64(k ^ (np.uint64(tag) * _M1))


@nb.njit(cache=True)
def _site_key(key, i, j):
    packed = (np.uint64(i + _COORD_OFFSET) << np.uint64(32)) | np.uint64(j + _COORD_OFFSET)
    return _mix64(np.uint64(key) ^ _mix64(packed))


@nb.njit(cache=True)
def _uniform(site_key, counter):
    z = _mix64(np.uint64(site_key) + np.uint64(counter + 1) * _GOLDEN)
    return (float(z >> np.uint64(11)) + 0.5) * (1.0 / 9007199254740992.0)


@nb.njit(cache=True)
def _log_gamma_variate(shape, site_key):
    """log of a Gamma(shape, 1) draw: Marsaglia-Tsang, with U^(1/a) boost for shape < 1."""
    counter = 0
    boost = 0.0
    a = shape
    if a < 1.0:
        boost = math.log(_uniform(site_key, counter)) / a
        counter += 1
        a += 1.0
    d = a - 1.0 / 3.0
    c = 1.0 / math.sqrt(9.0 * d)
    while True:
        u1 = _uniform(site_key, counter)
        u2 = _uniform(site_key, counter + 1)
        counter += 2
        x = math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)
        v = 1.0 + c * x
        if v <= 0.0:
            continue
        v = v * v * v
        u = _uniform(site_key, counter)
        counter += 1
        x2 = x * x
        if u < 1.0 - 0.0331 * x2 * x2 or math.log(u) < 0.5 * x2 + d * (1.0 - v + math.log(v)):
            return math.log(d) + math.log(v) + boost


@nb.njit(cache=True)
def _fill(shapes, kinds, keys, i0, j0, out):
    # kinds: 0 dead, 1 keyed by (i, j) on keys[0], 2 keyed by (i, i) on keys[1]
    ni, nj = shapes.shape
    for a in range(ni):
        for b in range(nj):
            kd = kinds[a, b]
            if kd == 0:
                out[a, b] = np.nan
            else:
                sk = _site_key(keys[kd - 1], i0 + a, j0 + b)
                out[a, b] = -_log_gamma_variate(shapes[a, b], sk)


@nb.njit(cache=True)
def _fill_sequence(shape, key, size, out):
    for n in range(size):
        out[n] = -_log_gamma_variate(shape, _site_key(key, n, 0))


def _seed(seed):
    if isinstance(seed, SeedSpec):
        return seed
    if isinstance(seed, tuple):
        return SeedSpec(*seed)
    return SeedSpec(int(seed), 0)


def _key(seed, stream):
    s = _seed(seed)
    return np.uint64(_stream_key(np.uint64(s.master_seed), np.uint64(s.replica_index), np.uint64(int(stream))))


def sample_log_inverse_gamma(shape, size, seed, stream=Stream.SCRATCH):
    """``size`` draws of log W with 1/W ~ Gamma(shape, 1), as ``-log(Gamma draw)``."""
    shape = float(shape)
    if not (math.isfinite(shape) and shape > 0):
        raise ValueError(f"shape must be positive, got {shape!r}")
    out = np.empty(int(size))
    _fill_sequence(shape, _key(seed, stream), int(size), out)
    return out


def sample_inverse_gamma(shape, size, seed, stream=Stream.SCRATCH):
    """Inverse-gamma draws W; prefer sample_log_inverse_gamma for small shapes."""
    return np.exp(sample_log_inverse_gamma(shape, size, seed, stream))


def _draw(shapes, kinds, i0, j0, key_a, key_b):
    out = np.empty(shapes.shape)
    keys = np.array([key_a, key_b], dtype=np.uint64)
    _fill(shapes, kinds.astype(np.int8), keys, int(i0), int(j0), out)
    return out


def _box(extents):
    i_lo, i_hi, j_lo, j_hi = (int(v) for v in extents)
    if i_hi < i_lo or j_hi < j_lo:
        raise ValueError(f"empty extents {extents!r}")
    ii = np.arange(i_lo, i_hi + 1)[:, None]
    jj = np.arange(j_lo, j_hi + 1)[None, :]
    return i_lo, j_lo, ii, jj


def _full_rect(params, extents, seed):
    i0, j0, ii, jj = _box(extents)
    shapes = np.full((ii.shape[0], jj.shape[1]), 2.0 * params.alpha)
    kinds = np.ones(shapes.shape, dtype=np.int8)
    key = _key(seed, Stream.BULK)
    log_w = _draw(shapes, kinds, i0, j0, key, key)
    meta = {"alpha": params.alpha}
    return WeightField(Geometry.FULL_RECT, i0, j0, log_w, shapes, np.ones(shapes.shape, bool), meta)


def _half_from_bulk(params, full_field, seed):
    ii = np.arange(full_field.i0, full_field.i1 + 1)[:, None]
    jj = np.arange(full_field.j0, full_field.j1 + 1)[None, :]
    live = ii >= jj
    diag = ii == jj
    shapes = np.where(diag, params.alpha + params.theta, 2.0 * params.alpha)
    shapes = np.where(live, shapes, np.nan)
    kinds = np.where(diag, 2, 0).astype(np.int8)
    key = _key(seed, Stream.BOUNDARY)
    boundary = _draw(np.where(diag, shapes, 1.0), kinds, full_field.i0, full_field.j0, key, key)
    log_w = np.where(diag, boundary, np.where(live, full_field.log_w, np.nan))
    meta = {"alpha": params.alpha, "theta": params.theta}
    return WeightField(Geometry.HALF_TRAPEZOID, full_field.i0, full_field.j0, log_w, shapes, live, meta)


def build_coupled_fields(params, extents, seed):
    """Full-space and half-space fields on one box sharing the bulk draws.

    Sites with i > j carry identical log-weights in both fields; the full field
    uses the bulk draw on the diagonal and on i < j, the half field uses an
    independent boundary draw with shape alpha + theta on the diagonal.
    """
    full = _full_rect(params, extents, seed)
    return full, _half_from_bulk(params, full, seed)


def bw_rect_shapes(params):
    """Shape table for the full-space BW rectangle [1, n+m+1] x [1, n]; index [i-1, j-1]."""
    n, m = params.bw_n, params.bw_m
    a0, al, be = params.bw_alpha0, params.bw_alphas, params.bw_betas
    shapes = np.empty((n + m + 1, n))
    for i in range(1, n + m + 2):
        for j in range(1, n + 1):
            if i == 1:
                shapes[i - 1, j - 1] = al[j - 1] + a0
            elif i <= n + 1:
                shapes[i - 1, j - 1] = al[i - 2] + al[j - 1]
            else:
                shapes[i - 1, j - 1] = al[j - 1] + be[i - n - 2]
    return shapes


def bw_trapezoid_shapes(params):
    """Shape table for the BW trapezoid {1<=j<=n, j<=i<=2n+m-j+1} in the box [1, 2n+m] x [1, n]; NaN off-domain."""
    n, m = params.bw_n, params.bw_m
    a0, al, be = params.bw_alpha0, params.bw_alphas, params.bw_betas
    shapes = np.full((2 * n + m, n), np.nan)
    for j in range(1, n + 1):
        for i in range(j, 2 * n + m - j + 2):
            if i == j:
                s = al[i - 1] + a0
            elif i <= n:
                s = al[i - 1] + al[j - 1]
            elif i <= n + m:
                s = al[j - 1] + be[i - n - 1]
            else:
                s = al[j - 1] + al[2 * n + m - i]
            shapes[i - 1, j - 1] = s
    return shapes


def _from_shapes(geometry, shapes, seed, stream, meta):
    live = ~np.isnan(shapes)
    kinds = live.astype(np.int8)
    key = _key(seed, stream)
    log_w = _draw(np.where(live, shapes, 1.0), kinds, 1, 1, key, key)
    return WeightField(geometry, 1, 1, log_w, shapes, live, meta)


def build_inhomogeneous_field(alpha, theta, N, T, seed, stream=Stream.INHOMOGENEOUS):
    """[1, N] x [1, T] with W_ij ~ Gamma^-1(A_i + B_j), A_1 = theta, A_i = B_j = alpha otherwise."""
    if N < 1 or T < 1:
        raise ValueError("N and T must be >= 1")
    if not alpha > 0 or not theta >= 0:
        raise ValueError("need alpha > 0 and theta >= 0")
    A = np.full(N, float(alpha))
    A[0] = theta
    shapes = A[:, None] + np.full(T, float(alpha))[None, :]
    return _from_shapes(Geometry.FULL_RECT, shapes, seed, stream, {"alpha": alpha, "theta": theta, "inhomogeneous": True})


def build_field(params, geometry, extents=None, seed=0, stream=None):
    """Sample a weight field.

    FullRect / HalfTrapezoid take ``extents = (i_lo, i_hi, j_lo, j_hi)`` and use
    the coupled bulk/boundary streams; the BW geometries derive their domain
    from the parameter vectors and ignore ``extents``.
    """
    geometry = Geometry(geometry)
    if geometry in (Geometry.FULL_RECT, Geometry.HALF_TRAPEZOID):
        if extents is None:
            raise ValueError(f"{geometry.value} needs extents")
        full = _full_rect(params, extents, seed)
        return full if geometry is Geometry.FULL_RECT else _half_from_bulk(params, full, seed)
    if not params.has_bw:
        raise ValueError(f"{geometry.value} needs BW parameters")
    meta = {"n": params.bw_n, "m": params.bw_m}
    if geometry is Geometry.BW_RECT:
        return _from_shapes(geometry, bw_rect_shapes(params), seed, stream or Stream.BW_RECT, meta)
    return _from_shapes(geometry, bw_trapezoid_shapes(params), seed, stream or Stream.BW_TRAPEZOID, meta)
