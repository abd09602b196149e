"""Experiment orchestration: configuration, replica-parallel execution,
record persistence and verdict summaries for experiments E1..E8.

A run writes three files into its output directory:

* ``config.json``  the fully resolved spec (defaults applied)
* ``records.csv``  one row per (grid point, replica), sorted by that key
* ``summary.json`` per-experiment statistics and boolean verdicts

Records are reproducible from ``(master_seed, grid point, replica)`` alone, so
the worker count never changes the output and an interrupted run can be
resumed by skipping keys already on disk.
"""

import csv
import dataclasses
import hashlib
import io
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass
from itertools import product
from pathlib import Path

import numpy as np

from .polymer_core import Endpoint, Mode, Parallelogram, Variant, log_partition, log_partition_inhom, log_partition_parallelogram, log_point_to_line
from .sampling import Geometry, PolymerParams, SeedSpec, Stream, build_coupled_fields, build_field
from .scaling import ContinuumPoint, HVariant, ScalingFrame, h_scaled, required_extents, shape_inequality_margin
from .shape_function import ShapeContext, check_quadratic_expansion, check_rect_gap, check_slope_gap, f_slope, g, _gap_grid
from .special_functions import digamma
from .stats import chernoff_bound_thin_min, dominance_violation, empirical_tail, fit_exponent, ks_two_sample, moment_agreement

__all__ = [
    "EXPERIMENTS",
    "ConfigError",
    "ExperimentSpec",
    "ExperimentRecord",
    "parse_config",
    "spec_from_dict",
    "load_config",
    "emit_config",
    "derive_seed",
    "grid_points",
    "run_experiment",
    "summarize",
    "report",
    "read_records",
]

log = logging.getLogger(__name__)

SEED_ENV = "POLYMER_LAB_SEED"
RECORDS = "records.csv"
SUMMARY = "summary.json"
CONFIG = "config.json"
KS_LEVEL = 0.01


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# spec and records


@dataclass
class ExperimentSpec:
    name: str
    params: PolymerParams
    frame: ScalingFrame
    replicas: int
    master_seed: int
    grid: dict
    b: float = 2.0

    def __post_init__(self):
        if self.name not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.name!r}; expected one of {sorted(EXPERIMENTS)}")
        if self.replicas < 1:
            raise ConfigError("replicas must be >= 1")
        if not self.b > 0:
            raise ConfigError("b must be positive")
        for k, v in self.grid.items():
            if isinstance(v, list) and not v:
                raise ConfigError(f"grid entry {k!r} is empty")

    @property
    def kind(self):
        return EXPERIMENTS[self.name]

    @property
    def effective_replicas(self):
        return 1 if self.kind.deterministic else self.replicas


@dataclass
class ExperimentRecord:
    experiment: str
    grid_index: int
    replica: int
    grid_point: dict
    observables: dict
    seed: int
    wall_time_ms: int = 0

    @property
    def key(self):
        return (self.grid_index, self.replica)


def derive_seed(master_seed, experiment, seed_key):
    """Stable 63-bit seed for one grid point; independent of run order and platform."""
    blob = json.dumps([int(master_seed), experiment, list(seed_key)], separators=(",", ":"), sort_keys=True).encode()
    return int.from_bytes(hashlib.blake2b(blob, digest_size=8).digest(), "little") & ((1 << 63) - 1)


# ---------------------------------------------------------------------------
# experiment definitions


@dataclass(frozen=True)
class _Kind:
    name: str
    grid_defaults: dict
    point_keys: tuple
    observables: tuple
    points: object
    seed_key: object
    evaluate: object
    summarize: object
    deterministic: bool = False
    replica_default: int = 1000


def _frame(spec, N):
    return dataclasses.replace(spec.frame, N=int(N))


def _product(spec, keys):
    lists = [spec.grid[k] for k in keys]
    return [dict(zip(keys, combo)) for combo in product(*lists)]


def _nonincreasing(xs, slack=0.0):
    return all(b <= a + slack for a, b in zip(xs, xs[1:]))


def _by_point(records):
    out = {}
    for r in records:
        out.setdefault(r.grid_index, []).append(r)
    return out


def _column(recs, name):
    return np.array([r.observables[name] for r in recs], dtype=float)


# E1 -------------------------------------------------------------------------


def _e1_eval(spec, pt, seed, replica):
    frame = _frame(spec, pt["N"])
    cp = ContinuumPoint(*spec.grid["point"])
    params = dataclasses.replace(spec.params, theta=float(pt["theta"]))
    full, half = build_coupled_fields(params, required_extents(frame, cp), SeedSpec(seed, replica))
    hf = h_scaled(frame, HVariant.FULL_DELTA, full, cp)
    hh = h_scaled(frame, HVariant.HALF_DELTA, half, cp)
    return {"gap": abs(hf - hh), "h_full": hf, "h_half": hh}


def _e1_summary(spec, points, groups):
    out, verdicts = {}, {}
    for theta in spec.grid["theta"]:
        rows = []
        for idx, pt in enumerate(points):
            if pt["theta"] != theta or idx not in groups:
                continue
            gap = _column(groups[idx], "gap")
            rows.append({"N": pt["N"], "median": float(np.median(gap)), "q99": float(np.quantile(gap, 0.99)), "n": int(gap.size)})
        rows.sort(key=lambda r: r["N"])
        out[f"theta={theta}"] = rows
        verdicts[f"median_nonincreasing[theta={theta}]"] = _nonincreasing([r["median"] for r in rows])
        verdicts[f"q99_nonincreasing[theta={theta}]"] = _nonincreasing([r["q99"] for r in rows])
    return {"gap_quantiles": out}, verdicts


# E2 -------------------------------------------------------------------------


def _bw_params(spec, case):
    return PolymerParams(
        spec.params.alpha,
        bw_alpha0=float(case["alpha0"]),
        bw_alphas=tuple(float(a) for a in case["alphas"]),
        bw_betas=tuple(float(b) for b in case["betas"]),
    )


def _e2_eval(spec, pt, seed, replica):
    p = _bw_params(spec, pt["case"])
    n, m = p.bw_n, p.bw_m
    s = SeedSpec(seed, replica)
    rect = build_field(p, Geometry.BW_RECT, seed=s, stream=Stream.BW_RECT)
    trap = build_field(p, Geometry.BW_TRAPEZOID, seed=s, stream=Stream.BW_TRAPEZOID)
    return {"log_z1": log_partition(rect, Variant.FULL, (1, 1), (n + m + 1, n)), "log_z2": log_point_to_line(trap)}


def _e2_summary(spec, points, groups):
    rows, verdicts = [], {}
    for idx, pt in enumerate(points):
        if idx not in groups:
            continue
        z1, z2 = _column(groups[idx], "log_z1"), _column(groups[idx], "log_z2")
        ks = ks_two_sample(z1, z2)
        zm, zv = moment_agreement(z1, z2)
        row = {
            "case": pt["case"],
            "D": ks.D,
            "threshold": ks.threshold_at(KS_LEVEL),
            "mean_z1": float(z1.mean()),
            "mean_z2": float(z2.mean()),
            "var_z1": float(z1.var(ddof=1)),
            "var_z2": float(z2.var(ddof=1)),
            "z_mean": zm,
            "z_var": zv,
        }
        rows.append(row)
        verdicts[f"ks[{idx}]"] = row["D"] < row["threshold"]
        verdicts[f"moments[{idx}]"] = abs(zm) <= 3.0 and abs(zv) <= 3.0
    return {"cases": rows}, verdicts


# E3 -------------------------------------------------------------------------


def _e3_eval(spec, pt, seed, replica):
    N, T = int(pt["N"]), int(pt["T"])
    f = build_field(spec.params, Geometry.FULL_RECT, (1, N, 1, T), SeedSpec(seed, replica))
    return {"log_z": log_partition(f, Variant.FULL, (1, 1), (N, T))}


def _e3_thresholds(spec, sample):
    if spec.grid["thresholds"] is not None:
        return np.asarray(spec.grid["thresholds"], dtype=float)
    return np.linspace(np.quantile(sample, 0.5), sample.max(), int(spec.grid["n_thresholds"]))


def _e3_summary(spec, points, groups):
    rows, verdicts = [], {}
    for idx, pt in enumerate(points):
        if idx not in groups:
            continue
        z = _column(groups[idx], "log_z")
        thr = _e3_thresholds(spec, z)
        tail = empirical_tail(z, thr)
        bounds, lams = [], []
        for u in thr:
            bnd, lam = chernoff_bound_thin_min(spec.params.alpha, int(pt["N"]), int(pt["T"]), float(u), spec.grid["lambdas"])
            bounds.append(bnd)
            lams.append(lam)
        bounds = np.array(bounds)
        rows.append(
            {
                "N": pt["N"],
                "T": pt["T"],
                "thresholds": thr.tolist(),
                "empirical": tail.exceed_prob.tolist(),
                "half_width": tail.half_width.tolist(),
                "bound": bounds.tolist(),
                "lambda": lams,
            }
        )
        verdicts[f"bound_dominates[{idx}]"] = bool(np.all(bounds >= tail.exceed_prob + 2 * tail.half_width))
        verdicts[f"empirical_within_bound[{idx}]"] = bool(np.all(tail.exceed_prob <= bounds + 2 * tail.half_width))
    return {"tails": rows}, verdicts


# E4 -------------------------------------------------------------------------


def _e4_points(spec):
    gr = spec.grid
    pts = []
    base = {"kind": None, "N": None, "T": None, "k": None, "point": None, "z": None}
    for kind in ("slope", "rect"):
        for N in gr["lemma_N"]:
            for T, k in _gap_grid(int(N), gr["delta"], gr["kappa"]):
                pts.append({**base, "kind": kind, "N": int(N), "T": T, "k": k})
    for N in gr["prop_N"]:
        for i in range(len(gr["prop_points"])):
            pts.append({**base, "kind": "prop", "N": int(N), "point": i})
    for kind in ("peak", "inverse"):
        for z in _e4_z(spec):
            pts.append({**base, "kind": kind, "z": z})
    return pts


def _e4_z(spec):
    if spec.grid["z"] is not None:
        return [float(z) for z in spec.grid["z"]]
    a = spec.params.alpha
    mags = [0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]
    return [float(s * m * a) for m in mags for s in (-1, 1)]


def _e4_eval(spec, pt, seed, replica):
    gr = spec.grid
    ctx = ShapeContext(spec.params.alpha)
    kind = pt["kind"]
    if kind in ("slope", "rect"):
        check = check_slope_gap if kind == "slope" else check_rect_gap
        r = check(ctx, pt["N"], pt["T"], pt["k"], gr["delta"], gr["kappa"])
        return {"margin": r.margin, "constant": r.fitted_C0}
    if kind == "prop":
        frame = dataclasses.replace(spec.frame, N=pt["N"], delta=gr["prop_delta"])
        m = shape_inequality_margin(frame, spec.b, ContinuumPoint(*gr["prop_points"][pt["point"]]))
        return {"margin": m, "constant": m / pt["N"] ** (1.0 / 3.0 + 2.0 * frame.delta)}
    rep = check_quadratic_expansion(ctx, [pt["z"]], gr["fd_step"])
    if kind == "peak":
        return {"margin": float(rep.peak_gap[0]), "constant": rep.C4}
    # g increases through 1 at alpha, so (g(alpha + z) - 1) z > 0
    return {"margin": (g(ctx, ctx.alpha + pt["z"]) - 1.0) * pt["z"], "constant": rep.C2}


def _split_constant(vals, keys, pick):
    # constants fitted on two interleaved, disjoint sub-grids of the key values
    order = sorted(set(keys))
    halves = [set(order[0::2]), set(order[1::2])]
    out = []
    for h in halves:
        sel = [v for v, k in zip(vals, keys) if k in h]
        out.append(pick(sel) if sel else math.nan)
    return out


def _e4_summary(spec, points, groups):
    by_kind = {}
    for idx, pt in enumerate(points):
        if idx in groups:
            r = groups[idx][0]
            key = pt["N"] if pt["kind"] in ("slope", "rect", "prop") else abs(pt["z"])
            by_kind.setdefault(pt["kind"], []).append((r.observables["margin"], r.observables["constant"], key))
    out, verdicts = {}, {}
    for kind, rows in by_kind.items():
        margins = [m for m, _, _ in rows]
        consts = [c for _, c, _ in rows]
        keys = [k for _, _, k in rows]
        pick = max if kind in ("peak", "inverse") else min
        sub = _split_constant(consts, keys, pick)
        fitted = pick(consts)
        spread = abs(sub[0] - sub[1]) / max(abs(sub[0]), abs(sub[1])) if all(map(math.isfinite, sub)) else math.nan
        out[kind] = {"min_margin": min(margins), "constant": fitted, "subgrid_constants": sub, "relative_spread": spread, "n": len(rows)}
        verdicts[f"margins_positive[{kind}]"] = min(margins) > 0
        verdicts[f"constant_finite[{kind}]"] = math.isfinite(fitted)
        verdicts[f"constant_stable[{kind}]"] = bool(spread <= 0.2)
    if spec.grid["z"] is not None or "peak" in by_kind:
        rep = check_quadratic_expansion(ShapeContext(spec.params.alpha), _e4_z(spec), spec.grid["fd_step"])
        out["expansion"] = {"C1": rep.C1, "C2": rep.C2, "C3": rep.C3, "C4": rep.C4}
    return {"checks": out}, verdicts


# E5 -------------------------------------------------------------------------


def _e5_eval(spec, pt, seed, replica):
    a = spec.params.alpha
    N, T = int(pt["N"]), int(pt["T"])
    s = SeedSpec(seed, replica)
    return {
        "log_z0": log_partition_inhom(a, N, T, 0.0, s, Stream.INHOMOGENEOUS_REFERENCE),
        "log_z_theta": log_partition_inhom(a, N, T, float(pt["theta"]), s, Stream.INHOMOGENEOUS),
    }


def _e5_summary(spec, points, groups):
    rows, verdicts = [], {}
    for idx, pt in enumerate(points):
        if idx not in groups:
            continue
        z0, zt = _column(groups[idx], "log_z0"), _column(groups[idx], "log_z_theta")
        # Z_0 dominates Z_theta: F_theta >= F_0 up to the KS band
        viol = dominance_violation(zt, z0)
        band = ks_two_sample(z0, zt).threshold_at(KS_LEVEL)
        rows.append({**pt, "violation": viol, "band": band, "mean_z0": float(z0.mean()), "mean_z_theta": float(zt.mean())})
        verdicts[f"dominance[{idx}]"] = viol <= band
    return {"dominance": rows}, verdicts


# E6 -------------------------------------------------------------------------


def _e6_eval(spec, pt, seed, replica):
    N = int(pt["N"])
    f = build_field(spec.params, Geometry.FULL_RECT, (1, N, 1, N), SeedSpec(seed, replica))
    lz = log_partition(f, Variant.FULL, (1, 1), (N, N))
    return {"log_z": lz, "centered": (lz + 2 * N * digamma(spec.params.alpha)) / N ** (1.0 / 3.0)}


def _e6_summary(spec, points, groups):
    rows = []
    for idx, pt in enumerate(points):
        if idx in groups:
            lz, c = _column(groups[idx], "log_z"), _column(groups[idx], "centered")
            rows.append({"N": pt["N"], "mean_centered": float(c.mean()), "var_log_z": float(lz.var(ddof=1)), "n": int(lz.size)})
    rows.sort(key=lambda r: r["N"])
    lo, hi = spec.grid["slope_window"]
    if len(rows) >= 3:
        slope, err = fit_exponent([r["N"] for r in rows], [r["var_log_z"] for r in rows])
    else:
        slope, err = math.nan, math.nan
    out = {"per_N": rows, "var_slope": slope, "var_slope_stderr": err, "max_abs_mean_centered": max(abs(r["mean_centered"]) for r in rows)}
    return out, {"var_slope_in_window": bool(lo <= slope <= hi)}


# E7 -------------------------------------------------------------------------


def _e7_geometry(pt):
    N = int(pt["N"])
    scale = N ** (2.0 / 3.0)
    r = int(round(pt["s"] * scale))
    k = max(1, int(round(pt["t"] * scale)))
    return (1 - r, 1 + r), (N, N), k


def _e7_eval(spec, pt, seed, replica):
    a, b, k = _e7_geometry(pt)
    ext = (min(a[0], b[0]), b[0], min(a[1], b[1]), b[1])
    f = build_field(spec.params, Geometry.FULL_RECT, ext, SeedSpec(seed, replica))
    para = Parallelogram(Endpoint(*a), Endpoint(*b), k)
    lin = log_partition_parallelogram(f, para, Mode.INSIDE)
    lex = log_partition_parallelogram(f, para, Mode.EXITING)
    return {"log_in": lin, "log_exit": lex, "diff": lex - lin}


def _e7_summary(spec, points, groups):
    curves, verdicts = {}, {}
    for idx, pt in enumerate(points):
        if idx not in groups:
            continue
        d = _column(groups[idx], "diff")
        key = f"N={pt['N']},s={pt['s']}"
        _, _, k = _e7_geometry(pt)
        curves.setdefault(key, []).append({"t": pt["t"], "k": k, "prob": float(np.mean(d >= -spec.grid["Delta"]))})
    for key, rows in curves.items():
        rows.sort(key=lambda r: r["k"])
        verdicts[f"monotone[{key}]"] = _nonincreasing([r["prob"] for r in rows])
    return {"exit_probability": curves}, verdicts


# E8 -------------------------------------------------------------------------


def _e8_slope(spec, pt):
    s = pt["slope"]
    if s == "edge":
        N = int(pt["N"])
        return 1.0 - spec.grid["kappa"] * N ** (-1.0 / 3.0 + spec.frame.delta)
    return float(s)


def _e8_eval(spec, pt, seed, replica):
    N = int(pt["N"])
    T = max(1, int(math.floor(_e8_slope(spec, pt) * N)))
    f = build_field(spec.params, Geometry.HALF_TRAPEZOID, (1, N, 1, T), SeedSpec(seed, replica))
    lz = log_partition(f, Variant.HALF, (1, 1), (N, T))
    return {"log_z": lz, "centered": (lz + N * f_slope(spec.params.alpha, T / N)) / N ** (1.0 / 3.0)}


def _e8_summary(spec, points, groups):
    xs = np.asarray(spec.grid["x"], dtype=float)
    curves = []
    for idx, pt in enumerate(points):
        if idx in groups:
            c = _column(groups[idx], "centered")
            tail = empirical_tail(c, xs)
            curves.append({"N": pt["N"], "slope": _e8_slope(spec, pt), "x": xs.tolist(), "tail": tail.exceed_prob.tolist()})
    px, py = [], []
    for cv in curves:
        for x, p in zip(cv["x"], cv["tail"]):
            if x > 0 and p > 0:
                px.append(x * x)
                py.append(math.log(p))
    if len(set(px)) >= 2:
        c = -float(np.polyfit(px, py, 1)[0])
        C = max(p * math.exp(c * x * x) for cv in curves for x, p in zip(cv["x"], cv["tail"]))
    else:
        c, C = math.nan, math.nan
    out = {"curves": curves, "envelope_c": c, "envelope_C": C}
    return out, {"gaussian_envelope": bool(c > 0 and math.isfinite(C))}


# registry --------------------------------------------------------------------

EXPERIMENTS = {
    k.name: k
    for k in (
        _Kind(
            "E1_coupling_gap",
            {"N": [50, 100, 200, 400], "theta": [0.0, 0.5], "point": [0.0, 0.0, 0.0, 1.0]},
            ("N", "theta"),
            ("gap", "h_full", "h_half"),
            lambda s: _product(s, ("N", "theta")),
            lambda p: (p["N"],),
            _e1_eval,
            _e1_summary,
        ),
        _Kind(
            "E2_bw_identity",
            {
                "case": [
                    {"alpha0": 0.3, "alphas": [0.5, 0.7], "betas": [0.6, 0.4]},
                    {"alpha0": 0.3, "alphas": [0.5], "betas": [0.6, 0.4]},
                ]
            },
            ("case",),
            ("log_z1", "log_z2"),
            lambda s: _product(s, ("case",)),
            lambda p: (p["case"],),
            _e2_eval,
            _e2_summary,
            replica_default=100000,
        ),
        _Kind(
            "E3_thin_tail",
            {"N": [50], "T": [5], "thresholds": None, "n_thresholds": 20, "lambdas": None},
            ("N", "T"),
            ("log_z",),
            lambda s: _product(s, ("N", "T")),
            lambda p: (p["N"], p["T"]),
            _e3_eval,
            _e3_summary,
            replica_default=100000,
        ),
        _Kind(
            "E4_shape_lemmas",
            {
                "lemma_N": [100, 300, 1000, 3000, 10000],
                "delta": 0.1,
                "kappa": 0.5,
                "prop_N": [200, 400, 800, 1600, 3200],
                "prop_delta": 0.1,
                "prop_points": [[0.0, 0.0, 0.0, 1.0], [0.0, 0.0, 0.0, 0.75], [0.0, 0.25, 0.0, 1.5], [0.0, -1.0, 0.0, 1.0]],
                "z": None,
                "fd_step": 1e-2,
            },
            ("kind", "N", "T", "k", "point", "z"),
            ("margin", "constant"),
            _e4_points,
            lambda p: (),
            _e4_eval,
            _e4_summary,
            deterministic=True,
            replica_default=1,
        ),
        _Kind(
            "E5_stoch_dominance",
            {"N": [64], "T": [64], "theta": [0.2, 1.0]},
            ("N", "T", "theta"),
            ("log_z0", "log_z_theta"),
            lambda s: _product(s, ("N", "T", "theta")),
            lambda p: (p["N"], p["T"]),
            _e5_eval,
            _e5_summary,
            replica_default=10000,
        ),
        _Kind(
            "E6_lln_fluctuations",
            {"N": [64, 128, 256, 512, 1024], "slope_window": [0.5, 0.85]},
            ("N",),
            ("log_z", "centered"),
            lambda s: _product(s, ("N",)),
            lambda p: (p["N"],),
            _e6_eval,
            _e6_summary,
            replica_default=200,
        ),
        _Kind(
            "E7_exit_vs_in",
            {"N": [128], "s": [0.0], "t": [0.5, 1.0, 1.5, 2.0], "Delta": 0.0},
            ("N", "s", "t"),
            ("log_in", "log_exit", "diff"),
            lambda s: _product(s, ("N", "s", "t")),
            lambda p: (p["N"], p["s"]),
            _e7_eval,
            _e7_summary,
            replica_default=200,
        ),
        _Kind(
            "E8_uniform_upper_tail",
            {"N": [256], "slope": [0.5, 0.8, "edge"], "kappa": 0.5, "x": [0.25 * i for i in range(17)]},
            ("N", "slope"),
            ("log_z", "centered"),
            lambda s: _product(s, ("N", "slope")),
            lambda p: (p["N"],),
            _e8_eval,
            _e8_summary,
            replica_default=1000,
        ),
    )
}


def grid_points(spec):
    return spec.kind.points(spec)


# ---------------------------------------------------------------------------
# configuration

_TOP_DEFAULTS = {
    "theta": 0.0,
    "delta": 0.2,
    "q": 1.0,
    "sigma_p": 1.0,
    "p_override": None,
    "b": 2.0,
    "replicas": None,
    "grid": None,
}
_REQUIRED = ("experiment", "alpha", "master_seed")


def _num(raw, key, cast=float):
    v = raw[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{key!r} must be a number, got {v!r}")
    return cast(v)


def spec_from_dict(raw, env=None):
    """Validate a config mapping and apply defaults; unknown keys are errors."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    env = os.environ if env is None else env
    unknown = set(raw) - set(_REQUIRED) - set(_TOP_DEFAULTS)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    for k in _REQUIRED:
        if k not in raw:
            raise ConfigError(f"missing required key {k!r}")
    name = raw["experiment"]
    if name not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {name!r}; expected one of {sorted(EXPERIMENTS)}")
    kind = EXPERIMENTS[name]
    cfg = {**_TOP_DEFAULTS, **raw}
    alpha = _num(cfg, "alpha")
    if not alpha > 0:
        raise ConfigError(f"alpha must be positive, got {alpha}")
    theta = _num(cfg, "theta")
    if not theta >= 0:
        raise ConfigError(f"theta must be >= 0, got {theta}")
    seed = _num(cfg, "master_seed", int)
    if env.get(SEED_ENV):
        try:
            seed = int(env[SEED_ENV])
        except ValueError as exc:
            raise ConfigError(f"{SEED_ENV} must be an integer, got {env[SEED_ENV]!r}") from exc
    if seed < 0:
        raise ConfigError("master_seed must be >= 0")
    replicas = kind.replica_default if cfg["replicas"] is None else _num(cfg, "replicas", int)
    grid_raw = cfg["grid"] or {}
    if not isinstance(grid_raw, dict):
        raise ConfigError("grid must be an object")
    bad = set(grid_raw) - set(kind.grid_defaults)
    if bad:
        raise ConfigError(f"unknown grid keys for {name}: {sorted(bad)}")
    grid = json.loads(json.dumps({**kind.grid_defaults, **grid_raw}))
    p_override = None if cfg["p_override"] is None else _num(cfg, "p_override")
    try:
        frame = ScalingFrame(
            N=1,
            delta=_num(cfg, "delta"),
            alpha=alpha,
            q=_num(cfg, "q"),
            sigma_p=_num(cfg, "sigma_p"),
            p_override=p_override,
        )
        spec = ExperimentSpec(name, PolymerParams(alpha, theta), frame, replicas, seed, grid, _num(cfg, "b"))
        pts = grid_points(spec)
    except ConfigError:
        raise
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigError(f"invalid config: {exc}") from exc
    if not pts:
        raise ConfigError("grid produces no points")
    return spec


def parse_config(path, env=None):
    """Read and validate a JSON config file."""
    text = Path(path).read_text()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    return spec_from_dict(raw, env)


def load_config(text, env=None):
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return spec_from_dict(raw, env)


def emit_config(spec):
    """Canonical JSON text for a spec; parsing it gives back the same spec."""
    raw = {
        "experiment": spec.name,
        "alpha": spec.params.alpha,
        "theta": spec.params.theta,
        "delta": spec.frame.delta,
        "q": spec.frame.q,
        "sigma_p": spec.frame.sigma_p,
        "p_override": spec.frame.p_override,
        "b": spec.b,
        "replicas": spec.replicas,
        "master_seed": spec.master_seed,
        "grid": spec.grid,
    }
    return json.dumps(raw, indent=2, sort_keys=True) + "\n"


# ---------------------------------------------------------------------------
# records on disk


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (list, dict)):
        return json.dumps(v, separators=(",", ":"), sort_keys=True)
    return str(v)


def _header(kind):
    return ["experiment", "grid_index", "replica", "seed", *kind.point_keys, *kind.observables, "wall_time_ms"]


def _row(kind, rec):
    return [
        rec.experiment,
        rec.grid_index,
        rec.replica,
        rec.seed,
        *(_fmt(rec.grid_point.get(k)) for k in kind.point_keys),
        *(_fmt(rec.observables[k]) for k in kind.observables),
        rec.wall_time_ms,
    ]


def _csv_line(values):
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerow([_fmt(v) if not isinstance(v, str) else v for v in values])
    return buf.getvalue()


def read_records(spec, path):
    """Parse a records file back into ExperimentRecord objects; truncated trailing rows are dropped."""
    kind = spec.kind
    header = _header(kind)
    points = grid_points(spec)
    out = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        first = next(reader, None)
        if first is None:
            return out
        if first != header:
            raise ValueError(f"{path}: header does not match experiment {spec.name}")
        n_pk = len(kind.point_keys)
        for row in reader:
            if len(row) != len(header):
                continue
            try:
                gi, rep, seed = int(row[1]), int(row[2]), int(row[3])
                obs = {k: float(v) for k, v in zip(kind.observables, row[4 + n_pk : 4 + n_pk + len(kind.observables)])}
                wall = int(row[-1])
            except ValueError:
                continue
            if not 0 <= gi < len(points):
                continue
            out.append(ExperimentRecord(spec.name, gi, rep, points[gi], obs, seed, wall))
    return out


# ---------------------------------------------------------------------------
# execution


def _evaluate_block(spec, grid_index, lo, hi):
    kind = spec.kind
    pt = grid_points(spec)[grid_index]
    seed = derive_seed(spec.master_seed, spec.name, kind.seed_key(pt))
    recs = []
    for rep in range(lo, hi):
        t0 = time.perf_counter()
        obs = kind.evaluate(spec, pt, seed, rep)
        ms = int(round((time.perf_counter() - t0) * 1000))
        recs.append(ExperimentRecord(spec.name, grid_index, rep, pt, {k: float(obs[k]) for k in kind.observables}, seed, ms))
    return recs


def _blocks(spec, done, chunk):
    reps = spec.effective_replicas
    for gi in range(len(grid_points(spec))):
        lo = 0
        while lo < reps:
            hi = min(reps, lo + chunk)
            if any((gi, r) not in done for r in range(lo, hi)):
                yield gi, lo, hi
            lo = hi


def run_experiment(spec, out_dir, workers=1, chunk=None, resume=True):
    """Run (or resume) an experiment; returns the summary dict.

    Records are appended as blocks finish and rewritten in key order at the
    end, so a crash leaves a usable partial file.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg_text = emit_config(spec)
    cfg_path, rec_path = out / CONFIG, out / RECORDS
    kind = spec.kind
    existing = []
    if resume and rec_path.exists():
        if cfg_path.exists() and cfg_path.read_text() != cfg_text:
            raise ConfigError(f"{out} holds results for a different config; use a fresh directory")
        existing = read_records(spec, rec_path)
    cfg_path.write_text(cfg_text)
    done = {r.key for r in existing}
    if chunk is None:
        chunk = max(1, min(2000, spec.effective_replicas // max(1, 4 * workers)))

    with open(rec_path, "w", newline="") as fh:
        fh.write(_csv_line(_header(kind)))
        for r in existing:
            fh.write(_csv_line(_row(kind, r)))
        fh.flush()
        blocks = [b for b in _blocks(spec, done, chunk)]
        log.info("%s: %d blocks to run (%d records already on disk)", spec.name, len(blocks), len(existing))
        new = []

        def _keep(recs):
            recs = [r for r in recs if r.key not in done]
            for r in recs:
                fh.write(_csv_line(_row(kind, r)))
                done.add(r.key)
            fh.flush()
            new.extend(recs)

        if workers <= 1:
            for b in blocks:
                _keep(_evaluate_block(spec, *b))
        else:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                futs = [pool.submit(_evaluate_block, spec, *b) for b in blocks]
                for fut in as_completed(futs):
                    _keep(fut.result())

    records = sorted(existing + new, key=lambda r: r.key)
    tmp = rec_path.with_suffix(".tmp")
    with open(tmp, "w", newline="") as fh:
        fh.write(_csv_line(_header(kind)))
        for r in records:
            fh.write(_csv_line(_row(kind, r)))
    os.replace(tmp, rec_path)
    summary = summarize(spec, records)
    (out / SUMMARY).write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return summary


def summarize(spec, records):
    """Statistics and verdicts derived from records alone."""
    points = grid_points(spec)
    body, verdicts = spec.kind.summarize(spec, points, _by_point(records))
    verdicts = {k: bool(v) for k, v in verdicts.items()}
    return {
        "experiment": spec.name,
        "master_seed": spec.master_seed,
        "records": len(records),
        "expected_records": len(points) * spec.effective_replicas,
        **body,
        "verdicts": verdicts,
        "pass": bool(verdicts) and all(verdicts.values()),
    }


def report(in_dir):
    """Re-derive summary.json from the config and records in ``in_dir``."""
    d = Path(in_dir)
    spec = parse_config(d / CONFIG, env={})
    summary = summarize(spec, read_records(spec, d / RECORDS))
    (d / SUMMARY).write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return summary
