"""Acceptance criteria 1-10.

Each test records a one-line PASS/FAIL verdict (shown in the pytest terminal
summary) and then asserts it.  The Monte-Carlo criteria run the harness at full
scale, so this module takes several minutes on one core.
"""

import math
import time

import numpy as np

from polymer_lab.harness import RECORDS, run_experiment, spec_from_dict
from polymer_lab.polymer_core import Variant, log_partition, log_partition_inhom, log_point_to_line
from polymer_lab.sampling import Geometry, PolymerParams, SeedSpec, build_coupled_fields, build_field, build_inhomogeneous_field
from polymer_lab.shape_function import ShapeContext, f_prime, f_slope, g, g_inverse, shape_F
from polymer_lab.special_functions import digamma
from polymer_lab.stats import logsumexp

from ._oracles import enumerate_log_z, log_sum, oracle_value

# one master seed shared by every stochastic criterion
SEED = 2025
ALPHAS = (0.3, 0.5, 1.0)
POINT_VARIANTS = ("Full", "Half", "In", "Boundary", "Exit", "InParallelogram", "ExitParallelogram")


def _record(log, number, name, ok, detail):
    line = f"[{number:02d}] {'PASS' if ok else 'FAIL'}  {name}: {detail}"
    print(line)
    log.append(line)
    return ok


def _close(a, b, tol):
    if a == -math.inf or b == -math.inf:
        return a == b
    return abs(a - b) <= tol


def _spec(name, **extra):
    return spec_from_dict({"experiment": name, "alpha": 0.5, "master_seed": SEED, **extra}, env={})


def _run(name, tmp_path, **extra):
    t0 = time.perf_counter()
    summary = run_experiment(_spec(name, **extra), tmp_path / name, resume=False)
    return summary, time.perf_counter() - t0


def _random_point_case(rng, trial, variant_index):
    alpha = ALPHAS[trial % 3]
    ni, nj = (int(v) for v in rng.integers(1, 8, size=2))
    lo_i, lo_j = (int(v) for v in rng.integers(-2, 3, size=2))
    ext = (lo_i, lo_i + ni - 1, lo_j, lo_j + nj - 1)
    full, half = build_coupled_fields(PolymerParams(alpha, 0.4), ext, SeedSpec(SEED + trial, variant_index))
    if trial % 2:
        a, b = (ext[0], ext[2]), (ext[1], ext[3])
    else:
        a = (int(rng.integers(ext[0], ext[1] + 1)), int(rng.integers(ext[2], ext[3] + 1)))
        b = (int(rng.integers(a[0], ext[1] + 1)), int(rng.integers(a[1], ext[3] + 1)))
    return full, half, a, b, int(rng.integers(1, 4))


def test_01_dp_matches_enumeration(acceptance_log):
    worst, dp_time, n_cases = 0.0, 0.0, 0
    for vi, variant in enumerate(POINT_VARIANTS):
        rng = np.random.default_rng(vi)
        done = 0
        while done < 200:
            full, half, a, b, k = _random_point_case(rng, done, vi)
            if "Parallelogram" in variant and a == b:
                continue
            field = half if variant in ("Half", "Boundary") else full
            t0 = time.perf_counter()
            got = log_partition(field, Variant(variant), a, b, k=k)
            dp_time += time.perf_counter() - t0
            want = oracle_value(variant, full, half, a, b, k)
            if not _close(got, want, 1e-10):
                worst = math.inf
            elif math.isfinite(got):
                worst = max(worst, abs(got - want))
            done += 1
        n_cases += done

    rng = np.random.default_rng(100)
    for trial in range(200):
        alpha = ALPHAS[trial % 3]
        N, T = (int(v) for v in rng.integers(1, 8, size=2))
        theta = float(rng.uniform(0, 1.5))
        s = SeedSpec(SEED, trial)
        t0 = time.perf_counter()
        got = log_partition_inhom(alpha, N, T, theta, s)
        dp_time += time.perf_counter() - t0
        want = enumerate_log_z(build_inhomogeneous_field(alpha, theta, N, T, s), (1, 1), (N, T))
        worst = max(worst, abs(got - want))

    for trial in range(200):
        n = int(rng.integers(1, 4))
        m = int(rng.integers(1, 8 - 2 * n))
        p = PolymerParams(
            ALPHAS[trial % 3],
            bw_alpha0=float(rng.uniform(0.1, 1.0)),
            bw_alphas=tuple(float(v) for v in rng.uniform(0.2, 1.2, size=n)),
            bw_betas=tuple(float(v) for v in rng.uniform(0.2, 1.2, size=m)),
        )
        trap = build_field(p, Geometry.BW_TRAPEZOID, seed=SeedSpec(SEED, trial))
        t0 = time.perf_counter()
        got = log_point_to_line(trap)
        dp_time += time.perf_counter() - t0
        want = log_sum([enumerate_log_z(trap, (1, 1), (2 * n - k + m + 1, k)) for k in range(1, n + 1)])
        worst = max(worst, abs(got - want))
    n_cases += 400

    ok = worst <= 1e-10 and dp_time < 10
    _record(acceptance_log, 1, "DP vs enumeration", ok, f"{n_cases} fields over 9 variants, max |err| {worst:.1e}, DP time {dp_time:.2f}s")
    assert ok


def test_02_partition_identities(acceptance_log):
    t0 = time.perf_counter()
    worst = 0.0
    rng = np.random.default_rng(2)
    for trial in range(100):
        n = int(rng.integers(2, 8))
        full, half = build_coupled_fields(PolymerParams(ALPHAS[trial % 3], float(rng.uniform(0, 1))), (1, n, 1, n), SeedSpec(SEED, trial))
        ai = int(rng.integers(1, n + 1))
        a = (ai, int(rng.integers(1, ai + 1)))
        b = (n, int(rng.integers(a[1], n + 1)))
        lf = log_partition(full, Variant.FULL, a, b)
        lh = log_partition(half, Variant.HALF, a, b)
        lin = log_partition(half, Variant.IN, a, b)
        lex = log_partition(full, Variant.EXIT, a, b)
        lb = log_partition(half, Variant.BOUNDARY, a, b)
        for x, y in ((logsumexp(lin, lex), lf), (logsumexp(lin, lb), lh)):
            worst = max(worst, 0.0 if x == y else abs(x - y))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-10 and elapsed < 10
    _record(acceptance_log, 2, "partition identities", ok, f"100 coupled fields, max |err| {worst:.1e}, {elapsed:.2f}s")
    assert ok


def test_03_shape_suite(acceptance_log):
    t0 = time.perf_counter()
    errs = {}
    rt = 0.0
    for alpha in (0.3, 0.5, 1.0, 2.0):
        ctx = ShapeContext(alpha)
        for x in np.geomspace(1e-2, 1e2, 161):
            rt = max(rt, abs(g(ctx, g_inverse(ctx, x)) - x) / max(1.0, x))
    errs["round_trip"] = (rt, 1e-12)
    peak = max(abs(shape_F(a, a) + digamma(a)) / max(1.0, abs(digamma(a))) for a in (0.3, 0.5, 1.0, 2.0))
    errs["F_peak"] = (peak, 1e-12)
    sym = 0.0
    for alpha in (0.3, 0.5, 1.0):
        for z in np.linspace(0.01, 0.98, 50) * alpha:
            v = shape_F(alpha, alpha + z)
            sym = max(sym, abs(v - shape_F(alpha, alpha - z)) / max(1.0, abs(v)))
    errs["F_symmetry"] = (sym, 1e-12)
    fd, h = 0.0, 1e-6
    for alpha in (0.3, 0.5, 1.0):
        for x in np.linspace(0.2, 5.0, 49):
            d = (f_slope(alpha, x + h) - f_slope(alpha, x - h)) / (2 * h)
            fd = max(fd, abs(d - f_prime(alpha, x)))
    errs["f_prime_fd"] = (fd, 1e-6)
    ident = 0.0
    for alpha in (0.3, 0.5, 1.0):
        for N in (100, 1000, 10000):
            for r in np.arange(1, 10) / 10:
                T = int(round(r * N))
                lhs = -N * f_slope(alpha, T / N)
                rhs = (N + T) * shape_F(alpha, g_inverse(alpha, T / N))
                ident = max(ident, abs(lhs - rhs) / (N + T))
    errs["free_energy_identity"] = (ident, 1e-8)
    elapsed = time.perf_counter() - t0
    ok = all(v <= tol for v, tol in errs.values()) and elapsed < 5
    detail = ", ".join(f"{k} {v:.1e}" for k, (v, _) in errs.items())
    _record(acceptance_log, 3, "shape-function suite", ok, f"{detail}, {elapsed:.2f}s")
    assert ok


def test_04_bw_identity(acceptance_log, tmp_path):
    s, dt = _run("E2_bw_identity", tmp_path, replicas=100_000)
    ok = s["pass"] and dt < 300
    parts = [f"n={len(c['case']['alphas'])}: D={c['D']:.4f} (thr {c['threshold']:.4f}) z_mean={c['z_mean']:+.2f} z_var={c['z_var']:+.2f}" for c in s["cases"]]
    _record(acceptance_log, 4, "BW identity", ok, f"{'; '.join(parts)}, {dt:.0f}s")
    assert ok


def test_05_thin_rectangle_bound(acceptance_log, tmp_path):
    s, dt = _run("E3_thin_tail", tmp_path, replicas=100_000)
    t = s["tails"][0]
    emp, hw, bnd = (np.array(t[k]) for k in ("empirical", "half_width", "bound"))
    ok = len(bnd) == 20 and bool(np.all(emp <= bnd + 2 * hw)) and dt < 120
    slack = float(np.min(bnd + 2 * hw - emp))
    _record(acceptance_log, 5, "thin-rectangle bound", ok, f"20 thresholds, min(bound + 2hw - emp) {slack:.2e}, {dt:.0f}s")
    assert ok


def test_06_deterministic_inequalities(acceptance_log, tmp_path):
    s, dt = _run("E4_shape_lemmas", tmp_path)
    ok = s["pass"] and dt < 60
    spreads = ", ".join(f"{k} {v['relative_spread']:.2f}" for k, v in s["checks"].items() if "relative_spread" in v)
    _record(acceptance_log, 6, "deterministic inequalities", ok, f"all margins > 0; constant spreads {spreads}; {dt:.1f}s")
    assert ok


def test_07_fluctuation_exponent(acceptance_log, tmp_path):
    s, dt = _run("E6_lln_fluctuations", tmp_path, replicas=200)
    ok = 0.5 <= s["var_slope"] <= 0.85 and dt < 600
    _record(acceptance_log, 7, "fluctuation exponent", ok, f"slope {s['var_slope']:.3f} +/- {s['var_slope_stderr']:.3f}, {dt:.0f}s")
    assert ok


def test_08_coupling_gap(acceptance_log, tmp_path):
    s, dt = _run("E1_coupling_gap", tmp_path, replicas=1000, delta=0.2, b=2.0)
    ok = s["pass"] and dt < 900
    parts = []
    for key, rows in s["gap_quantiles"].items():
        parts.append(f"{key} q99 " + "/".join(f"{r['q99']:.3g}" for r in rows))
    _record(acceptance_log, 8, "coupling gap", ok, f"{'; '.join(parts)}, {dt:.0f}s")
    assert ok


def test_09_stochastic_dominance(acceptance_log, tmp_path):
    s, dt = _run("E5_stoch_dominance", tmp_path, replicas=10_000)
    ok = s["pass"] and dt < 180
    parts = [f"theta={r['theta']}: violation {r['violation']:.4f} <= band {r['band']:.4f}" for r in s["dominance"]]
    _record(acceptance_log, 9, "stochastic dominance", ok, f"{'; '.join(parts)}, {dt:.0f}s")
    assert ok


SMALL = {
    "E1_coupling_gap": {"replicas": 20, "grid": {"N": [8, 16]}},
    "E2_bw_identity": {"replicas": 200},
    "E3_thin_tail": {"replicas": 200, "grid": {"N": [10]}},
    "E4_shape_lemmas": {},
    "E5_stoch_dominance": {"replicas": 100, "grid": {"N": [8], "T": [8]}},
    "E6_lln_fluctuations": {"replicas": 20, "grid": {"N": [8, 16, 32]}},
    "E7_exit_vs_in": {"replicas": 20, "grid": {"N": [32]}},
    "E8_uniform_upper_tail": {"replicas": 30, "grid": {"N": [32]}},
}


def _without_timing(path):
    lines = path.read_bytes().splitlines(keepends=True)
    return b"".join(line.rsplit(b",", 1)[0] + b"\n" for line in lines)


def test_10_reproducibility(acceptance_log, tmp_path):
    bad = []
    for name, extra in SMALL.items():
        spec = _spec(name, **extra)
        outs = []
        for tag, workers in (("a", 1), ("b", 1), ("c", 2)):
            d = tmp_path / f"{name}_{tag}"
            run_experiment(spec, d, workers=workers, chunk=7 if workers > 1 else None, resume=False)
            outs.append(_without_timing(d / RECORDS))
        if not (outs[0] == outs[1] == outs[2]):
            bad.append(name)
    ok = not bad
    _record(acceptance_log, 10, "reproducibility", ok, f"8 experiments, workers 1/1/2, byte-identical records: {'yes' if ok else bad}")
    assert ok
