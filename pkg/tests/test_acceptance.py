"""Acceptance criteria, each checked at its stated tolerance.

Every test records one PASS/FAIL line; the lines are repeated in the pytest
terminal summary under "acceptance criteria".
"""

import os
import time
import warnings
from concurrent.futures import ProcessPoolExecutor

import numpy as np
import pytest

from fracgp.cli import main
from fracgp.diagnostics import cumvar_vs_gamma, greedy_gamma_curve, rkhs_identity_suite
from fracgp.kernels import KernelSpec, SpectrumResolutionWarning, decay_slope, nystrom_spectrum
from fracgp.loop import ExperimentConfig, run_gpts
from fracgp.posterior import init_state, incorporate, predict, rebuild, state_from_data
from fracgp.qmc import powers_of_two
from fracgp.rundir import run_seed
from fracgp.sampler import draw_path, generate_candidates


def test_criterion_1_incremental_matches_rebuild(record_criterion):
    start = time.perf_counter()
    rng = np.random.default_rng(2024)
    specs = [KernelSpec.se(2.0), KernelSpec.se(6.0), KernelSpec.matern(1.5, 3.0),
             KernelSpec.matern(2.5, 5.0), KernelSpec.matern(1.2, 4.0), KernelSpec.rq(1.5, 0.2),
             KernelSpec.rq(0.8, 0.5)]
    probes = np.linspace(0, 1, 64)
    worst = 0.0
    for i in range(50):
        spec = specs[i % len(specs)]
        s = init_state(spec, float(10 ** rng.uniform(-3, 0)), float(rng.uniform(0.05, 1.0)))
        for _ in range(int(rng.integers(1, 51))):
            s = incorporate(s, rng.random(), rng.standard_normal())
        a, b = predict(s, probes), predict(rebuild(s), probes)
        worst = max(worst, np.abs(a.mean - b.mean).max(), np.abs(a.cov - b.cov).max(),
                    np.abs(a.var - b.var).max())
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-9 and elapsed < 10
    record_criterion(1, "incremental vs rebuild", ok,
                     f"max abs error {worst:.2e} (tol 1e-9), {elapsed:.2f}s (limit 10s)")
    assert ok


def test_criterion_2_rkhs_norm_identity(record_criterion):
    start = time.perf_counter()
    suite = rkhs_identity_suite(100, seed=7)
    elapsed = time.perf_counter() - start
    ok = suite.max_error <= 1e-8 and elapsed < 5
    record_criterion(2, "posterior RKHS-norm identity", ok,
                     f"max relative error {suite.max_error:.2e} (tol 1e-8), worst condition "
                     f"{suite.worst_condition:.1e}, {elapsed:.2f}s (limit 5s)")
    assert ok


def test_criterion_3_tempering_law(record_criterion):
    rng = np.random.default_rng(3)
    C = generate_candidates(1, 256, "sobol", 11)
    worst_path = worst_mean = 0.0
    for spec in (KernelSpec.se(1.0), KernelSpec.matern(1.5, 2.0), KernelSpec.rq(1.5, 0.2)):
        X, y = rng.random(25), rng.standard_normal(25)
        z = rng.standard_normal(256)
        base = draw_path(state_from_data(spec, 0.1, 1.0, X, y), C, normals=z)
        mu = base.moments.mean
        for alpha in (0.9, 0.5, 0.1, 0.01):
            tempered = draw_path(state_from_data(spec, 0.1, alpha, X, y), C, normals=z)
            expected = mu + alpha**-0.5 * (base.values - mu)
            worst_path = max(worst_path, np.abs(tempered.values - expected).max())
            worst_mean = max(worst_mean, np.abs(tempered.moments.mean - mu).max())
    ok = worst_path <= 1e-12 and worst_mean <= 1e-12
    record_criterion(3, "tempering law", ok,
                     f"path deviation {worst_path:.2e}, mean deviation {worst_mean:.2e} (tol 1e-12)")
    assert ok


def test_criterion_4_information_gain_exponents(record_criterion):
    start = time.perf_counter()
    T_max, pool = 512, 4096
    se = greedy_gamma_curve(KernelSpec.se(1.0), 1, 1.0, T_max, pool, seed=0)
    _, _, r2 = se.polylog_fit(2)
    rq = greedy_gamma_curve(KernelSpec.rq(1.5, 0.2), 1, 1.0, T_max, pool, seed=0)
    rq_slope = rq.log_slope([64, 128, 256, 512])[0]
    mat = greedy_gamma_curve(KernelSpec.matern(1.5, 1.0), 1, 1.0, T_max, pool, seed=0)
    mat_slope = mat.log_slope([64, 128, 256, 512])[0]
    elapsed = time.perf_counter() - start
    ok = (r2 >= 0.98 and abs(rq_slope - 0.25) <= 0.1 and abs(mat_slope - 0.25) <= 0.1
          and elapsed < 300)
    record_criterion(4, "information-gain exponents", ok,
                     f"SE R^2 vs (ln T)^2 {r2:.4f} (>= 0.98); RQ slope {rq_slope:.3f}, "
                     f"Matern slope {mat_slope:.3f} (0.25 +/- 0.1); {elapsed:.1f}s (limit 300s)")
    assert ok


def _seed_traces(config, seeds):
    return [run_gpts(config, s) for s in seeds]


def test_criterion_5_cumulative_variance_bound(record_criterion):
    seeds = range(20)
    details, ok = [], True
    for spec in (KernelSpec.se(1.0), KernelSpec.matern(1.5, 1.0)):
        config = ExperimentConfig(spec, T=512, lam=1.0)
        traces = _seed_traces(config, seeds)
        curve = greedy_gamma_curve(spec, 1, 1.0, 512, 4096, seed=0)
        rep = cumvar_vs_gamma(traces, curve, powers_of_two(512))
        ok &= rep.passed
        details.append(f"{spec.family} max ratio {rep.max_ratio:.3f}")
    record_criterion(5, "cumulative variance <= 4 gamma_T", ok,
                     "; ".join(details) + " (limit 1.05, 20 seeds, T <= 512)")
    assert ok


HORIZONS = [64, 128, 256, 512, 1024, 2048]
SWEEP_SEEDS = list(range(20))


@pytest.fixture(scope="module")
def regret_sweep():
    """Mean final regret per (kernel, horizon) plus saturation summaries."""
    start = time.perf_counter()
    jobs = []
    for name, spec in (("SE", {"family": "SE", "a": 1.0}),
                       ("Matern", {"family": "Matern", "nu": 1.5, "a": 1.0})):
        for T in HORIZONS:
            doc = ExperimentConfig.from_dict({"kernel": spec, "T": T, "lambda": 0.1}).to_dict()
            jobs += [(name, T, doc, s) for s in SWEEP_SEEDS]
    # largest horizons first keeps the pool busy to the end
    jobs.sort(key=lambda j: -j[1])
    workers = os.cpu_count() or 1
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outs = list(pool.map(run_seed, [j[2] for j in jobs], [j[3] for j in jobs]))
    else:
        outs = [run_seed(j[2], j[3]) for j in jobs]
    results = {}
    for (name, T, _, _), (_, csv_text, meta, err) in zip(jobs, outs):
        assert err is None, err
        final = float(csv_text.strip().splitlines()[-1].split(",")[4])
        results.setdefault((name, T), []).append((final, meta))
    return results, time.perf_counter() - start


def _mean_regret(results, name):
    return np.array([np.mean([r for r, _ in results[(name, T)]]) for T in HORIZONS])


def test_criterion_6_regret_rates(regret_sweep, record_criterion):
    from fracgp.fitting import fit_log_slope

    results, elapsed = regret_sweep
    T = np.array(HORIZONS, dtype=float)
    se = _mean_regret(results, "SE")
    mat = _mean_regret(results, "Matern")
    se_slope = fit_log_slope(T, se)[0]
    mat_slope = fit_log_slope(T, mat)[0]
    ratio = mat / T
    sublinear = bool(ratio[-2] < ratio[-3] and ratio[-1] < ratio[-2])
    ok = 0.35 <= se_slope <= 0.75 and mat_slope <= 0.85 and sublinear and elapsed < 1800
    record_criterion(
        6, "regret-rate slopes", ok,
        f"SE slope {se_slope:.3f} (in [0.35, 0.75]); Matern slope {mat_slope:.3f} (<= 0.85); "
        f"Matern R_T/T over last three horizons {np.round(ratio[-3:], 4).tolist()} "
        f"({'decreasing' if sublinear else 'not decreasing'}); "
        f"SE mean R_T {np.round(se, 2).tolist()}; sweep {elapsed / 60:.1f} min "
        f"on {os.cpu_count()} core(s) (limit 30 min)",
    )
    assert ok


def test_criterion_7_saturation_structure(regret_sweep, record_criterion):
    results, _ = regret_sweep
    runs = x0_hits = fired = 0
    for entries in results.values():
        for _, meta in entries:
            runs += 1
            x0_hits += bool(meta["saturation"]["x0_cell_saturated_rounds"])
            fired += bool(meta["monitor_fired"])
    ok = runs == 2 * len(HORIZONS) * len(SWEEP_SEEDS) and x0_hits == 0 and fired == 0
    record_criterion(7, "maximizer never saturated, monitor silent", ok,
                     f"{runs} runs: x0 cell saturated in {x0_hits}, monitor fired in {fired}")
    assert ok


def test_criterion_8_rq_eigen_decay(record_criterion):
    eigs = nystrom_spectrum(KernelSpec.rq(1.5, 0.2), 1, 512, seed=0)
    with warnings.catch_warnings():
        # eigenvalues under the round-off floor are dropped from the fit
        warnings.simplefilter("ignore", SpectrumResolutionWarning)
        slope, _, r2, used = decay_slope(eigs)
    ratio = float(np.median(eigs[4:20] / eigs[3:19]))
    ok = abs(slope + 4.0) <= 0.5
    record_criterion(8, "RQ Nystrom eigen-decay", ok,
                     f"slope {slope:.2f} over {used} resolvable eigenvalues of the window j in [4, 42], "
                     f"R^2 {r2:.3f} (target -4 +/- 0.5); median ratio lambda_(j+1)/lambda_j "
                     f"{ratio:.3f}, i.e. geometric decay")
    assert ok


def test_criterion_9_end_to_end_determinism(tmp_path, record_criterion):
    import json

    cfg = tmp_path / "config.json"
    cfg.write_text(json.dumps({"kernel": {"family": "Matern", "nu": 1.5, "a": 2.0}, "T": 48,
                               "lambda": 0.1, "seeds": [0, 1, 2, 3]}))
    codes = [main(["run", "--config", str(cfg), "--out", str(tmp_path / d)]) for d in ("a", "b")]
    files = sorted((tmp_path / "a").glob("seed_*.csv"))
    same = all(f.read_bytes() == (tmp_path / "b" / f.name).read_bytes() for f in files)
    ok = codes == [0, 0] and len(files) == 4 and same
    record_criterion(9, "end-to-end determinism", ok,
                     f"{len(files)} trace CSVs compared, byte-identical: {same}")
    assert ok
