"""End-to-end acceptance checks, one test per criterion.

Each test prints a single ``PASS``/``FAIL`` line (also collected into the
terminal summary) and asserts at the stated tolerance.
"""
import time

import numpy as np

from helpers import joint_chisquare, verdict
from oracles import brute_moments, convolved_detected_moments
from tripartite import (
    CoherenceMismatch, CouplingConfig, DetectionConfig, FitSpec, ModeMeans, NoiseModel, ScanConfig,
    correlation_coefficient, detected_correlation, estimate_statistics, fit_pump_scan, joint_pmf,
    mode_means, noise_reduction, photon_moments, sample_run,
)
from tripartite.fitting import synthesize_scan
from tripartite.scan import run_scan
from tripartite.statistics import truncation_limit

ETA = 0.28
Z_LAB = 4e-3
SCANS = {
    "g1-scan": dict(axis="g1_sq", coupling=8.17e5, x=np.linspace(1.86e6, 2.17e6, 20), eta1=0.31, eta_sum=0.28),
    "g2-scan": dict(axis="g2_sq", coupling=1.52e6, x=np.linspace(1.97e4, 1.27e5, 20), eta1=0.283, eta_sum=0.28),
}


def _random_couplings(rng, n):
    g1 = rng.uniform(0.05, 3.0, n)
    g2 = rng.uniform(0.05, 3.0, n)
    z = rng.uniform(0.1, 2.0, n)
    return [CouplingConfig(a, b, c) for a, b, c in zip(g1, g2, z)]


def test_criterion_1_ideal_noise_reduction():
    t0 = time.perf_counter()
    d = DetectionConfig.uniform(ETA)
    rng = np.random.default_rng(101)
    analytic = [noise_reduction(mode_means(c), d, "1,2+3") for c in _random_couplings(rng, 200)]
    exact = all(r == 0.72 for r in analytic)
    m = mode_means(CouplingConfig(1.0, 2.0, 1.0))
    rep = estimate_statistics(sample_run(m, d, NoiseModel(), 50_000, seed=2024))
    r_hat, se = rep.r("1,2+3"), rep.stderr["R_1,2+3"]
    elapsed = time.perf_counter() - t0
    ok = exact and abs(r_hat - 0.72) <= 3 * se and elapsed < 5.0
    verdict(
        "criterion 1 (R_1,2+3 = 1 - eta)",
        ok,
        f"analytic exact={exact}, MC {r_hat:.4f} +/- {se:.4f}, {elapsed:.2f}s",
    )


def test_criterion_2_perfect_sum_correlation():
    rng = np.random.default_rng(202)
    worst_ideal = 0.0
    for c in _random_couplings(rng, 1000):
        m = mode_means(c)
        worst_ideal = max(worst_ideal, abs(correlation_coefficient(m, "1,2+3") - 1.0))
        worst_ideal = max(worst_ideal, abs(photon_moments(m).correlation("1,2+3") - 1.0))
    worst_detected = 0.0
    for n1 in np.linspace(0.1, 3.0, 8):
        frac = rng.uniform(0.2, 0.8)
        m = ModeMeans.from_pair(frac * n1, (1 - frac) * n1)
        eta = float(rng.uniform(0.05, 0.95))
        mean, cov = convolved_detected_moments(m.n1, m.n2, m.n3, (eta,) * 3, truncation_limit(m.n1))
        a, b = cov[0, 1] + cov[0, 2], cov[1, 1] + cov[2, 2] + 2 * cov[1, 2]
        oracle = a / np.sqrt(cov[0, 0] * b)
        closed = eta * (1 + m.n1) / (1 + eta * m.n1)
        library = detected_correlation(m, DetectionConfig.uniform(eta), "1,2+3")
        worst_detected = max(worst_detected, abs(oracle - closed), abs(library - closed))
    ok = worst_ideal <= 1e-12 and worst_detected <= 1e-10
    verdict(
        "criterion 2 (eps_1,2+3)",
        ok,
        f"max |eps-1|={worst_ideal:.1e} over 1000 configs, detected max dev {worst_detected:.1e}",
    )


def test_criterion_3_distribution():
    t0 = time.perf_counter()
    worst = 0.0
    for n1 in (0.1, 1.0, 5.0):
        m = ModeMeans.from_pair(0.4 * n1, 0.6 * n1)
        nmax = truncation_limit(n1)
        n = np.arange(nmax + 1)
        nn, pp = np.meshgrid(n, n, indexing="ij")
        mask = pp <= nn
        total = joint_pmf(m, nn[mask], pp[mask], (nn - pp)[mask]).sum()
        worst = max(worst, abs(total - 1.0))
    m = ModeMeans.from_pair(0.4, 0.6)
    shots = sample_run(m, DetectionConfig.uniform(1.0), NoiseModel(), 1_000_000, seed=303, workers=4)
    pvalue = joint_chisquare(shots.records, m)
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-8 and pvalue > 1e-3 and elapsed < 60.0
    verdict(
        "criterion 3 (joint distribution)",
        ok,
        f"max normalisation error {worst:.1e}, chi-square p={pvalue:.3f}, {elapsed:.1f}s",
    )


def test_criterion_4_moment_identities():
    worst_moment = 0.0
    worst_ratio = 0.0
    for n1 in (0.05, 0.5, 1.0, 2.5, 5.0):
        for frac in (0.1, 0.5, 0.9):
            m = ModeMeans.from_pair(frac * n1, (1 - frac) * n1)
            _, b_mean, b_cov = brute_moments(m.n1, m.n2, m.n3, truncation_limit(n1) + 60)
            ms = photon_moments(m)
            closed_cov = np.array([
                [m.n1 * (1 + m.n1), m.n2 * (1 + m.n1), m.n3 * (1 + m.n1)],
                [m.n2 * (1 + m.n1), m.n2 * (1 + m.n2), m.n2 * m.n3],
                [m.n3 * (1 + m.n1), m.n2 * m.n3, m.n3 * (1 + m.n3)],
            ])
            worst_moment = max(
                worst_moment,
                np.max(np.abs(b_cov - closed_cov) / np.abs(closed_cov)),
                np.max(np.abs(b_mean - ms.mean) / ms.mean),
                np.max(np.abs(ms.cov - closed_cov) / np.abs(closed_cov)),
            )
            for g in ("1,2", "1,3", "2,3", "1,2+3"):
                worst_ratio = max(worst_ratio, abs(correlation_coefficient(m, g) - ms.correlation(g)))
    ok = worst_moment <= 1e-6 and worst_ratio <= 1e-12
    verdict(
        "criterion 4 (moment identities)",
        ok,
        f"max relative moment error {worst_moment:.1e}, max ratio deviation {worst_ratio:.1e}",
    )


def test_criterion_5_classicality_boundaries():
    d = DetectionConfig.uniform(ETA)
    grid = np.geomspace(1e-3, 1e3, 100)
    r23_min = np.inf
    offenders = []
    for n2 in grid:
        for n3 in grid:
            m = ModeMeans.from_pair(n2, n3)
            r23_min = min(r23_min, noise_reduction(m, d, "2,3"))
            if noise_reduction(m, d, "1,2") < 1 and noise_reduction(m, d, "1,3") < 1 and m.total >= 4:
                offenders.append(m.total)
    ok = r23_min >= 1.0 and not offenders
    detail = f"min R_2,3={r23_min:.6f}, {len(offenders)} points with both R_1,k<1 and total>=4"
    if offenders:
        detail += f" (largest total {max(offenders):.3f})"
    verdict("criterion 5 (classicality boundaries)", ok, detail)


def test_criterion_6_fit_round_trips():
    t0 = time.perf_counter()
    noiseless_err = 0.0
    for case in SCANS.values():
        data = synthesize_scan(case["x"], case["coupling"], case["eta1"], case["eta_sum"], 1.0, case["axis"], Z_LAB)
        spec = FitSpec(
            free=("coupling", "eta1", "eta_sum"),
            initial=dict(coupling=1.3 * case["coupling"], eta1=0.25, eta_sum=0.25, mu_scale=1.0),
        )
        res = fit_pump_scan(data, spec)
        for k in spec.free:
            noiseless_err = max(noiseless_err, abs(res.params[k] / case[k] - 1))
    successes = {}
    for name, case in SCANS.items():
        spec = FitSpec(
            free=("coupling", "eta1"),
            initial=dict(coupling=1.3 * case["coupling"], eta1=0.25, eta_sum=case["eta_sum"], mu_scale=1.0),
        )
        hits = 0
        for trial in range(100):
            rng = np.random.default_rng([606, trial])
            data = synthesize_scan(
                case["x"], case["coupling"], case["eta1"], case["eta_sum"], 1.0, case["axis"], Z_LAB, 0.01, rng
            )
            res = fit_pump_scan(data, spec, strict=False)
            close = all(abs(res.params[k] / case[k] - 1) <= 0.05 for k in spec.free)
            hits += bool(res.converged and close)
        successes[name] = hits
    elapsed = time.perf_counter() - t0
    ok = noiseless_err <= 1e-6 and all(h >= 95 for h in successes.values()) and elapsed < 30.0
    verdict(
        "criterion 6 (fit round-trips)",
        ok,
        f"noiseless max rel error {noiseless_err:.1e}, noisy within 5%: {successes}, {elapsed:.1f}s",
    )


def test_criterion_7_mismatch_shapes():
    matched = 2.0e6
    offsets = np.arange(-3, 4)
    g1 = [matched * (1 + 0.05 * k) for k in offsets]
    cfg = ScanConfig(
        g1, [8.17e5], z=Z_LAB, detection=DetectionConfig.uniform(ETA), noise=NoiseModel(), shots=20_000, seed=707,
        mismatch=CoherenceMismatch(matched_g1_sq=matched, collect_exponent=1.0, spurious_scale=300.0),
    )
    rows = run_scan(cfg)
    r = np.array([row["R_1_23"] for row in rows])
    i_min = int(np.argmin(r))
    centre = int(np.flatnonzero(offsets == 0)[0])
    single_minimum = np.all(np.diff(r[: i_min + 1]) < 0) and np.all(np.diff(r[i_min:]) > 0)
    spurious_excursion = r[0] - 1.0
    collect_excursion = r[-1] - 1.0
    ok = (
        single_minimum
        and abs(i_min - centre) <= 1
        and spurious_excursion > 0
        and collect_excursion > spurious_excursion
    )
    verdict(
        "criterion 7 (mismatch shapes)",
        ok,
        f"R-hat={np.round(r, 3).tolist()}, minimum at offset {offsets[i_min]}",
    )
