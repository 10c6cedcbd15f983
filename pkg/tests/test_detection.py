import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import convolved_detected_moments
from tripartite import (
    CouplingConfig, DetectionConfig, InvalidParameterError, ModeMeans, UndefinedCorrelationError,
    bipartite_nonclassicality_region, detected_correlation, detected_moments, mode_means,
    noise_reduction, photon_moments, povm_weight,
)
from tripartite.detection import detected_correlation_large_n
from tripartite.statistics import truncation_limit

pair_means = st.tuples(st.floats(0.0, 50.0), st.floats(0.0, 50.0)).filter(lambda t: t[0] + t[1] > 1e-6)


def test_povm_examples():
    assert povm_weight(1.0, 5, 5) == 1.0
    assert povm_weight(0.28, 1, 0) == pytest.approx(0.72, rel=1e-15)
    assert povm_weight(0.5, 2, 1) == pytest.approx(0.5, rel=1e-15)
    assert povm_weight(0.5, 2, 3) == 0
    for n in range(12):
        assert sum(povm_weight(0.37, n, m) for m in range(n + 1)) == pytest.approx(1.0, abs=1e-14)
    with pytest.raises(InvalidParameterError):
        povm_weight(1.2, 1, 0)


def test_detection_config():
    d = DetectionConfig(eta_1=0.31, eta_2=0.28, eta_3=0.28)
    assert not d.is_uniform
    u = DetectionConfig(0.1, 0.2, 0.3, eta_uniform=0.5)
    assert u.is_uniform and list(u.etas) == [0.5] * 3
    with pytest.raises(InvalidParameterError):
        DetectionConfig(eta_1=-0.1)


def test_detected_moments_examples(ref_means, eta028):
    assert detected_moments(ref_means, DetectionConfig.uniform(1.0)).allclose(photon_moments(ref_means), rtol=0)
    dm = detected_moments(ref_means, eta028)
    assert dm.mean[0] == pytest.approx(0.28)
    assert dm.var[0] == pytest.approx(0.3584, rel=1e-14)
    z = detected_moments(ModeMeans(0, 0, 0), DetectionConfig(0.3, 0.5, 0.9))
    assert not z.mean.any() and not z.cov.any()


@pytest.mark.parametrize(
    "means, etas",
    [
        ((1.0, 0.5, 0.5), (0.28, 0.28, 0.28)),
        ((3.0, 1.0, 2.0), (0.31, 0.28, 0.28)),
        ((2.0, 1.9, 0.1), (0.9, 0.4, 0.6)),
    ],
)
def test_detected_moments_against_convolution(means, etas):
    m = ModeMeans(*means)
    mean, cov = convolved_detected_moments(*means, etas, n_max=truncation_limit(means[0]))
    dm = detected_moments(m, DetectionConfig(*etas))
    assert np.allclose(dm.mean, mean, rtol=1e-8)
    assert np.allclose(dm.cov, cov, rtol=1e-8)


def test_detected_correlation_examples():
    m = ModeMeans(1, 0.5, 0.5)
    assert detected_correlation(m, DetectionConfig.uniform(0.28), "1,2+3") == pytest.approx(0.4375, rel=1e-14)
    mean, cov = convolved_detected_moments(1, 0.5, 0.5, (0.28,) * 3, n_max=120)
    num = cov[0, 1] + cov[0, 2]
    den = math.sqrt(cov[0, 0] * (cov[1, 1] + cov[2, 2] + 2 * cov[1, 2]))
    assert num / den == pytest.approx(0.4375, rel=1e-10)
    for n in (0.1, 3.0, 1e4):
        assert detected_correlation(ModeMeans.from_pair(n / 3, 2 * n / 3), DetectionConfig.uniform(1.0), "1,2+3") == 1.0


def test_detected_partial_expansion_at_large_n():
    m = ModeMeans(1e4, 5e3, 5e3)
    d = DetectionConfig.uniform(0.28)
    exact = detected_moments(m, d).correlation("2,3")
    approx = detected_correlation_large_n(m, 0.28, "2,3")
    assert approx == pytest.approx(1 - 0.5 / 700, rel=1e-14)
    assert exact == pytest.approx(approx, abs=1e-6)
    for g in ("1,2", "1,3", "1,2+3"):
        assert detected_correlation(m, d, g) == pytest.approx(detected_correlation_large_n(m, 0.28, g), abs=1e-6)
    # without eta in the denominator the 1,k expansion misses by ~3e-4
    b1, bk = 0.5, 0.25
    uncorrected = 1 - (b1 + bk - 2 * 0.28 * bk) / (2 * b1 * bk * m.total)
    assert abs(detected_correlation(m, d, "1,2") - uncorrected) > 1e-4


@pytest.mark.parametrize("g", ["1,2", "1,3", "2,3", "1,2+3"])
def test_detected_expansion_error_is_second_order(g):
    d = DetectionConfig.uniform(0.4)
    errs = []
    for n in (1e3, 1e4, 1e5):
        m = ModeMeans(0.5 * n, 0.2 * n, 0.3 * n)
        errs.append(abs(detected_correlation(m, d, g) - detected_correlation_large_n(m, 0.4, g)))
    for a, b in zip(errs, errs[1:]):
        assert 50 < a / b < 200


def test_uniform_closed_form_matches_general_algebra(eta028):
    m = ModeMeans(4.0, 1.5, 2.5)
    ms = detected_moments(m, eta028)
    for g in ("1,2", "1,3", "2,3", "1,2+3"):
        assert noise_reduction(m, eta028, g) == pytest.approx(ms.noise_reduction(g), rel=1e-12)
        assert detected_correlation(m, eta028, g) == pytest.approx(ms.correlation(g), rel=1e-12)


def test_noise_reduction_examples(eta028):
    assert noise_reduction(ModeMeans(7, 3, 4), eta028, "1,2+3") == 0.72
    for eta in (0.1, 0.5, 1.0):
        assert noise_reduction(ModeMeans(4, 2, 2), DetectionConfig.uniform(eta), "2,3") == 1.0
    assert noise_reduction(ModeMeans(1, 1, 0), eta028, "1,2") == pytest.approx(0.72, rel=1e-14)
    with pytest.raises(UndefinedCorrelationError):
        noise_reduction(ModeMeans(0, 0, 0), eta028, "1,2+3")


def test_sum_noise_reduction_sweep():
    rng = np.random.default_rng(11)
    for _ in range(1000):
        c = CouplingConfig(*(10 ** rng.uniform(-2, 1, 2)), z=rng.uniform(0.05, 2))
        m = mode_means(c)
        eta = rng.uniform(0.01, 1)
        d = DetectionConfig.uniform(eta)
        assert noise_reduction(m, d, "1,2+3") == 1 - eta
        assert detected_moments(m, d).noise_reduction("1,2+3") == pytest.approx(1 - eta, abs=1e-10)


@given(pair=pair_means, eta=st.floats(1e-3, 1.0))
@settings(max_examples=300, deadline=None)
def test_modes_two_and_three_never_beat_shot_noise(pair, eta):
    m = ModeMeans.from_pair(*pair)
    assert noise_reduction(m, DetectionConfig.uniform(eta), "2,3") >= 1.0


@given(pair=pair_means, eta=st.floats(1e-3, 1.0))
@settings(max_examples=300, deadline=None)
def test_region_agrees_with_noise_reduction(pair, eta):
    m = ModeMeans.from_pair(*pair)
    d = DetectionConfig.uniform(eta)
    region = bipartite_nonclassicality_region(m)
    for flag, g in zip(region, ("1,2", "1,3")):
        r = noise_reduction(m, d, g)
        if abs(r - 1) > 1e-12:
            assert flag == (r < 1)


def test_region_examples():
    assert bipartite_nonclassicality_region(ModeMeans(1, 0.5, 0.5)) == (True, True)
    assert bipartite_nonclassicality_region(ModeMeans(4, 2, 2)) == (False, False)
    assert bipartite_nonclassicality_region(ModeMeans(1, 1, 0)) == (True, False)


def test_both_bipartite_below_shot_noise_bounds_mode_one():
    # the exact consequence of N1 < N_k + sqrt(2 N_k) for both k: N2, N3 < 2
    grid = np.linspace(0, 3, 301)
    for n2 in grid:
        for n3 in grid:
            m = ModeMeans.from_pair(n2, n3)
            if all(bipartite_nonclassicality_region(m)):
                assert n2 < 2 and n3 < 2 and m.n1 < 4 and m.total < 8


def test_nonuniform_efficiency_breaks_perfect_sum_reduction():
    m = ModeMeans(2e3, 1e3, 1e3)
    d = DetectionConfig(0.31, 0.28, 0.28)
    assert noise_reduction(m, d, "1,2+3") > 1
