"""Shared statistical helpers for Monte Carlo tests."""
import numpy as np
from scipy.stats import chisquare

from tripartite import joint_pmf


def joint_chisquare(records, means, min_expected=5.0):
    """Chi-square p-value of sampled (n1, n2) counts against the joint pmf.

    Cells with expected count below ``min_expected`` are pooled into one
    overflow cell.
    """
    counts = records.astype(int)
    assert np.all(counts[:, 0] == counts[:, 1] + counts[:, 2])
    shots = len(counts)
    n_max = int(counts[:, 0].max()) + 20
    n = np.repeat(np.arange(n_max + 1), np.arange(1, n_max + 2))
    p = np.concatenate([np.arange(k + 1) for k in range(n_max + 1)])
    probs = joint_pmf(means, n, p, n - p)
    index = {(a, b): i for i, (a, b) in enumerate(zip(n, p))}
    observed = np.zeros(len(n))
    cells, cell_counts = np.unique(counts[:, :2], axis=0, return_counts=True)
    for (a, b), c in zip(cells, cell_counts):
        observed[index[(a, b)]] += c
    expected = probs * shots
    keep = expected >= min_expected
    obs = np.append(observed[keep], observed[~keep].sum())
    exp = np.append(expected[keep], shots - expected[keep].sum())
    return chisquare(obs, exp).pvalue


def poisson_shotset(lams, shots, seed):
    from tripartite import ShotSet

    rng = np.random.default_rng(seed)
    return ShotSet(rng.poisson(lams, size=(shots, 3)).astype(float), seed=seed)


def thermal_split_shotset(mean_total, shots, seed, eta=1.0):
    """Classical fixture: a thermal beam divided by two beam splitters.

    Arm 1 receives half the photons and arms 2 and 3 share the rest, so the
    photon numbers are strongly correlated yet never below shot noise.
    """
    from tripartite import ShotSet

    rng = np.random.default_rng(seed)
    n = rng.geometric(1.0 / (1.0 + mean_total), size=shots) - 1
    a = rng.binomial(n, 0.5)
    b = rng.binomial(n - a, 0.5)
    arms = np.stack([a, b, n - a - b], axis=1)
    return ShotSet(rng.binomial(arms, eta).astype(float), seed=seed)


ACCEPTANCE_LINES = []


def verdict(label, ok, detail=""):
    """Record and print one PASS/FAIL line, then assert ``ok``."""
    line = f"{'PASS' if ok else 'FAIL'} {label}" + (f": {detail}" if detail else "")
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line
