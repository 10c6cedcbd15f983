"""Exact photon-number statistics of the vacuum-seeded three-mode state.

The joint distribution carries the Kronecker constraint ``n = p + r``:
mode 1 always holds as many photons as modes 2 and 3 together.  Mode 1 is
thermal, and conditioned on its photon number the split between modes 2
and 3 is binomial with probability ``n2 / n1``.  Consequently every
marginal is thermal as well.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.special import gammaln, xlogy

from .core import CONSERVATION_TOL, ModeMeans
from .errors import InvalidParameterError, UndefinedCorrelationError

#: Oracle truncation box ``n <= ceil(TRUNCATION_BASE + TRUNCATION_SLOPE * n1)``.
TRUNCATION_BASE = 40
TRUNCATION_SLOPE = 20


def truncation_limit(n1: float) -> int:
    """Largest mode-1 photon number kept by truncated brute-force sums."""
    return int(math.ceil(TRUNCATION_BASE + TRUNCATION_SLOPE * n1))


class Grouping(str, Enum):
    """Pairs of photocurrents that can be correlated or subtracted."""

    G12 = "1,2"
    G13 = "1,3"
    G23 = "2,3"
    G1_23 = "1,2+3"

    @classmethod
    def parse(cls, value) -> "Grouping":
        if isinstance(value, cls):
            return value
        if isinstance(value, tuple):
            value = ",".join(str(v) for v in value)
        key = str(value).replace(" ", "")
        try:
            return cls(key)
        except ValueError:
            raise InvalidParameterError(f"unknown grouping {value!r}") from None

    @property
    def weights(self) -> tuple[np.ndarray, np.ndarray]:
        """Arm weights of the two photocurrents being compared."""
        e = np.eye(3)
        return {
            Grouping.G12: (e[0], e[1]),
            Grouping.G13: (e[0], e[2]),
            Grouping.G23: (e[1], e[2]),
            Grouping.G1_23: (e[0], e[1] + e[2]),
        }[self]

    @property
    def arms(self) -> tuple[int, ...]:
        """Zero-based arm indices involved in the grouping."""
        a, b = self.weights
        return tuple(int(i) for i in np.flatnonzero(a + b))

    @property
    def slug(self) -> str:
        """Column-friendly name, e.g. ``1_23`` for ``1,2+3``."""
        return self.value.replace(",", "_").replace("+", "")


ALL_GROUPINGS = tuple(Grouping)


@dataclass(frozen=True, eq=False)
class MomentSet:
    """First and second moments of three (photon or photocurrent) counts.

    ``mean`` has shape (3,) and ``cov`` is the symmetric 3x3 covariance
    matrix; the named properties are views onto these arrays.
    """

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.array(self.mean, dtype=float).reshape(3)
        cov = np.array(self.cov, dtype=float).reshape(3, 3)
        mean.flags.writeable = False
        cov.flags.writeable = False
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @classmethod
    def from_components(cls, mean, var, cov_12, cov_13, cov_23) -> "MomentSet":
        v1, v2, v3 = var
        cov = [[v1, cov_12, cov_13], [cov_12, v2, cov_23], [cov_13, cov_23, v3]]
        return cls(np.asarray(mean, dtype=float), np.asarray(cov, dtype=float))

    @property
    def var(self) -> np.ndarray:
        return np.diag(self.cov)

    @property
    def cov_12(self) -> float:
        return float(self.cov[0, 1])

    @property
    def cov_13(self) -> float:
        return float(self.cov[0, 2])

    @property
    def cov_23(self) -> float:
        return float(self.cov[1, 2])

    @property
    def gamma_comb(self) -> float:
        """``cov_23 - cov_12 - cov_13``, the cross term of the sum difference."""
        return self.cov_23 - self.cov_12 - self.cov_13

    def allclose(self, other: "MomentSet", rtol=1e-12, atol=0.0) -> bool:
        return np.allclose(self.mean, other.mean, rtol=rtol, atol=atol) and np.allclose(
            self.cov, other.cov, rtol=rtol, atol=atol
        )

    def correlation(self, grouping) -> float:
        """Pearson correlation between the two photocurrents of ``grouping``."""
        g = Grouping.parse(grouping)
        a, b = g.weights
        va = a @ self.cov @ a
        vb = b @ self.cov @ b
        if va <= 0 or vb <= 0:
            raise UndefinedCorrelationError(f"zero variance in grouping {g.value}")
        return float(np.clip((a @ self.cov @ b) / math.sqrt(va * vb), -1.0, 1.0))

    def difference_variance(self, grouping) -> float:
        a, b = Grouping.parse(grouping).weights
        w = a - b
        return float(w @ self.cov @ w)

    def noise_reduction(self, grouping) -> float:
        """Variance of the difference photocurrent over the summed means."""
        g = Grouping.parse(grouping)
        a, b = g.weights
        denom = float((a + b) @ self.mean)
        if denom <= 0:
            raise UndefinedCorrelationError(f"zero total mean in grouping {g.value}")
        return self.difference_variance(g) / denom


def _require_consistent(m: ModeMeans) -> None:
    if not m.is_consistent(CONSERVATION_TOL):
        raise InvalidParameterError(
            f"mode means violate n1 = n2 + n3 (defect {m.conservation_defect:.3g})"
        )


def log_joint_pmf(m: ModeMeans, n, p, r):
    """Natural log of the joint probability; ``-inf`` off the support."""
    _require_consistent(m)
    n, p, r = (np.asarray(a) for a in (n, p, r))
    if np.any(n < 0) or np.any(p < 0) or np.any(r < 0):
        raise InvalidParameterError("photon numbers must be non-negative")
    with np.errstate(divide="ignore"):
        logp = (
            xlogy(p, m.n2)
            + xlogy(r, m.n3)
            + gammaln(p + r + 1.0)
            - gammaln(p + 1.0)
            - gammaln(r + 1.0)
            - (1.0 + p + r) * math.log1p(m.n1)
        )
    out = np.where(n == p + r, logp, -np.inf)
    return float(out) if out.ndim == 0 else out


def joint_pmf(m: ModeMeans, n, p, r):
    """Probability of ``n`` photons in mode 1, ``p`` in mode 2, ``r`` in mode 3.

    Accepts scalars or broadcastable integer arrays.
    """
    out = np.exp(log_joint_pmf(m, n, p, r))
    return float(out) if np.ndim(out) == 0 else out


def _mode_mean(m: ModeMeans, mode: int) -> float:
    if mode not in (1, 2, 3):
        raise InvalidParameterError(f"mode index must be 1, 2 or 3, got {mode!r}")
    return (m.n1, m.n2, m.n3)[mode - 1]


def marginal_pmf(m: ModeMeans, mode: int, n):
    """Thermal distribution ``N^n / (1 + N)^(n + 1)`` of a single mode."""
    mean = _mode_mean(m, mode)
    n = np.asarray(n)
    if np.any(n < 0):
        raise InvalidParameterError("photon numbers must be non-negative")
    out = np.exp(xlogy(n, mean) - (n + 1.0) * math.log1p(mean))
    return float(out) if out.ndim == 0 else out


def photon_moments(m: ModeMeans) -> MomentSet:
    """Closed-form means, variances and covariances of the photon numbers."""
    n1, n2, n3 = m.n1, m.n2, m.n3
    return MomentSet.from_components(
        mean=(n1, n2, n3),
        var=(n1 * (1 + n1), n2 * (1 + n2), n3 * (1 + n3)),
        cov_12=n2 * (1 + n1),
        cov_13=n3 * (1 + n1),
        cov_23=n2 * n3,
    )


def correlation_coefficient(m: ModeMeans, grouping) -> float:
    """Ideal photon-number correlation coefficient for ``grouping``.

    Mode 1 against the sum of modes 2 and 3 is perfectly correlated, so
    that grouping returns exactly 1.

    Raises
    ------
    UndefinedCorrelationError
        If a mode involved in the grouping is empty.
    """
    g = Grouping.parse(grouping)
    means = m.as_array()
    if any(means[i] <= 0 for i in g.arms):
        raise UndefinedCorrelationError(f"zero-variance mode in grouping {g.value}")
    n1, n2, n3 = means
    if g is Grouping.G1_23:
        return 1.0
    if g is Grouping.G23:
        return math.sqrt(n2 * n3 / ((1 + n2) * (1 + n3)))
    nk = n2 if g is Grouping.G12 else n3
    return math.sqrt(nk * (1 + n1) / (n1 * (1 + nk)))


def correlation_large_n(m: ModeMeans, grouping) -> float:
    """First-order ``1/N`` expansion of :func:`correlation_coefficient`."""
    g = Grouping.parse(grouping)
    b1, b2, b3 = m.fractions
    n = m.total
    if g is Grouping.G1_23:
        return 1.0
    if g is Grouping.G23:
        return 1.0 - (b2 + b3) / (2 * b2 * b3 * n)
    bk = b2 if g is Grouping.G12 else b3
    return 1.0 - (b1 - bk) / (2 * b1 * bk * n)
