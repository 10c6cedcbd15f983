"""Inefficient photodetection: binomial-loss POVM and detected statistics.

Each arm loses photons independently with probability ``1 - eta_j``.  The
closed forms below assume equal efficiencies on the three arms; unequal
efficiencies go through the general moment algebra of :class:`MomentSet`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.stats import binom

from .core import ModeMeans
from .errors import InvalidParameterError, UndefinedCorrelationError
from .statistics import Grouping, MomentSet, photon_moments


def _check_eta(name: str, eta: float) -> float:
    eta = float(eta)
    if not (0.0 <= eta <= 1.0):
        raise InvalidParameterError(f"{name} must lie in [0, 1], got {eta!r}")
    return eta


@dataclass(frozen=True)
class DetectionConfig:
    """Quantum efficiencies of the three detection arms.

    ``eta_uniform``, when given, overrides the per-arm values.
    """

    eta_1: float = 1.0
    eta_2: float = 1.0
    eta_3: float = 1.0
    eta_uniform: Optional[float] = None

    def __post_init__(self):
        if self.eta_uniform is not None:
            eta = _check_eta("eta_uniform", self.eta_uniform)
            object.__setattr__(self, "eta_uniform", eta)
            for name in ("eta_1", "eta_2", "eta_3"):
                object.__setattr__(self, name, eta)
        for name in ("eta_1", "eta_2", "eta_3"):
            object.__setattr__(self, name, _check_eta(name, getattr(self, name)))

    @classmethod
    def uniform(cls, eta: float) -> "DetectionConfig":
        return cls(eta_uniform=eta)

    @property
    def etas(self) -> np.ndarray:
        return np.array([self.eta_1, self.eta_2, self.eta_3])

    @property
    def is_uniform(self) -> bool:
        return self.eta_1 == self.eta_2 == self.eta_3


def povm_weight(eta: float, n, m):
    """Probability that ``n`` incident photons yield ``m`` detections."""
    eta = _check_eta("eta", eta)
    out = binom.pmf(m, n, eta)
    return float(out) if np.ndim(out) == 0 else out


def thin_moments(moments: MomentSet, etas) -> MomentSet:
    """Moments after independent binomial loss with efficiency ``etas`` per arm."""
    etas = np.asarray(etas, dtype=float)
    mean = etas * moments.mean
    cov = np.outer(etas, etas) * moments.cov + np.diag(etas * (1 - etas) * moments.mean)
    return MomentSet(mean, cov)


def detected_moments(m: ModeMeans, d: DetectionConfig) -> MomentSet:
    """Moments of the detected photon numbers.

    ``<m_j> = eta_j N_j``,
    ``var(m_j) = eta_j^2 var(n_j) + eta_j (1 - eta_j) N_j`` and
    ``cov(m_j, m_k) = eta_j eta_k cov(n_j, n_k)``.
    """
    return thin_moments(photon_moments(m), d.etas)


def detected_correlation(m: ModeMeans, d: DetectionConfig, grouping) -> float:
    """Correlation coefficient of the detected photocurrents.

    For equal efficiencies the sum grouping uses ``eta (1 + N1) / (1 + eta N1)``;
    everything else is computed exactly from :func:`detected_moments`.
    """
    g = Grouping.parse(grouping)
    if g is Grouping.G1_23 and d.is_uniform:
        eta = d.eta_1
        if eta == 0 or m.n1 == 0:
            raise UndefinedCorrelationError("zero detected variance in grouping 1,2+3")
        return eta * (1 + m.n1) / (1 + eta * m.n1)
    return detected_moments(m, d).correlation(g)


def detected_correlation_large_n(m: ModeMeans, eta: float, grouping) -> float:
    """Leading ``1/N`` behaviour of the detected correlations at equal efficiency.

    For mode 1 against mode k the expansion of the exact ratio carries
    ``eta`` in the denominator: ``1 - (b1 + bk - 2 eta bk) / (2 eta b1 bk N)``.
    """
    g = Grouping.parse(grouping)
    b1, b2, b3 = m.fractions
    n = m.total
    if g is Grouping.G1_23:
        return 1.0 - (1 - eta) / (eta * b1 * n)
    if g is Grouping.G23:
        return 1.0 - (b2 + b3) / (2 * eta * b2 * b3 * n)
    bk = b2 if g is Grouping.G12 else b3
    return 1.0 - (b1 + bk - 2 * eta * bk) / (2 * eta * b1 * bk * n)


def noise_reduction(m: ModeMeans, d: DetectionConfig, grouping) -> float:
    """Noise-reduction factor of the difference photocurrent for ``grouping``.

    Values below one certify nonclassical correlations.  With equal
    efficiencies the sum grouping gives exactly ``1 - eta`` for every
    vacuum-seeded state.

    Raises
    ------
    UndefinedCorrelationError
        If the detected means of the grouping sum to zero.
    """
    g = Grouping.parse(grouping)
    denom = float(sum(d.etas[i] * m.as_array()[i] for i in g.arms))
    if denom <= 0:
        raise UndefinedCorrelationError(f"zero total mean in grouping {g.value}")
    if not d.is_uniform:
        return detected_moments(m, d).noise_reduction(g)

    eta = d.eta_1
    n1, n2, n3 = m.n1, m.n2, m.n3
    if g is Grouping.G1_23:
        return 1.0 - eta
    if g is Grouping.G23:
        return 1.0 + eta * (n2 - n3) ** 2 / (n2 + n3)
    nk = n2 if g is Grouping.G12 else n3
    return 1.0 + eta * ((n1 - nk) ** 2 - 2 * nk) / (n1 + nk)


def bipartite_nonclassicality_region(m: ModeMeans) -> tuple[bool, bool]:
    """Whether mode 1 beats shot noise against mode 2 and against mode 3.

    ``R_{1,k} < 1`` holds exactly when ``N1 < N_k + sqrt(2 N_k)``, for any
    nonzero efficiency.
    """
    return (
        m.n1 < m.n2 + math.sqrt(2 * m.n2),
        m.n1 < m.n3 + math.sqrt(2 * m.n3),
    )
